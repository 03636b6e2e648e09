#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "echolab/sweep/config.hpp"
#include "echolab/sweep/experiments.hpp"
#include "echolab/version.hpp"

namespace {

using echolab::sweep::ConfigError;
using echolab::sweep::KeyValueConfig;
using echolab::sweep::SweepConfig;

std::string read_file(const std::string& path, bool& ok) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        ok = false;
        return {};
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    ok = true;
    return ss.str();
}

void print_errors(const std::vector<ConfigError>& errors) {
    for (const auto& e : errors) std::cerr << "config error: " << e.field << ": " << e.message << "\n";
}

struct CliOptions {
    std::string config_path;
    std::vector<std::string> overrides;
    std::string out_dir;
    int workers = -1;
    long long seed = -1;
    std::string formats;
};

int load_and_run(const std::string& experiment, const CliOptions& opt) {
    bool ok = false;
    const std::string text = opt.config_path.empty() ? std::string{} : read_file(opt.config_path, ok);
    if (!opt.config_path.empty() && !ok) {
        std::cerr << "config error: cannot read " << opt.config_path << "\n";
        return 1;
    }
    std::vector<ConfigError> errors;
    KeyValueConfig kv = KeyValueConfig::parse(text, errors);
    kv.set("experiment", experiment);
    for (const auto& ov : opt.overrides) {
        const auto eq = ov.find('=');
        if (eq == std::string::npos) {
            std::cerr << "config error: --set expects key=value, got '" << ov << "'\n";
            return 1;
        }
        kv.set(ov.substr(0, eq), ov.substr(eq + 1));
    }
    if (!opt.out_dir.empty()) kv.set("out", opt.out_dir);
    if (opt.workers >= 0) kv.set("workers", std::to_string(opt.workers));
    if (opt.seed >= 0) kv.set("seed", std::to_string(opt.seed));
    if (!opt.formats.empty()) kv.set("formats", opt.formats);

    const SweepConfig cfg = SweepConfig::from_config(kv, errors);
    const auto validation = cfg.validate();
    errors.insert(errors.end(), validation.begin(), validation.end());
    if (!errors.empty()) {
        print_errors(errors);
        return 1;
    }
    try {
        return echolab::sweep::run(cfg);
    } catch (const std::exception& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 2;
    }
}

int validate_only(const std::string& path) {
    bool ok = false;
    const std::string text = read_file(path, ok);
    if (!ok) {
        std::cerr << "config error: cannot read " << path << "\n";
        return 1;
    }
    std::vector<ConfigError> errors;
    const KeyValueConfig kv = KeyValueConfig::parse(text, errors);
    const SweepConfig cfg = SweepConfig::from_config(kv, errors);
    const auto validation = cfg.validate();
    errors.insert(errors.end(), validation.begin(), validation.end());
    if (!errors.empty()) {
        print_errors(errors);
        return 1;
    }
    std::cout << "ok: " << path << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"echolab: collective-spin echo interferometry sweeps"};
    app.set_version_flag("--version", echolab::kVersion);
    app.require_subcommand(1);

    CliOptions opt;
    const std::vector<std::string> experiments = {"sweep-qfi",  "sweep-theta", "gain-map",
                                                  "noise-robustness", "floquet-mc", "echo-run",
                                                  "ops-check"};
    std::string chosen;
    for (const auto& name : experiments) {
        CLI::App* sub = app.add_subcommand(name, "run the " + name + " experiment");
        sub->add_option("--config", opt.config_path, "key/value config file");
        sub->add_option("--set", opt.overrides, "override config entries, key=value")
            ->take_all();
        sub->add_option("--out", opt.out_dir, "output directory");
        sub->add_option("--workers", opt.workers, "worker threads (default ECHOLAB_WORKERS)");
        sub->add_option("--seed", opt.seed, "seed for stochastic experiments");
        sub->add_option("--format", opt.formats, "comma list of csv,json,svg");
        sub->callback([&chosen, name] { chosen = name; });
    }
    std::string validate_path;
    CLI::App* val = app.add_subcommand("validate", "check a config file and list all violations");
    val->add_option("path", validate_path, "config file")->required();

    CLI11_PARSE(app, argc, argv);

    if (val->parsed()) return validate_only(validate_path);
    return load_and_run(chosen, opt);
}
