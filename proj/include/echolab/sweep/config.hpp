#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "echolab/common.hpp"

namespace echolab::sweep {

/// One validation finding, tied to the config field that caused it.
struct ConfigError {
    std::string field;
    std::string message;
};

/// Plain-text key/value + sections format:
///   - `key = value` lines; values keep internal spaces, outer spaces trimmed
///   - `[section]` lines prefix following keys as `section.key`
///   - `#` starts a comment (full line or trailing); blank lines ignored
///   - lists are comma separated; numeric ranges use `start:step:stop`
///     (inclusive of both ends within half a step)
class KeyValueConfig {
public:
    static KeyValueConfig parse(const std::string& text, std::vector<ConfigError>& errors) {
        KeyValueConfig cfg;
        std::istringstream in(text);
        std::string line;
        std::string section;
        int line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            const std::string trimmed = trim(line);
            if (trimmed.empty()) continue;
            if (trimmed.front() == '[') {
                if (trimmed.back() != ']') {
                    errors.push_back({"line " + std::to_string(line_no), "unterminated section header"});
                    continue;
                }
                section = trim(trimmed.substr(1, trimmed.size() - 2));
                continue;
            }
            const auto eq = trimmed.find('=');
            if (eq == std::string::npos) {
                errors.push_back({"line " + std::to_string(line_no), "expected key = value"});
                continue;
            }
            const std::string key = trim(trimmed.substr(0, eq));
            const std::string value = trim(trimmed.substr(eq + 1));
            if (key.empty()) {
                errors.push_back({"line " + std::to_string(line_no), "empty key"});
                continue;
            }
            cfg.values_[section.empty() ? key : section + "." + key] = value;
        }
        return cfg;
    }

    void set(const std::string& key, const std::string& value) { values_[key] = value; }
    bool has(const std::string& key) const { return values_.count(key) > 0; }

    std::string get_string(const std::string& key, const std::string& fallback) const {
        const auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second;
    }

    std::optional<double> get_double(const std::string& key, std::vector<ConfigError>& errors) const {
        const auto it = values_.find(key);
        if (it == values_.end()) return std::nullopt;
        try {
            std::size_t used = 0;
            const double v = std::stod(it->second, &used);
            if (used != it->second.size()) throw std::invalid_argument("trailing characters");
            return v;
        } catch (const std::exception&) {
            errors.push_back({key, "not a number: '" + it->second + "'"});
            return std::nullopt;
        }
    }

    std::optional<long long> get_int(const std::string& key, std::vector<ConfigError>& errors) const {
        const auto it = values_.find(key);
        if (it == values_.end()) return std::nullopt;
        try {
            std::size_t used = 0;
            const long long v = std::stoll(it->second, &used);
            if (used != it->second.size()) throw std::invalid_argument("trailing characters");
            return v;
        } catch (const std::exception&) {
            errors.push_back({key, "not an integer: '" + it->second + "'"});
            return std::nullopt;
        }
    }

    /// Comma list and/or start:step:stop ranges, e.g. "0:0.02:0.5" or "0.1,0.3,0.5".
    std::optional<std::vector<double>> get_grid(const std::string& key,
                                                std::vector<ConfigError>& errors) const {
        const auto it = values_.find(key);
        if (it == values_.end()) return std::nullopt;
        std::vector<double> out;
        std::istringstream in(it->second);
        std::string piece;
        while (std::getline(in, piece, ',')) {
            piece = trim(piece);
            if (piece.empty()) continue;
            const auto c1 = piece.find(':');
            if (c1 == std::string::npos) {
                try {
                    out.push_back(std::stod(piece));
                } catch (const std::exception&) {
                    errors.push_back({key, "not a number: '" + piece + "'"});
                    return std::nullopt;
                }
                continue;
            }
            const auto c2 = piece.find(':', c1 + 1);
            if (c2 == std::string::npos) {
                errors.push_back({key, "range must be start:step:stop, got '" + piece + "'"});
                return std::nullopt;
            }
            try {
                const double start = std::stod(piece.substr(0, c1));
                const double step = std::stod(piece.substr(c1 + 1, c2 - c1 - 1));
                const double stop = std::stod(piece.substr(c2 + 1));
                if (step <= 0.0 || stop < start) {
                    errors.push_back({key, "range needs step > 0 and stop >= start"});
                    return std::nullopt;
                }
                for (double v = start; v <= stop + 0.5 * step; v += step)
                    out.push_back(std::min(v, stop));
            } catch (const std::exception&) {
                errors.push_back({key, "bad range '" + piece + "'"});
                return std::nullopt;
            }
        }
        return out;
    }

    const std::map<std::string, std::string>& entries() const { return values_; }

private:
    static std::string trim(const std::string& s) {
        const auto b = s.find_first_not_of(" \t\r\n");
        if (b == std::string::npos) return {};
        const auto e = s.find_last_not_of(" \t\r\n");
        return s.substr(b, e - b + 1);
    }

    std::map<std::string, std::string> values_;
};

enum class Experiment {
    sweep_qfi,
    sweep_theta,
    gain_map,
    noise_robustness,
    floquet_mc,
    echo_run,
    ops_check
};

inline std::optional<Experiment> experiment_from_name(const std::string& name) {
    if (name == "sweep-qfi") return Experiment::sweep_qfi;
    if (name == "sweep-theta") return Experiment::sweep_theta;
    if (name == "gain-map") return Experiment::gain_map;
    if (name == "noise-robustness") return Experiment::noise_robustness;
    if (name == "floquet-mc") return Experiment::floquet_mc;
    if (name == "echo-run") return Experiment::echo_run;
    if (name == "ops-check") return Experiment::ops_check;
    return std::nullopt;
}

inline std::string experiment_name(Experiment e) {
    switch (e) {
        case Experiment::sweep_qfi: return "sweep-qfi";
        case Experiment::sweep_theta: return "sweep-theta";
        case Experiment::gain_map: return "gain-map";
        case Experiment::noise_robustness: return "noise-robustness";
        case Experiment::floquet_mc: return "floquet-mc";
        case Experiment::echo_run: return "echo-run";
        case Experiment::ops_check: return "ops-check";
    }
    return "?";
}

enum class ThetaPolicy { theta_r, theta_p, both, explicit_value };

/// Typed experiment description assembled from a KeyValueConfig.
struct SweepConfig {
    Experiment experiment = Experiment::sweep_qfi;
    int n_atoms = 100;
    double chi = 1.0;
    std::vector<double> gamma_grid{0.0};
    std::pair<double, double> t1_window{0.25, 3.0};
    int t2_points = 200;
    ThetaPolicy theta_policy = ThetaPolicy::both;
    double theta_value = 0.0;
    // detection noise
    double noise_strength = 0.1;
    double noise_step = 0.01;
    bool normalized_moments = true;
    // floquet
    double pulse_frequency = 500.0;
    int trials = 100;
    double area_rel_sd = 0.0;
    double separation_rel_sd = 0.0;
    double phase_sd = 0.0;
    bool paired_noise = true;
    std::vector<double> frequency_scan;  // optional frequency channel
    // echo-run specifics
    double echo_t1 = -1.0;  // < 0: optimize
    double echo_t2 = -1.0;  // < 0: same as t1
    double echo_phi = 0.0;
    double echo_measure = std::nan("");  // nan: optimize
    // execution
    std::uint64_t seed = 0;
    bool seed_given = false;
    int workers = 0;
    std::string out_dir = "out";
    bool write_csv = true, write_json = true, write_svg = false;
    KeyValueConfig raw;

    static SweepConfig from_config(const KeyValueConfig& kv, std::vector<ConfigError>& errors) {
        SweepConfig c;
        c.raw = kv;
        const std::string exp = kv.get_string("experiment", "");
        if (exp.empty()) {
            errors.push_back({"experiment", "missing (one of sweep-qfi, sweep-theta, gain-map, "
                                            "noise-robustness, floquet-mc, echo-run, ops-check)"});
        } else if (const auto e = experiment_from_name(exp)) {
            c.experiment = *e;
        } else {
            errors.push_back({"experiment", "unknown experiment '" + exp + "'"});
        }
        if (const auto v = kv.get_int("n_atoms", errors)) c.n_atoms = static_cast<int>(*v);
        if (const auto v = kv.get_double("lmg.chi", errors)) c.chi = *v;
        if (const auto g = kv.get_grid("lmg.gamma", errors)) c.gamma_grid = *g;
        if (const auto v = kv.get_double("t1.window_lo", errors)) c.t1_window.first = *v;
        if (const auto v = kv.get_double("t1.window_hi", errors)) c.t1_window.second = *v;
        if (const auto v = kv.get_int("t2.points", errors)) c.t2_points = static_cast<int>(*v);
        const std::string policy = kv.get_string("theta.policy", "both");
        if (policy == "theta_r") c.theta_policy = ThetaPolicy::theta_r;
        else if (policy == "theta_p") c.theta_policy = ThetaPolicy::theta_p;
        else if (policy == "both") c.theta_policy = ThetaPolicy::both;
        else if (policy == "explicit") c.theta_policy = ThetaPolicy::explicit_value;
        else errors.push_back({"theta.policy", "must be theta_r, theta_p, both or explicit"});
        if (const auto v = kv.get_double("theta.value", errors)) c.theta_value = *v;
        if (const auto v = kv.get_double("detection.strength", errors)) c.noise_strength = *v;
        if (const auto v = kv.get_double("detection.step", errors)) c.noise_step = *v;
        const std::string conv = kv.get_string("detection.convention", "normalized");
        if (conv == "normalized") c.normalized_moments = true;
        else if (conv == "unnormalized") c.normalized_moments = false;
        else errors.push_back({"detection.convention", "must be normalized or unnormalized"});
        if (const auto v = kv.get_double("floquet.frequency", errors)) c.pulse_frequency = *v;
        if (const auto v = kv.get_int("floquet.trials", errors)) c.trials = static_cast<int>(*v);
        if (const auto v = kv.get_double("floquet.area_rel_sd", errors)) c.area_rel_sd = *v;
        if (const auto v = kv.get_double("floquet.separation_rel_sd", errors))
            c.separation_rel_sd = *v;
        if (const auto v = kv.get_double("floquet.phase_sd_rad", errors)) c.phase_sd = *v;
        if (const auto v = kv.get_double("floquet.phase_sd_two_pi_fraction", errors))
            c.phase_sd = *v * 2.0 * kPi;
        const std::string corr = kv.get_string("floquet.correlation", "paired");
        if (corr == "paired") c.paired_noise = true;
        else if (corr == "independent") c.paired_noise = false;
        else errors.push_back({"floquet.correlation", "must be paired or independent"});
        if (const auto g = kv.get_grid("floquet.frequency_scan", errors)) c.frequency_scan = *g;
        if (const auto v = kv.get_double("echo.t1", errors)) c.echo_t1 = *v;
        if (const auto v = kv.get_double("echo.t2", errors)) c.echo_t2 = *v;
        if (const auto v = kv.get_double("echo.phi", errors)) c.echo_phi = *v;
        if (const auto v = kv.get_double("echo.measure_angle", errors)) c.echo_measure = *v;
        if (const auto v = kv.get_int("seed", errors)) {
            c.seed = static_cast<std::uint64_t>(*v);
            c.seed_given = true;
        }
        if (const auto v = kv.get_int("workers", errors)) c.workers = static_cast<int>(*v);
        c.out_dir = kv.get_string("out", c.out_dir);
        const std::string formats = kv.get_string("formats", "csv,json");
        c.write_csv = formats.find("csv") != std::string::npos;
        c.write_json = formats.find("json") != std::string::npos;
        c.write_svg = formats.find("svg") != std::string::npos;
        return c;
    }

    std::vector<ConfigError> validate() const {
        std::vector<ConfigError> errors;
        if (n_atoms < 1) errors.push_back({"n_atoms", "must be >= 1"});
        if (chi == 0.0) errors.push_back({"lmg.chi", "must be nonzero"});
        if (gamma_grid.empty()) errors.push_back({"lmg.gamma", "grid must be nonempty"});
        for (double g : gamma_grid)
            if (g < 0.0 || g > 0.5) {
                errors.push_back({"lmg.gamma", "gamma = " + std::to_string(g) +
                                                   " outside the canonical range 0 <= gamma <= 0.5"});
                break;
            }
        if (t1_window.first <= 0.0 || t1_window.second <= t1_window.first)
            errors.push_back({"t1.window_lo", "window must satisfy 0 < lo < hi"});
        if (t2_points < 2) errors.push_back({"t2.points", "need at least 2 grid points"});
        if (theta_policy == ThetaPolicy::explicit_value &&
            !(theta_value >= 0.0 && theta_value < kPi))
            errors.push_back({"theta.value", "explicit theta must lie in [0, pi)"});
        if (noise_strength - noise_step <= 0.0 || noise_strength + noise_step >= 1.0)
            errors.push_back({"detection.strength", "strength +- step must stay inside (0, 1)"});
        if (experiment == Experiment::floquet_mc) {
            if (trials < 1) errors.push_back({"floquet.trials", "must be >= 1"});
            if (pulse_frequency <= 0.0) errors.push_back({"floquet.frequency", "must be > 0"});
            const bool stochastic = area_rel_sd > 0.0 || separation_rel_sd > 0.0 || phase_sd > 0.0;
            if (stochastic && !seed_given)
                errors.push_back({"seed", "required when any stochastic element is enabled"});
            if (area_rel_sd < 0.0 || separation_rel_sd < 0.0 || phase_sd < 0.0)
                errors.push_back({"floquet.area_rel_sd", "standard deviations must be >= 0"});
        }
        if (experiment == Experiment::echo_run) {
            if (echo_t1 == 0.0) errors.push_back({"echo.t1", "t1 must be positive (or omitted to optimize)"});
            if (std::abs(echo_phi) > 0.1)
                errors.push_back({"echo.phi", "|phi| must be <= 0.1 for the linear-response regime"});
        }
        return errors;
    }
};

} // namespace echolab::sweep
