#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "echolab/detection_noise.hpp"
#include "echolab/echolab.hpp"
#include "echolab/sweep/config.hpp"
#include "echolab/sweep/writers.hpp"

namespace echolab::sweep {

namespace detail {

inline nlohmann::json config_echo(const SweepConfig& cfg) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [k, v] : cfg.raw.entries()) j[k] = v;
    return j;
}

/// Re-emit the raw config in the same grammar so a run is reproducible from
/// its own artifacts.
inline std::string config_roundtrip(const SweepConfig& cfg) {
    std::map<std::string, std::map<std::string, std::string>> sections;
    for (const auto& [k, v] : cfg.raw.entries()) {
        const auto dot = k.find('.');
        if (dot == std::string::npos)
            sections[""][k] = v;
        else
            sections[k.substr(0, dot)][k.substr(dot + 1)] = v;
    }
    std::string out = "# emitted by echolab " + std::string(kVersion) + "\n";
    for (const auto& [section, keys] : sections) {
        if (!section.empty()) out += "[" + section + "]\n";
        for (const auto& [k, v] : keys) out += k + " = " + v + "\n";
    }
    return out;
}

struct RunContext {
    std::filesystem::path dir;
    SweepConfig cfg;
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    nlohmann::json summary = nlohmann::json::object();
    int exit_code = 0;

    explicit RunContext(const SweepConfig& c) : dir(c.out_dir), cfg(c) {
        std::filesystem::create_directories(dir);
        summary["experiment"] = experiment_name(c.experiment);
        summary["library_version"] = kVersion;
        summary["config"] = config_echo(c);
        write_file((dir / "config_used.cfg").string(), config_roundtrip(c));
    }

    void finish() {
        summary["wall_time_seconds"] =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (cfg.write_json) write_file((dir / "summary.json").string(), summary.dump(2) + "\n");
    }
};

/// Per-gamma optimization bundle shared by several experiments.
struct GammaPoint {
    double gamma = 0.0;
    double t_bs = 0.0;
    double t1 = 0.0;
    double qfi_max = 0.0;
    double theta_r = 0.0;
    double theta_p = 0.0;
    std::string error;
};

inline GammaPoint solve_gamma_point(const SpinOperators& ops, const SweepConfig& cfg, double gamma,
                                    bool with_thetas) {
    GammaPoint pt;
    pt.gamma = gamma;
    try {
        const LmgParams params{cfg.chi, gamma};
        pt.t_bs = find_best_squeezing_time(ops, params);
        const SqueezeSearchResult sq = optimize_t1(ops, params, cfg.t1_window);
        pt.t1 = sq.t1;
        pt.qfi_max = sq.qfi_max;
        if (with_thetas) {
            pt.theta_r = optimize_theta_r(ops, params, pt.t1);
            pt.theta_p = optimize_theta_p(ops, params, pt.t1);
        }
    } catch (const std::exception& e) {
        pt.error = e.what();
    }
    return pt;
}

} // namespace detail

// ---------------------------------------------------------------------------

inline int run_sweep_qfi(detail::RunContext& ctx) {
    const SweepConfig& cfg = ctx.cfg;
    const SpinOperators ops = build_operators(cfg.n_atoms);
    std::vector<detail::GammaPoint> points(cfg.gamma_grid.size());
    parallel_for(points.size(), resolve_workers(cfg.workers), [&](std::size_t i) {
        points[i] = detail::solve_gamma_point(ops, cfg, cfg.gamma_grid[i], false);
    });

    CsvWriter csv;
    csv.add_metadata("experiment", "sweep-qfi");
    csv.add_metadata("n_atoms", std::to_string(cfg.n_atoms));
    csv.add_metadata("chi (rad/time)", format_double(cfg.chi));
    csv.add_metadata("columns", "gamma (dimensionless), t_bs (time), t1 (time), qfi_max "
                                "(dimensionless), status");
    csv.set_header({"gamma", "t_bs", "t1", "qfi_max", "status"});
    Series f_series{"qfi_max", {}, {}}, t_series{"t1", {}, {}};
    double best_f = -1.0, best_gamma = 0.0;
    for (const auto& pt : points) {
        if (!pt.error.empty()) {
            ctx.exit_code = 2;
            csv.add_row({format_double(pt.gamma), "", "", "", "error: " + pt.error});
            continue;
        }
        csv.add_row({format_double(pt.gamma), format_double(pt.t_bs), format_double(pt.t1),
                     format_double(pt.qfi_max), "ok"});
        f_series.x.push_back(pt.gamma);
        f_series.y.push_back(pt.qfi_max);
        t_series.x.push_back(pt.gamma);
        t_series.y.push_back(pt.t1);
        if (pt.qfi_max > best_f) {
            best_f = pt.qfi_max;
            best_gamma = pt.gamma;
        }
    }
    if (cfg.write_csv) write_file((ctx.dir / "sweep-qfi.csv").string(), csv.str());
    if (cfg.write_svg) {
        write_file((ctx.dir / "sweep-qfi.svg").string(),
                   render_line_plot("maximum QFI vs anisotropy (N = " +
                                        std::to_string(cfg.n_atoms) + ")",
                                    "gamma", "QFI", {f_series}));
        write_file((ctx.dir / "sweep-qfi_t1.svg").string(),
                   render_line_plot("optimal squeezing time vs anisotropy", "gamma",
                                    "t1 (1/chi)", {t_series}));
    }
    ctx.summary["qfi_max_overall"] = best_f;
    ctx.summary["qfi_argmax_gamma"] = best_gamma;
    return ctx.exit_code;
}

inline int run_sweep_theta(detail::RunContext& ctx) {
    const SweepConfig& cfg = ctx.cfg;
    const SpinOperators ops = build_operators(cfg.n_atoms);
    std::vector<detail::GammaPoint> points(cfg.gamma_grid.size());
    parallel_for(points.size(), resolve_workers(cfg.workers), [&](std::size_t i) {
        points[i] = detail::solve_gamma_point(ops, cfg, cfg.gamma_grid[i], true);
    });

    CsvWriter csv;
    csv.add_metadata("experiment", "sweep-theta");
    csv.add_metadata("n_atoms", std::to_string(cfg.n_atoms));
    csv.add_metadata("columns", "gamma, t1 (time), theta_r (rad), theta_p (rad), "
                                "arcsin_sqrt_gamma (rad), theta_sum (rad), status");
    csv.set_header({"gamma", "t1", "theta_r", "theta_p", "arcsin_sqrt_gamma", "theta_sum",
                    "status"});
    Series r{"theta_r", {}, {}}, p{"theta_p", {}, {}}, mf{"arcsin(sqrt(gamma))", {}, {}};
    nlohmann::json table = nlohmann::json::array();
    for (const auto& pt : points) {
        if (!pt.error.empty()) {
            ctx.exit_code = 2;
            csv.add_row({format_double(pt.gamma), "", "", "", "", "", "error: " + pt.error});
            continue;
        }
        const double mf_theta = meanfield::mf_theta_r(pt.gamma);
        csv.add_row({format_double(pt.gamma), format_double(pt.t1), format_double(pt.theta_r),
                     format_double(pt.theta_p), format_double(mf_theta),
                     format_double(pt.theta_r + pt.theta_p), "ok"});
        r.x.push_back(pt.gamma);
        r.y.push_back(pt.theta_r);
        p.x.push_back(pt.gamma);
        p.y.push_back(pt.theta_p);
        mf.x.push_back(pt.gamma);
        mf.y.push_back(mf_theta);
        table.push_back({{"gamma", pt.gamma},
                         {"theta_r", pt.theta_r},
                         {"theta_p", pt.theta_p},
                         {"arcsin_sqrt_gamma", mf_theta}});
    }
    if (cfg.write_csv) write_file((ctx.dir / "sweep-theta.csv").string(), csv.str());
    if (cfg.write_svg)
        write_file((ctx.dir / "sweep-theta.svg").string(),
                   render_line_plot("optimal encoding axes (N = " + std::to_string(cfg.n_atoms) +
                                        ")",
                                    "gamma", "angle (rad)", {r, p, mf}));
    ctx.summary["theta_table"] = table;
    return ctx.exit_code;
}

inline int run_gain_map(detail::RunContext& ctx) {
    const SweepConfig& cfg = ctx.cfg;
    const SpinOperators ops = build_operators(cfg.n_atoms);
    struct Row {
        detail::GammaPoint pt;
        std::vector<std::pair<std::string, double>> encodings;  // label -> theta
        std::vector<std::vector<double>> gains;                 // per encoding, per t2 index
        std::vector<T2Optimum> optima;
    };
    std::vector<Row> rows(cfg.gamma_grid.size());
    const int nt = cfg.t2_points;

    parallel_for(rows.size(), resolve_workers(cfg.workers), [&](std::size_t i) {
        Row& row = rows[i];
        row.pt = detail::solve_gamma_point(ops, cfg, cfg.gamma_grid[i], true);
        if (!row.pt.error.empty()) return;
        const LmgParams params{cfg.chi, row.pt.gamma};
        switch (cfg.theta_policy) {
            case ThetaPolicy::theta_r: row.encodings = {{"theta_r", row.pt.theta_r}}; break;
            case ThetaPolicy::theta_p: row.encodings = {{"theta_p", row.pt.theta_p}}; break;
            case ThetaPolicy::explicit_value:
                row.encodings = {{"explicit", cfg.theta_value}};
                break;
            case ThetaPolicy::both:
                row.encodings = {{"theta_r", row.pt.theta_r}, {"theta_p", row.pt.theta_p}};
                break;
        }
        try {
            for (const auto& [label, theta] : row.encodings) {
                echolab::detail::EchoCore core(ops, params, row.pt.t1);
                core.set_reversal(params, IdealReversal{row.pt.t1});
                const double m_echo = echolab::detail::best_measure_angle(core, theta).first;
                std::vector<double> gains(nt);
                for (int k = 0; k < nt; ++k) {
                    const double t2 = 2.0 * row.pt.t1 * k / (nt - 1);
                    core.set_reversal(params, IdealReversal{t2});
                    const double d = std::abs(core.derivative(theta, m_echo));
                    gains[k] = d < 1e-300 ? std::nan("")
                                          : gain_db_from_delta_phi(
                                                std::sqrt(core.final_variance(m_echo)) / d,
                                                cfg.n_atoms);
                }
                row.gains.push_back(std::move(gains));
                row.optima.push_back(optimize_t2(ops, params, row.pt.t1, theta));
            }
        } catch (const std::exception& e) {
            row.pt.error = e.what();
        }
    });

    CsvWriter csv;
    csv.add_metadata("experiment", "gain-map");
    csv.add_metadata("n_atoms", std::to_string(cfg.n_atoms));
    csv.add_metadata("columns", "gamma, encoding, theta (rad), t2 (time), t2_over_t1, "
                                "gain_db (dB), status");
    csv.set_header({"gamma", "encoding", "theta", "t2", "t2_over_t1", "gain_db", "status"});
    nlohmann::json optima = nlohmann::json::array();
    std::map<std::string, std::vector<double>> heat;  // encoding -> values (gamma-major)
    for (const auto& row : rows) {
        if (!row.pt.error.empty()) {
            ctx.exit_code = 2;
            csv.add_row({format_double(row.pt.gamma), "", "", "", "", "",
                         "error: " + row.pt.error});
            continue;
        }
        for (std::size_t e = 0; e < row.encodings.size(); ++e) {
            for (int k = 0; k < nt; ++k) {
                const double ratio = 2.0 * k / (nt - 1);
                csv.add_row({format_double(row.pt.gamma), row.encodings[e].first,
                             format_double(row.encodings[e].second),
                             format_double(ratio * row.pt.t1), format_double(ratio),
                             format_double(row.gains[e][k]), "ok"});
            }
            optima.push_back({{"gamma", row.pt.gamma},
                              {"encoding", row.encodings[e].first},
                              {"t1", row.pt.t1},
                              {"t2_opt", row.optima[e].t2},
                              {"t2_over_t1", row.optima[e].t2 / row.pt.t1},
                              {"gain_db", row.optima[e].gain_db},
                              {"measure_angle", row.optima[e].measure_angle}});
            heat[row.encodings[e].first].insert(heat[row.encodings[e].first].end(),
                                                row.gains[e].begin(), row.gains[e].end());
        }
    }
    if (cfg.write_csv) write_file((ctx.dir / "gain-map.csv").string(), csv.str());
    if (cfg.write_svg && ctx.exit_code == 0) {
        std::vector<double> t2_ratio(nt);
        for (int k = 0; k < nt; ++k) t2_ratio[k] = 2.0 * k / (nt - 1);
        for (const auto& [label, values] : heat) {
            // values are gamma-major; the heatmap wants y (t2) rows
            std::vector<double> transposed(values.size());
            const std::size_t ng = cfg.gamma_grid.size();
            for (std::size_t g = 0; g < ng; ++g)
                for (int k = 0; k < nt; ++k)
                    transposed[static_cast<std::size_t>(k) * ng + g] =
                        values[g * static_cast<std::size_t>(nt) + k];
            write_file((ctx.dir / ("gain-map_" + label + ".svg")).string(),
                       render_heatmap("metrological gain (dB), " + label, "gamma", "t2 / t1",
                                      cfg.gamma_grid, t2_ratio, transposed));
        }
    }
    ctx.summary["t2_optima"] = optima;
    return ctx.exit_code;
}

inline int run_noise_robustness(detail::RunContext& ctx) {
    const SweepConfig& cfg = ctx.cfg;
    const SpinOperators ops = build_operators(cfg.n_atoms);
    struct Row {
        detail::GammaPoint pt;
        double r_r = 0, r0_r = 0, rrel_r = 0, semi_r = 0;
        double r_p = 0, r0_p = 0, rrel_p = 0, semi_p = 0;
    };
    std::vector<Row> rows(cfg.gamma_grid.size());
    RobustnessOptions opts;
    opts.noise0 = cfg.noise_strength;
    opts.step = cfg.noise_step;
    opts.convention =
        cfg.normalized_moments ? MomentConvention::normalized : MomentConvention::unnormalized;

    parallel_for(rows.size(), resolve_workers(cfg.workers), [&](std::size_t i) {
        Row& row = rows[i];
        row.pt = detail::solve_gamma_point(ops, cfg, cfg.gamma_grid[i], true);
        if (!row.pt.error.empty()) return;
        const LmgParams params{cfg.chi, row.pt.gamma};
        try {
            const auto eval = [&](double theta, double& r, double& r0, double& rrel,
                                  double& semi) {
                EchoProtocol p;
                p.n_atoms = cfg.n_atoms;
                p.params = params;
                p.t1 = row.pt.t1;
                p.theta = theta;
                p.reversal = IdealReversal{row.pt.t1};
                p.measure_angle =
                    optimal_measure_angle(ops, params, row.pt.t1, theta, p.reversal);
                r = robustness_R(p, ops, opts);
                EchoProtocol none = p;
                none.reversal = NoReversal{};
                none.measure_angle =
                    optimal_measure_angle(ops, params, row.pt.t1, theta, NoReversal{});
                r0 = robustness_R(none, ops, opts);
                rrel = r - r0;
                semi = noise_sensitivity_semi_analytic(p, ops);
            };
            eval(row.pt.theta_r, row.r_r, row.r0_r, row.rrel_r, row.semi_r);
            eval(row.pt.theta_p, row.r_p, row.r0_p, row.rrel_p, row.semi_p);
        } catch (const std::exception& e) {
            row.pt.error = e.what();
        }
    });

    CsvWriter csv;
    csv.add_metadata("experiment", "noise-robustness");
    csv.add_metadata("n_atoms", std::to_string(cfg.n_atoms));
    csv.add_metadata("noise_strength", format_double(cfg.noise_strength));
    csv.add_metadata("moment_convention", cfg.normalized_moments ? "normalized" : "unnormalized");
    csv.add_metadata("columns", "gamma, t1, theta_r, R_theta_r, R0_theta_r, Rrel_theta_r, "
                                "theta_p, R_theta_p, R0_theta_p, Rrel_theta_p, "
                                "semi_analytic_sensitivity_theta_r, "
                                "semi_analytic_sensitivity_theta_p, status");
    csv.set_header({"gamma", "t1", "theta_r", "R_theta_r", "R0_theta_r", "Rrel_theta_r",
                    "theta_p", "R_theta_p", "R0_theta_p", "Rrel_theta_p", "semi_sens_theta_r",
                    "semi_sens_theta_p", "status"});
    Series sr{"R(theta_r)", {}, {}}, sp{"R(theta_p)", {}, {}}, rr{"Rrel(theta_r)", {}, {}},
        rp{"Rrel(theta_p)", {}, {}};
    for (const auto& row : rows) {
        if (!row.pt.error.empty()) {
            ctx.exit_code = 2;
            csv.add_row({format_double(row.pt.gamma), "", "", "", "", "", "", "", "", "", "", "",
                         "error: " + row.pt.error});
            continue;
        }
        csv.add_row({format_double(row.pt.gamma), format_double(row.pt.t1),
                     format_double(row.pt.theta_r), format_double(row.r_r),
                     format_double(row.r0_r), format_double(row.rrel_r),
                     format_double(row.pt.theta_p), format_double(row.r_p),
                     format_double(row.r0_p), format_double(row.rrel_p),
                     format_double(row.semi_r), format_double(row.semi_p), "ok"});
        sr.x.push_back(row.pt.gamma);
        sr.y.push_back(row.r_r);
        sp.x.push_back(row.pt.gamma);
        sp.y.push_back(row.r_p);
        rr.x.push_back(row.pt.gamma);
        rr.y.push_back(row.rrel_r);
        rp.x.push_back(row.pt.gamma);
        rp.y.push_back(row.rrel_p);
    }
    if (cfg.write_csv) write_file((ctx.dir / "noise-robustness.csv").string(), csv.str());
    if (cfg.write_svg) {
        write_file((ctx.dir / "noise-robustness.svg").string(),
                   render_line_plot("robustness coefficient, strength = " +
                                        format_double(cfg.noise_strength),
                                    "gamma", "R", {sr, sp}));
        write_file((ctx.dir / "noise-robustness_rel.svg").string(),
                   render_line_plot("relative robustness vs no reversal", "gamma", "R_rel",
                                    {rr, rp}));
    }
    return ctx.exit_code;
}

inline int run_floquet_mc(detail::RunContext& ctx) {
    const SweepConfig& cfg = ctx.cfg;
    const SpinOperators ops = build_operators(cfg.n_atoms);
    const double gamma = cfg.gamma_grid.front();
    const LmgParams params{cfg.chi, gamma};
    const detail::GammaPoint pt = detail::solve_gamma_point(ops, cfg, gamma, true);
    if (!pt.error.empty()) {
        std::cerr << "floquet-mc: " << pt.error << "\n";
        return 2;
    }
    const double theta = cfg.theta_policy == ThetaPolicy::theta_p ? pt.theta_p
                         : cfg.theta_policy == ThetaPolicy::explicit_value ? cfg.theta_value
                                                                           : pt.theta_r;
    EchoProtocol protocol;
    protocol.n_atoms = cfg.n_atoms;
    protocol.params = params;
    protocol.t1 = pt.t1;
    protocol.theta = theta;
    protocol.measure_angle =
        optimal_measure_angle(ops, params, pt.t1, theta, IdealReversal{pt.t1});
    const floquet::PulseSequence seq =
        floquet::compile(gamma, cfg.chi, pt.t1, cfg.pulse_frequency);
    protocol.reversal = FloquetReversal{seq};
    if (!floquet::frequency_adequate(seq, cfg.n_atoms))
        std::cerr << "floquet-mc: warning: chi * t_c * N = "
                  << cfg.chi * seq.t_c * cfg.n_atoms
                  << " > 0.5; the averaged Hamiltonian is unreliable at this frequency\n";
    write_file((ctx.dir / "sequence.txt").string(), floquet::export_sequence(seq));

    floquet::PulseNoiseSpec noise;
    noise.area_rel_sd = cfg.area_rel_sd;
    noise.separation_rel_sd = cfg.separation_rel_sd;
    noise.phase_sd = cfg.phase_sd;
    noise.seed = cfg.seed;
    noise.correlation = cfg.paired_noise ? floquet::PulseNoiseSpec::Correlation::paired
                                         : floquet::PulseNoiseSpec::Correlation::independent;

    CsvWriter csv;
    csv.add_metadata("experiment", "floquet-mc");
    csv.add_metadata("n_atoms", std::to_string(cfg.n_atoms));
    csv.add_metadata("gamma", format_double(gamma));
    csv.add_metadata("t1", format_double(pt.t1));
    csv.add_metadata("theta", format_double(theta));
    csv.add_metadata("measure_angle", format_double(protocol.measure_angle));
    csv.add_metadata("pulse_frequency (chi units)", format_double(cfg.pulse_frequency));
    csv.add_metadata("n_periods", std::to_string(seq.n_periods));
    csv.add_metadata("seed", std::to_string(cfg.seed));
    csv.add_metadata("columns", "trial (-1 = noiseless), period, time, g; "
                                "frequency-scan rows use trial = -2 with the frequency in the "
                                "period column");
    csv.set_header({"trial", "period", "time", "g"});

    const floquet::GainTrajectory base = floquet::noiseless_gain_trajectory(protocol, ops);
    for (std::size_t k = 0; k < base.size(); ++k)
        csv.add_row({"-1", std::to_string(k), format_double(base[k].time),
                     format_double(base[k].g)});

    double noiseless_final = base.empty() ? 0.0 : base.back().g;
    std::vector<double> finals;
    if (noise.any()) {
        const auto trajectories =
            floquet::monte_carlo_gain(protocol, ops, noise, cfg.trials, cfg.workers);
        for (std::size_t t = 0; t < trajectories.size(); ++t) {
            for (std::size_t k = 0; k < trajectories[t].size(); ++k)
                csv.add_row({std::to_string(t), std::to_string(k),
                             format_double(trajectories[t][k].time),
                             format_double(trajectories[t][k].g)});
            if (!trajectories[t].empty()) finals.push_back(trajectories[t].back().g);
        }
    }
    // optional noiseless frequency scan
    for (double freq : cfg.frequency_scan) {
        EchoProtocol scan = protocol;
        scan.reversal = FloquetReversal{floquet::compile(gamma, cfg.chi, pt.t1, freq)};
        const auto traj = floquet::noiseless_gain_trajectory(scan, ops);
        for (std::size_t k = 0; k < traj.size(); ++k)
            csv.add_row({"-2", format_double(freq), format_double(traj[k].time),
                         format_double(traj[k].g)});
    }
    if (cfg.write_csv) write_file((ctx.dir / "floquet-mc.csv").string(), csv.str());

    ctx.summary["noiseless_final_g"] = noiseless_final;
    EchoProtocol ideal = protocol;
    ideal.reversal = IdealReversal{pt.t1};
    ctx.summary["ideal_reversal_g"] = signal_derivative(ideal, ops) / (0.5 * cfg.n_atoms);
    if (!finals.empty()) {
        std::sort(finals.begin(), finals.end());
        const double median = finals.size() % 2 == 1
                                  ? finals[finals.size() / 2]
                                  : 0.5 * (finals[finals.size() / 2 - 1] +
                                           finals[finals.size() / 2]);
        ctx.summary["median_final_g"] = median;
        ctx.summary["median_relative_deviation"] =
            (median - noiseless_final) / std::abs(noiseless_final);
    }
    if (cfg.write_svg) {
        std::vector<Series> series;
        Series b{"noiseless", {}, {}};
        for (const auto& s : base) {
            b.x.push_back(s.time);
            b.y.push_back(s.g);
        }
        series.push_back(std::move(b));
        write_file((ctx.dir / "floquet-mc.svg").string(),
                   render_line_plot("gain trajectory (noiseless reference)", "time", "G",
                                    series));
    }
    return ctx.exit_code;
}

inline int run_echo_run(detail::RunContext& ctx) {
    const SweepConfig& cfg = ctx.cfg;
    const SpinOperators ops = build_operators(cfg.n_atoms);
    const double gamma = cfg.gamma_grid.front();
    const LmgParams params{cfg.chi, gamma};
    double t1 = cfg.echo_t1;
    if (t1 < 0.0) t1 = optimize_t1(ops, params, cfg.t1_window).t1;
    double theta = 0.0;
    switch (cfg.theta_policy) {
        case ThetaPolicy::theta_p: theta = optimize_theta_p(ops, params, t1); break;
        case ThetaPolicy::explicit_value: theta = cfg.theta_value; break;
        case ThetaPolicy::theta_r:
        case ThetaPolicy::both: theta = optimize_theta_r(ops, params, t1); break;
    }
    const double t2 = cfg.echo_t2 < 0.0 ? t1 : cfg.echo_t2;

    EchoProtocol protocol;
    protocol.n_atoms = cfg.n_atoms;
    protocol.params = params;
    protocol.t1 = t1;
    protocol.theta = theta;
    protocol.phi = cfg.echo_phi;
    protocol.reversal = IdealReversal{t2};
    protocol.measure_angle = std::isnan(cfg.echo_measure)
                                 ? optimal_measure_angle(ops, params, t1, theta, protocol.reversal)
                                 : cfg.echo_measure;
    if (protocol.phi_linearity_warning())
        std::cerr << "echo-run: warning: |phi| > 0.01, linear-response quantities carry O(phi^2) "
                     "bias\n";

    try {
        const GainReport report = metrological_gain(protocol, ops);
        ctx.summary["delta_phi"] = report.delta_phi;
        ctx.summary["gain_db"] = report.delta_g_db;
        ctx.summary["magnification"] = report.magnification;
        ctx.summary["derivative_signal"] = report.derivative_signal;
    } catch (const numeric_error& e) {
        ctx.summary["error"] = e.what();
        ctx.exit_code = 2;
    }
    ctx.summary["t1"] = t1;
    ctx.summary["t2"] = t2;
    ctx.summary["theta"] = theta;
    ctx.summary["measure_angle"] = protocol.measure_angle;
    ctx.summary["phi"] = protocol.phi;

    const SpinState final_state = run_echo(protocol, ops);
    CsvWriter csv;
    csv.add_metadata("experiment", "echo-run");
    csv.add_metadata("columns", "dicke_index k, sz_eigenvalue m, probability");
    csv.set_header({"k", "m", "probability"});
    const double spin = 0.5 * cfg.n_atoms;
    for (int k = 0; k < ops.dim; ++k)
        csv.add_row({std::to_string(k), format_double(spin - k),
                     format_double(std::norm(final_state.amplitudes(k)))});
    if (cfg.write_csv) write_file((ctx.dir / "echo-run.csv").string(), csv.str());
    return ctx.exit_code;
}

inline int run_ops_check(detail::RunContext& ctx) {
    const SweepConfig& cfg = ctx.cfg;
    const SpinOperators ops = build_operators(cfg.n_atoms);
    const double tol = cfg.n_atoms <= 200 ? 1e-10 : 1e-8;
    const double spin = 0.5 * cfg.n_atoms;
    nlohmann::json checks = nlohmann::json::array();
    bool all_ok = true;
    const auto report = [&](const std::string& name, bool ok, double value) {
        std::cout << (ok ? "[PASS] " : "[FAIL] ") << name << " (residual " << value << ")\n";
        checks.push_back({{"name", name}, {"ok", ok}, {"residual", value}});
        all_ok = all_ok && ok;
    };

    const double herm = std::max({(ops.sx - ops.sx.adjoint()).cwiseAbs().maxCoeff(),
                                  (ops.sy - ops.sy.adjoint()).cwiseAbs().maxCoeff(),
                                  (ops.sz - ops.sz.adjoint()).cwiseAbs().maxCoeff()});
    report("hermiticity", herm <= 1e-12, herm);

    const double comm = std::max(
        {(ops.sx * ops.sy - ops.sy * ops.sx - kI * ops.sz).cwiseAbs().maxCoeff(),
         (ops.sy * ops.sz - ops.sz * ops.sy - kI * ops.sx).cwiseAbs().maxCoeff(),
         (ops.sz * ops.sx - ops.sx * ops.sz - kI * ops.sy).cwiseAbs().maxCoeff()});
    report("commutators", comm <= tol, comm);

    const double casimir =
        (ops.s_squared - spin * (spin + 1.0) * Matrix::Identity(ops.dim, ops.dim))
            .cwiseAbs()
            .maxCoeff();
    report("casimir", casimir <= tol, casimir);

    SplitMix64 rng(cfg.seed_given ? cfg.seed : 0xACCE55);
    const Propagator prop(lmg_hamiltonian(ops, {cfg.chi, cfg.gamma_grid.front()}));
    double unit_dev = 0.0;
    for (int rep = 0; rep < 100; ++rep) {
        Vector v(ops.dim);
        for (int i = 0; i < ops.dim; ++i)
            v(i) = complexd(rng.gaussian(0, 1), rng.gaussian(0, 1));
        v /= v.norm();
        unit_dev = std::max(unit_dev,
                            std::abs(prop.apply(v, rng.gaussian(0.0, 0.5)).norm() - 1.0));
    }
    report("evolution unitarity", unit_dev <= tol, unit_dev);

    double echo_dev = 0.0;
    for (double gamma : cfg.gamma_grid) {
        EchoProtocol p;
        p.n_atoms = cfg.n_atoms;
        p.params = LmgParams{cfg.chi, gamma};
        p.t1 = 0.8 * find_best_squeezing_time(ops, p.params);
        p.reversal = IdealReversal{p.t1};
        const double fid = fidelity(run_echo(p, ops), css(ops, 0.5 * kPi, 0.5 * kPi));
        echo_dev = std::max(echo_dev, 1.0 - fid);
    }
    report("echo identity", echo_dev <= 1e-9, echo_dev);

    ctx.summary["checks"] = checks;
    if (!all_ok) {
        std::cout << "[FAIL] ops-check\n";
        return 3;
    }
    std::cout << "[PASS] ops-check\n";
    return 0;
}

/// Execute one experiment; returns the process exit code (0 ok, 2 numeric
/// failure at some grid point, 3 self-check failure).
inline int run(const SweepConfig& cfg) {
    detail::RunContext ctx(cfg);
    int code = 0;
    switch (cfg.experiment) {
        case Experiment::sweep_qfi: code = run_sweep_qfi(ctx); break;
        case Experiment::sweep_theta: code = run_sweep_theta(ctx); break;
        case Experiment::gain_map: code = run_gain_map(ctx); break;
        case Experiment::noise_robustness: code = run_noise_robustness(ctx); break;
        case Experiment::floquet_mc: code = run_floquet_mc(ctx); break;
        case Experiment::echo_run: code = run_echo_run(ctx); break;
        case Experiment::ops_check: code = run_ops_check(ctx); break;
    }
    ctx.summary["exit_code"] = code;
    ctx.finish();
    return code;
}

} // namespace echolab::sweep
