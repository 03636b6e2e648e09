#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "echolab/floquet.hpp"
#include "echolab/floquet_mc.hpp"
#include "echolab/interferometer.hpp"

using namespace echolab;
namespace fl = echolab::floquet;

TEST_CASE("effective chi closed form", "[floquet]") {
    CHECK_THAT(fl::effective_chi(0.0), Catch::Matchers::WithinAbs(-0.5, 1e-15));
    CHECK_THAT(fl::effective_chi(0.5), Catch::Matchers::WithinAbs(-1.0, 1e-15));
    CHECK_THAT(fl::effective_chi(0.1), Catch::Matchers::WithinAbs(-0.91 / 1.79, 1e-12));
    for (int i = 0; i <= 50; ++i) CHECK(fl::effective_chi(i / 100.0) < 0.0);
    CHECK_THROWS_AS(fl::effective_chi(0.6), std::invalid_argument);
}

TEST_CASE("compile honors the timing ratio and period structure", "[floquet]") {
    SECTION("gamma = 0: equal segments") {
        const fl::PulseSequence seq = fl::compile(0.0, 1.0, 0.1, 200.0);
        CHECK_THAT(seq.t2_seg, Catch::Matchers::WithinRel(seq.t1_seg, 1e-12));
    }
    SECTION("gamma = 0.1: ratio 0.8/0.99") {
        const fl::PulseSequence seq = fl::compile(0.1, 1.0, 0.1, 200.0);
        CHECK_THAT(seq.t2_seg / seq.t1_seg, Catch::Matchers::WithinRel(0.8 / 0.99, 1e-12));
        CHECK_THAT(seq.chi_eff, Catch::Matchers::WithinRel(-0.91 / 1.79, 1e-12));
    }
    SECTION("gamma = 0.5: z block disappears") {
        const fl::PulseSequence seq = fl::compile(0.5, 1.0, 0.1, 200.0);
        CHECK(seq.t2_seg == 0.0);
        for (const auto& ev : seq.events)
            if (ev.kind == fl::PulseEvent::Kind::pulse) CHECK(ev.axis == Axis::y);
    }
    SECTION("total effective reversal matches the target exactly") {
        for (double gamma : {0.0, 0.13, 0.37, 0.5}) {
            const double target = 0.0737;
            const fl::PulseSequence seq = fl::compile(gamma, 1.0, target, 333.0);
            const double effective = std::abs(fl::effective_chi(gamma)) * seq.n_periods * seq.t_c;
            CHECK_THAT(effective, Catch::Matchers::WithinRel(target, 1e-12));
            // renormalization never lowers the frequency below the request
            CHECK(seq.t_c <= 1.0 / 333.0 + 1e-15);
        }
    }
    SECTION("interior periods follow the six-event pattern") {
        const fl::PulseSequence seq = fl::compile(0.2, 1.0, 0.1, 150.0);
        // collect events of period 1 (interior for the symmetric train)
        std::vector<fl::PulseEvent> period;
        for (const auto& ev : seq.events)
            if (ev.period == 1) period.push_back(ev);
        REQUIRE(period.size() == 6);
        CHECK(period[0].kind == fl::PulseEvent::Kind::pulse);
        CHECK(period[0].axis == Axis::y);
        CHECK_THAT(period[0].angle, Catch::Matchers::WithinAbs(-0.5 * kPi, 1e-15));
        CHECK(period[1].kind == fl::PulseEvent::Kind::free_evolution);
        CHECK_THAT(period[1].duration, Catch::Matchers::WithinRel(seq.t1_seg, 1e-12));
        CHECK(period[2].axis == Axis::y);
        CHECK_THAT(period[2].angle, Catch::Matchers::WithinAbs(0.5 * kPi, 1e-15));
        CHECK(period[3].axis == Axis::z);
        CHECK_THAT(period[3].angle, Catch::Matchers::WithinAbs(-0.5 * kPi, 1e-15));
        CHECK(period[4].kind == fl::PulseEvent::Kind::free_evolution);
        CHECK_THAT(period[4].duration, Catch::Matchers::WithinRel(seq.t2_seg, 1e-12));
        CHECK(period[5].axis == Axis::z);
        CHECK_THAT(period[5].angle, Catch::Matchers::WithinAbs(0.5 * kPi, 1e-15));
        CHECK(period[0].pair_id == period[2].pair_id);
        CHECK(period[3].pair_id == period[5].pair_id);
        CHECK(period[0].pair_id != period[3].pair_id);
    }
    SECTION("argument validation") {
        CHECK_THROWS_AS(fl::compile(0.1, 1.0, 0.1, 0.0), std::invalid_argument);
        CHECK_THROWS_AS(fl::compile(0.1, 1.0, -0.1, 100.0), std::invalid_argument);
        CHECK_THROWS_AS(fl::compile(0.1, -1.0, 0.1, 100.0), std::invalid_argument);
    }
}

TEST_CASE("one plain period equals the six-factor product", "[floquet]") {
    const int n = 2;
    const SpinOperators ops = build_operators(n);
    const double gamma = 0.2, chi = 1.0;
    const LmgParams params{chi, gamma};
    fl::PulseSequence seq = fl::compile(gamma, chi, 0.01, 120.0, fl::TrainBoundary::plain);
    // keep exactly one period
    seq.n_periods = 1;
    std::vector<fl::PulseEvent> one;
    for (const auto& ev : seq.events)
        if (ev.period == 0) one.push_back(ev);
    seq.events = one;

    SplitMix64 rng(31);
    Vector probe(ops.dim);
    for (int i = 0; i < ops.dim; ++i)
        probe(i) = complexd(rng.gaussian(0, 1), rng.gaussian(0, 1));
    probe /= probe.norm();

    const SpinState out = fl::simulate(SpinState{n, probe}, ops, params, seq);

    // hand-multiplied product: chronological y-block then z-block means the
    // propagator is e^{-i (Sy^2 + g Sx^2) chi t2} e^{-i (Sz^2 + g Sy^2) chi t1}
    const Matrix a = (ops.sz * ops.sz + gamma * ops.sy * ops.sy) * chi;
    const Matrix b = (ops.sy * ops.sy + gamma * ops.sx * ops.sx) * chi;
    const Vector expected =
        Propagator(b).apply(Propagator(a).apply(probe, seq.t1_seg), seq.t2_seg);
    CHECK(std::norm(expected.dot(out.amplitudes)) >= 1.0 - 1e-12);

    // and the six rotations/evolutions written out one by one
    SpinState step{n, probe};
    step = rotate(step, ops, Axis::y, -0.5 * kPi);
    step = evolve(step, lmg_hamiltonian(ops, params), seq.t1_seg);
    step = rotate(step, ops, Axis::y, 0.5 * kPi);
    step = rotate(step, ops, Axis::z, -0.5 * kPi);
    step = evolve(step, lmg_hamiltonian(ops, params), seq.t2_seg);
    step = rotate(step, ops, Axis::z, 0.5 * kPi);
    CHECK(std::norm(step.amplitudes.dot(out.amplitudes)) >= 1.0 - 1e-12);
}

TEST_CASE("timing ratio makes the averaged generator proportional to -H_LMG", "[floquet]") {
    const SpinOperators ops = build_operators(10);
    for (double gamma : {0.0, 0.1, 0.3, 0.5}) {
        const double chi = 1.0;
        const double t1 = 1.0;  // arbitrary scale
        const double t2 = fl::timing_ratio(gamma) * t1;
        // first-order generator per period minus the Casimir piece
        const Matrix gen = chi * (gamma * t2 * ops.sx * ops.sx +
                                  (gamma * t1 + t2) * ops.sy * ops.sy + t1 * ops.sz * ops.sz) -
                           chi * t1 * ops.s_squared;
        const Matrix target = fl::effective_chi(gamma) * chi * (t1 + t2) *
                              (ops.sx * ops.sx + gamma * ops.sy * ops.sy);
        CAPTURE(gamma);
        CHECK((gen - target).cwiseAbs().maxCoeff() <= 1e-12 * ops.n_atoms * ops.n_atoms);
    }
}

TEST_CASE("noiseless train approximates the ideal reversal", "[floquet]") {
    const SpinOperators ops = build_operators(20);
    SECTION("fidelity improves monotonically with frequency") {
        double prev = 0.0;
        for (double freq : {50.0, 100.0, 250.0, 500.0, 1000.0}) {
            const double fid = fl::equivalent_reversal_check(ops, 0.1, 1.0, 0.2, freq);
            CAPTURE(freq);
            CHECK(fid >= prev);
            prev = fid;
        }
        CHECK(prev >= 0.999);
    }
    SECTION("TAT at 500 chi is essentially exact") {
        CHECK(fl::equivalent_reversal_check(ops, 0.5, 1.0, 0.3, 500.0) >= 0.99);
    }
    SECTION("infidelity falls at least 3x when t_c is halved") {
        const double f1 = fl::equivalent_reversal_check(ops, 0.1, 1.0, 0.25, 150.0);
        const double f2 = fl::equivalent_reversal_check(ops, 0.1, 1.0, 0.25, 300.0);
        CHECK((1.0 - f1) / (1.0 - f2) >= 3.0);
    }
}

TEST_CASE("zero reversal time is trivially exact", "[floquet]") {
    const SpinOperators ops = build_operators(10);
    CHECK(fl::equivalent_reversal_check(ops, 0.2, 1.0, 0.0, 100.0) == 1.0);
}

TEST_CASE("echo protocols accept a compiled train as the reversal", "[floquet]") {
    const int n = 30;
    const SpinOperators ops = build_operators(n);
    const LmgParams params{1.0, 0.1};
    const SqueezeSearchResult sq = optimize_t1(ops, params);
    EchoProtocol p;
    p.n_atoms = n;
    p.params = params;
    p.t1 = sq.t1;
    p.theta = optimize_theta_r(ops, params, sq.t1);
    p.measure_angle = optimal_measure_angle(ops, params, sq.t1, p.theta, IdealReversal{sq.t1});

    EchoProtocol ideal = p;
    ideal.reversal = IdealReversal{sq.t1};
    EchoProtocol train = p;
    train.reversal = FloquetReversal{fl::compile(0.1, 1.0, sq.t1, 800.0)};

    // the high-frequency train closes the echo like the ideal reversal does
    CHECK(fidelity(run_echo(train, ops), css(ops, 0.5 * kPi, 0.5 * kPi)) >= 0.999);
    const double d_ideal = signal_derivative(ideal, ops);
    const double d_train = signal_derivative(train, ops);
    CHECK(std::abs(d_train - d_ideal) / std::abs(d_ideal) <= 0.01);
    CHECK_THAT(delta_phi(train, ops), Catch::Matchers::WithinRel(delta_phi(ideal, ops), 0.05));
}

TEST_CASE("frequency adequacy guard", "[floquet]") {
    const fl::PulseSequence seq = fl::compile(0.1, 1.0, 0.1, 500.0);
    CHECK(fl::frequency_adequate(seq, 100));
    CHECK_FALSE(fl::frequency_adequate(seq, 1000));
}

TEST_CASE("simulate validates parameter consistency", "[floquet]") {
    const SpinOperators ops = build_operators(8);
    const fl::PulseSequence seq = fl::compile(0.2, 1.0, 0.05, 100.0);
    const SpinState y = css(ops, 0.5 * kPi, 0.5 * kPi);
    CHECK_THROWS_AS(fl::simulate(y, ops, LmgParams{1.0, 0.3}, seq), std::invalid_argument);
    CHECK_THROWS_AS(fl::simulate(y, ops, LmgParams{2.0, 0.2}, seq), std::invalid_argument);
}

TEST_CASE("zero-sd noise reproduces the noiseless trajectory exactly", "[floquet]") {
    const SpinOperators ops = build_operators(12);
    const LmgParams params{1.0, 0.15};
    const fl::PulseSequence seq = fl::compile(0.15, 1.0, 0.06, 150.0);
    const SpinState y = css(ops, 0.5 * kPi, 0.5 * kPi);
    fl::PulseNoiseSpec zero;
    zero.seed = 991;
    const SpinState a = fl::simulate(y, ops, params, seq);
    const SpinState b = fl::simulate(y, ops, params, seq, zero);
    CHECK((a.amplitudes - b.amplitudes).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("seeded noisy trains are bit-for-bit reproducible", "[floquet]") {
    const SpinOperators ops = build_operators(12);
    const LmgParams params{1.0, 0.1};
    const fl::PulseSequence seq = fl::compile(0.1, 1.0, 0.05, 150.0);
    const SpinState y = css(ops, 0.5 * kPi, 0.5 * kPi);
    fl::PulseNoiseSpec noise;
    noise.area_rel_sd = 0.005;
    noise.separation_rel_sd = 0.05;
    noise.phase_sd = 0.006;
    noise.seed = 1234;
    const SpinState a = fl::simulate(y, ops, params, seq, noise);
    const SpinState b = fl::simulate(y, ops, params, seq, noise);
    CHECK((a.amplitudes - b.amplitudes).cwiseAbs().maxCoeff() == 0.0);
    noise.seed = 1235;
    const SpinState c = fl::simulate(y, ops, params, seq, noise);
    CHECK((a.amplitudes - c.amplitudes).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("monte carlo trajectories are deterministic and ordered", "[floquet]") {
    const int n = 12;
    const SpinOperators ops = build_operators(n);
    const LmgParams params{1.0, 0.1};
    const SqueezeSearchResult sq = optimize_t1(ops, params);
    EchoProtocol p;
    p.n_atoms = n;
    p.params = params;
    p.t1 = sq.t1;
    p.theta = optimize_theta_r(ops, params, sq.t1);
    p.measure_angle = optimal_measure_angle(ops, params, sq.t1, p.theta, IdealReversal{sq.t1});
    p.reversal = FloquetReversal{fl::compile(0.1, 1.0, sq.t1, 200.0)};

    fl::PulseNoiseSpec noise;
    noise.area_rel_sd = 0.005;
    noise.seed = 77;
    const auto run1 = fl::monte_carlo_gain(p, ops, noise, 8, /*workers=*/1);
    const auto run2 = fl::monte_carlo_gain(p, ops, noise, 8, /*workers=*/2);
    REQUIRE(run1.size() == 8);
    REQUIRE(run2.size() == 8);
    for (std::size_t i = 0; i < run1.size(); ++i) {
        REQUIRE(run1[i].size() == run2[i].size());
        for (std::size_t k = 0; k < run1[i].size(); ++k) {
            CHECK(run1[i][k].g == run2[i][k].g);
            CHECK(run1[i][k].time == run2[i][k].time);
        }
    }
    // the noiseless reference ends near the ideal-reversal magnification
    const auto base = fl::noiseless_gain_trajectory(p, ops);
    EchoProtocol ideal = p;
    ideal.reversal = IdealReversal{sq.t1};
    const double g_ideal = signal_derivative(ideal, ops) / (0.5 * n);
    CHECK(std::abs(base.back().g - g_ideal) / std::abs(g_ideal) <= 0.05);
}

TEST_CASE("sequence export is line-oriented and complete", "[floquet]") {
    const fl::PulseSequence seq = fl::compile(0.25, 1.0, 0.02, 80.0);
    const std::string text = fl::export_sequence(seq);
    std::istringstream in(text);
    std::string line;
    int pulses = 0, frees = 0, headers = 0;
    while (std::getline(in, line)) {
        if (line.rfind("# ", 0) == 0) {
            ++headers;
            continue;
        }
        std::istringstream ls(line);
        double t;
        std::string kind;
        REQUIRE(static_cast<bool>(ls >> t >> kind));
        if (kind == "PULSE") {
            std::string axis;
            double angle;
            REQUIRE(static_cast<bool>(ls >> axis >> angle));
            CHECK((axis == "y" || axis == "z"));
            CHECK_THAT(std::abs(angle), Catch::Matchers::WithinAbs(0.5 * kPi, 1e-12));
            ++pulses;
        } else {
            CHECK(kind == "FREE");
            double dur;
            REQUIRE(static_cast<bool>(ls >> dur));
            CHECK(dur >= 0.0);
            ++frees;
        }
    }
    CHECK(headers >= 5);
    CHECK(pulses == 2 * frees);
    // pulse count: 6 per period + 3 boundary events (one extra y block)
    CHECK(frees == seq.n_periods * 2 + 1);
}
