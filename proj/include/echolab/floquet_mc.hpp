#pragma once

#include <utility>
#include <vector>

#include "echolab/common.hpp"
#include "echolab/floquet.hpp"
#include "echolab/interferometer.hpp"
#include "echolab/parallel.hpp"
#include "echolab/rng.hpp"

namespace echolab::floquet {

struct GainSample {
    double time = 0.0;  // nominal elapsed train time
    double g = 0.0;     // magnification, derivative form
};
using GainTrajectory = std::vector<GainSample>;

/// Run `trials` independent noisy realizations of the protocol's pulse-train
/// reversal, sampling the magnification G at every period boundary. Trial i
/// draws from the stream derived as stream(noise.seed, i), so results are
/// bit-for-bit reproducible and independent of the worker count or execution
/// order; the returned list is ordered by trial index.
inline std::vector<GainTrajectory> monte_carlo_gain(const EchoProtocol& protocol,
                                                    const SpinOperators& ops,
                                                    const PulseNoiseSpec& noise, int trials,
                                                    int workers = 0) {
    protocol.validate();
    noise.validate();
    require(trials >= 1, "monte_carlo_gain: trials must be >= 1");
    const auto* fl = std::get_if<FloquetReversal>(&protocol.reversal);
    require(fl != nullptr, "monte_carlo_gain: protocol must use a floquet reversal");
    const PulseSequence& seq = fl->sequence;

    const detail::TrainContext ctx(ops, protocol.params);
    const SpinState initial = css(ops, 0.5 * kPi, 0.5 * kPi);
    const Vector a = ctx.h_prop.apply(initial.amplitudes, protocol.t1);
    const Vector w0 = spin_component(ops, protocol.theta) * a;
    const Matrix sm = spin_component(ops, protocol.measure_angle);
    const double half_n = 0.5 * ops.n_atoms;

    std::vector<GainTrajectory> out(trials);
    parallel_for(static_cast<std::size_t>(trials), resolve_workers(workers), [&](std::size_t i) {
        SplitMix64 rng = SplitMix64::stream(noise.seed, i);
        std::vector<Vector> pair{a, w0};
        GainTrajectory traj;
        traj.reserve(seq.n_periods);
        detail::run_train(ctx, pair, seq, &noise, &rng, [&](int, double t) {
            const double g = -2.0 * pair[1].dot(sm * pair[0]).imag() / half_n;
            traj.push_back({t, g});
        });
        out[i] = std::move(traj);
    });
    return out;
}

/// Noiseless reference trajectory for the same sampling grid.
inline GainTrajectory noiseless_gain_trajectory(const EchoProtocol& protocol,
                                                const SpinOperators& ops) {
    protocol.validate();
    const auto* fl = std::get_if<FloquetReversal>(&protocol.reversal);
    require(fl != nullptr, "noiseless_gain_trajectory: protocol must use a floquet reversal");
    const detail::TrainContext ctx(ops, protocol.params);
    const SpinState initial = css(ops, 0.5 * kPi, 0.5 * kPi);
    std::vector<Vector> pair{ctx.h_prop.apply(initial.amplitudes, protocol.t1), Vector{}};
    pair[1] = spin_component(ops, protocol.theta) * pair[0];
    const Matrix sm = spin_component(ops, protocol.measure_angle);
    const double half_n = 0.5 * ops.n_atoms;
    GainTrajectory traj;
    traj.reserve(fl->sequence.n_periods);
    detail::run_train(ctx, pair, fl->sequence, nullptr, nullptr, [&](int, double t) {
        traj.push_back({t, -2.0 * pair[1].dot(sm * pair[0]).imag() / half_n});
    });
    return traj;
}

} // namespace echolab::floquet
