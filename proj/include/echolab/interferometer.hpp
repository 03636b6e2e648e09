#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "echolab/common.hpp"
#include "echolab/floquet.hpp"
#include "echolab/lmg.hpp"
#include "echolab/spin_core.hpp"

namespace echolab {

/// Anti-squeezing stage of the echo: evolve under H_LMG(-chi, gamma) for t2.
struct IdealReversal {
    double t2 = 0.0;
};
/// No readout dynamics; measurement happens right after encoding.
struct NoReversal {};
/// Reversal synthesized by a compiled pulse train (applied noiselessly here;
/// noisy trains run through the Monte-Carlo machinery).
struct FloquetReversal {
    floquet::PulseSequence sequence;
};
using Reversal = std::variant<IdealReversal, NoReversal, FloquetReversal>;

/// Full description of one echo experiment:
/// |y> --U1(t1)--> squeeze --e^{-i phi S_theta}--> encode --U2--> measure S_m.
struct EchoProtocol {
    int n_atoms = 0;
    LmgParams params;
    double t1 = 0.0;
    double theta = 0.0;         // encoding axis, x-z plane, angle from z
    double phi = 0.0;           // encoded phase
    Reversal reversal = IdealReversal{};
    double measure_angle = 0.0; // measured component S_m, x-z plane

    void validate() const {
        params.validate();
        require(n_atoms >= 1, "EchoProtocol: n_atoms must be >= 1");
        require(t1 >= 0.0, "EchoProtocol: t1 must be nonnegative");
        require(std::abs(phi) <= 0.1,
                "EchoProtocol: |phi| must be <= 0.1 rad for the linear-response regime");
        if (const auto* ideal = std::get_if<IdealReversal>(&reversal))
            require(ideal->t2 >= 0.0, "EchoProtocol: t2 must be nonnegative");
        if (const auto* fl = std::get_if<FloquetReversal>(&reversal)) {
            require(fl->sequence.gamma == params.gamma,
                    "EchoProtocol: pulse sequence compiled for a different gamma");
            require(fl->sequence.chi == params.chi,
                    "EchoProtocol: pulse sequence compiled for a different chi");
        }
    }
    /// True when phi is large enough that O(phi^2) terms may matter.
    bool phi_linearity_warning() const { return std::abs(phi) > 0.01; }
};

struct GainReport {
    double delta_phi = 0.0;
    double delta_g_db = 0.0;         // -20 lg(delta_phi sqrt(N))
    double magnification = 0.0;      // d<S_m>/dphi / (N/2), phi -> 0
    double derivative_signal = 0.0;  // d<S_m>/dphi at phi = 0
};

/// Perturbation encoding U_{phi,theta} = e^{-i phi S_theta}.
inline SpinState encode(const SpinState& state, const SpinOperators& ops, double phi,
                        double theta) {
    if (phi == 0.0) return state;
    return SpinState{state.n_atoms, Propagator(spin_component(ops, theta)).apply(state.amplitudes, phi)};
}

namespace detail {

/// Shared machinery for everything the echo computes at phi = 0: applies U1,
/// the reversal, and exposes the commutator coefficients
///   C_ab = i <y| [S_a(U1), S_b(U2 U1)] |y>,  a,b in {x,z},
/// from which d<S_m>/dphi is bilinear in (sin/cos theta, sin/cos m), plus
/// the x-z moments of the phi = 0 final state.
class EchoCore {
public:
    EchoCore(const SpinOperators& ops, const LmgParams& params, double t1)
        : ops_(ops), h_prop_(lmg_hamiltonian(ops, params)) {
        const SpinState initial = css(ops, 0.5 * kPi, 0.5 * kPi);
        a_ = h_prop_.apply(initial.amplitudes, t1);
        ax_ = ops.sx * a_;
        az_ = ops.sz * a_;
    }

    void set_reversal(const LmgParams& params, const Reversal& rev) {
        if (const auto* ideal = std::get_if<IdealReversal>(&rev)) {
            // U2 = e^{-i H(-chi) t2} = e^{+i H t2}
            u_ = h_prop_.apply(a_, -ideal->t2);
            ux_ = h_prop_.apply(ax_, -ideal->t2);
            uz_ = h_prop_.apply(az_, -ideal->t2);
        } else if (std::get_if<NoReversal>(&rev)) {
            u_ = a_;
            ux_ = ax_;
            uz_ = az_;
        } else {
            const auto& fl = std::get<FloquetReversal>(rev);
            std::vector<Vector> states{a_, ax_, az_};
            floquet::apply_train(states, ops_, params, fl.sequence);
            u_ = std::move(states[0]);
            ux_ = std::move(states[1]);
            uz_ = std::move(states[2]);
        }
        const Vector su_x = ops_.sx * u_;
        const Vector su_z = ops_.sz * u_;
        cxx_ = -2.0 * ux_.dot(su_x).imag();
        cxz_ = -2.0 * ux_.dot(su_z).imag();
        czx_ = -2.0 * uz_.dot(su_x).imag();
        czz_ = -2.0 * uz_.dot(su_z).imag();
        const double ex = u_.dot(su_x).real();
        const double ez = u_.dot(su_z).real();
        moments_.ex = ex;
        moments_.ez = ez;
        moments_.cxx = su_x.squaredNorm() - ex * ex;
        moments_.czz = su_z.squaredNorm() - ez * ez;
        moments_.cxz = su_x.dot(su_z).real() - ex * ez;
        moments_.vy = 0.0;  // unused here
    }

    double derivative(double theta, double m) const {
        const double st = std::sin(theta), ct = std::cos(theta);
        const double sm = std::sin(m), cm = std::cos(m);
        return st * (sm * cxx_ + cm * cxz_) + ct * (sm * czx_ + cm * czz_);
    }

    /// max over m of |derivative(theta, m)|, attained at atan2 of the two
    /// linear coefficients.
    std::pair<double, double> max_derivative_over_m(double theta) const {
        const double st = std::sin(theta), ct = std::cos(theta);
        const double as = st * cxx_ + ct * czx_;  // sin(m) coefficient
        const double ac = st * cxz_ + ct * czz_;  // cos(m) coefficient
        return {std::hypot(as, ac), std::atan2(as, ac)};
    }

    double final_variance(double m) const { return std::max(moments_.var_theta(m), 0.0); }

    const XzMoments& final_moments() const { return moments_; }
    const Vector& u() const { return u_; }
    const Vector& a() const { return a_; }
    Vector u_theta(double theta) const { return std::sin(theta) * ux_ + std::cos(theta) * uz_; }
    const Propagator& propagator() const { return h_prop_; }
    const SpinOperators& ops() const { return ops_; }

private:
    const SpinOperators& ops_;
    Propagator h_prop_;
    Vector a_, ax_, az_;   // U1|y>, Sx U1|y>, Sz U1|y>
    Vector u_, ux_, uz_;   // U2 applied to the above
    double cxx_ = 0, cxz_ = 0, czx_ = 0, czz_ = 0;
    XzMoments moments_{};
};

/// Vertex of the parabola through three equally spaced samples; falls back
/// to the center when the curvature has the wrong sign.
inline double parabolic_vertex(double x0, double h, double f_prev, double f0, double f_next,
                               bool maximize) {
    const double denom = f_prev - 2.0 * f0 + f_next;
    if ((maximize && denom >= 0.0) || (!maximize && denom <= 0.0) || denom == 0.0) return x0;
    const double shift = 0.5 * h * (f_prev - f_next) / denom;
    return x0 + std::clamp(shift, -h, h);
}

/// Grid + parabolic extremum of a pi-periodic angle objective over [0, pi).
template <typename Fn>
double extremal_angle(const Fn& f, bool maximize, int grid) {
    const double step = kPi / grid;
    const double sign = maximize ? 1.0 : -1.0;
    int best = 0;
    double best_val = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < grid; ++i) {
        const double v = sign * f(i * step);
        if (v > best_val) {
            best_val = v;
            best = i;
        }
    }
    const double t0 = best * step;
    double theta = parabolic_vertex(t0, step, sign * f(t0 - step), best_val, sign * f(t0 + step),
                                    /*maximize=*/true);
    if (theta < 0.0) theta += kPi;
    if (theta >= kPi) theta -= kPi;
    return theta;
}

/// Variance moments of the squeezed state U1 |y>.
inline XzMoments squeezed_moments(const SpinOperators& ops, const LmgParams& params, double t1) {
    params.validate();
    const Propagator prop(lmg_hamiltonian(ops, params));
    const SpinState initial = css(ops, 0.5 * kPi, 0.5 * kPi);
    const SpinState squeezed{ops.n_atoms, prop.apply(initial.amplitudes, t1)};
    return xz_moments(squeezed, ops);
}

} // namespace detail

/// Final state U2 U_{phi,theta} U1 |y> of the protocol, with its actual phi.
inline SpinState run_echo(const EchoProtocol& protocol, const SpinOperators& ops) {
    protocol.validate();
    require(ops.n_atoms == protocol.n_atoms, "run_echo: operator set does not match protocol");
    const Propagator h_prop(lmg_hamiltonian(ops, protocol.params));
    const SpinState initial = css(ops, 0.5 * kPi, 0.5 * kPi);
    Vector v = h_prop.apply(initial.amplitudes, protocol.t1);
    if (protocol.phi != 0.0)
        v = Propagator(spin_component(ops, protocol.theta)).apply(v, protocol.phi);
    if (const auto* ideal = std::get_if<IdealReversal>(&protocol.reversal)) {
        v = h_prop.apply(v, -ideal->t2);
    } else if (const auto* fl = std::get_if<FloquetReversal>(&protocol.reversal)) {
        std::vector<Vector> states{std::move(v)};
        floquet::apply_train(states, ops, protocol.params, fl->sequence);
        v = std::move(states[0]);
    }
    return SpinState{protocol.n_atoms, std::move(v)};
}

/// d<S_m^phi>/dphi at phi = 0, evaluated exactly through the commutator form
/// i<y|[S_theta(U1), S_m(U2 U1)]|y> with S(U) = U^dag S U.
inline double signal_derivative(const EchoProtocol& protocol, const SpinOperators& ops) {
    protocol.validate();
    detail::EchoCore core(ops, protocol.params, protocol.t1);
    core.set_reversal(protocol.params, protocol.reversal);
    return core.derivative(protocol.theta, protocol.measure_angle);
}

/// Central-difference cross-check of signal_derivative through the full
/// pipeline at phi = +-h, with one Richardson step when the h and h/2
/// estimates disagree by more than 1e-6 relative.
inline double signal_derivative_fd(const EchoProtocol& protocol, const SpinOperators& ops,
                                   double h = 1e-4) {
    const Matrix sm = spin_component(ops, protocol.measure_angle);
    const auto mean_at = [&](double phi) {
        EchoProtocol p = protocol;
        p.phi = phi;
        return expectation(run_echo(p, ops), sm);
    };
    const auto central = [&](double step) {
        return (mean_at(step) - mean_at(-step)) / (2.0 * step);
    };
    const double d_h = central(h);
    const double d_h2 = central(0.5 * h);
    const double scale = std::max(std::abs(d_h2), 1e-300);
    if (std::abs(d_h - d_h2) > 1e-6 * scale) return (4.0 * d_h2 - d_h) / 3.0;
    return d_h2;
}

/// Error-propagation phase resolution Delta phi = Delta S_m / |d<S_m>/dphi|
/// at phi = 0.
inline double delta_phi(const EchoProtocol& protocol, const SpinOperators& ops) {
    protocol.validate();
    detail::EchoCore core(ops, protocol.params, protocol.t1);
    core.set_reversal(protocol.params, protocol.reversal);
    const double deriv = core.derivative(protocol.theta, protocol.measure_angle);
    const double noise = std::sqrt(core.final_variance(protocol.measure_angle));
    if (std::abs(deriv) < 1e-300 || noise / std::abs(deriv) > 1e12)
        throw numeric_error("delta_phi: vanishing signal derivative (numerator " +
                            std::to_string(noise) + ", denominator " + std::to_string(deriv) + ")");
    return noise / std::abs(deriv);
}

inline double gain_db_from_delta_phi(double dphi, int n_atoms) {
    return -20.0 * std::log10(dphi * std::sqrt(static_cast<double>(n_atoms)));
}

inline GainReport metrological_gain(const EchoProtocol& protocol, const SpinOperators& ops) {
    protocol.validate();
    detail::EchoCore core(ops, protocol.params, protocol.t1);
    core.set_reversal(protocol.params, protocol.reversal);
    const double deriv = core.derivative(protocol.theta, protocol.measure_angle);
    const double noise = std::sqrt(core.final_variance(protocol.measure_angle));
    if (std::abs(deriv) < 1e-300 || noise / std::abs(deriv) > 1e12)
        throw numeric_error("metrological_gain: vanishing signal derivative");
    GainReport report;
    report.delta_phi = noise / std::abs(deriv);
    report.delta_g_db = gain_db_from_delta_phi(report.delta_phi, protocol.n_atoms);
    report.magnification = deriv / (0.5 * protocol.n_atoms);
    report.derivative_signal = deriv;
    return report;
}

namespace detail {

/// argmin over m in [0, pi) of Delta phi(m) on a prepared core:
/// grid step ~1e-3 rad, then parabolic refinement.
inline std::pair<double, double> best_measure_angle(const EchoCore& core, double theta,
                                                    int grid = 3142) {
    const double step = kPi / grid;
    int best = 0;
    double best_val = std::numeric_limits<double>::infinity();
    for (int i = 0; i < grid; ++i) {
        const double m = i * step;
        const double d = std::abs(core.derivative(theta, m));
        if (d < 1e-300) continue;
        const double val = std::sqrt(core.final_variance(m)) / d;
        if (val < best_val) {
            best_val = val;
            best = i;
        }
    }
    const auto dphi_at = [&](double m) {
        const double d = std::abs(core.derivative(theta, m));
        return d < 1e-300 ? std::numeric_limits<double>::infinity()
                          : std::sqrt(core.final_variance(m)) / d;
    };
    const double m0 = best * step;
    const double refined = parabolic_vertex(m0, step, dphi_at(m0 - step), best_val,
                                            dphi_at(m0 + step), /*maximize=*/false);
    return {refined, dphi_at(refined)};
}

} // namespace detail

/// Measurement angle minimizing Delta phi for the given protocol skeleton
/// (noise-free). Used to pin m before robustness and t2 scans.
inline double optimal_measure_angle(const SpinOperators& ops, const LmgParams& params, double t1,
                                    double theta, const Reversal& reversal) {
    detail::EchoCore core(ops, params, t1);
    core.set_reversal(params, reversal);
    return detail::best_measure_angle(core, theta).first;
}

/// Precision-optimal encoding axis per the published prescription: the
/// variance-minimizing direction of the squeezed state, reported as its
/// reflection into [0, pi/2] (the acute angle to the z-axis), which is the
/// convention the reference curves use and the angle that feeds protocols.
/// The raw minimizing axis in [0, pi) is available from
/// squeezed_axis_angle().
inline double optimize_theta_p(const SpinOperators& ops, const LmgParams& params, double t1,
                               int grid = 3142) {
    const XzMoments m = detail::squeezed_moments(ops, params, t1);
    const double theta = detail::extremal_angle([&](double th) { return m.var_theta(th); },
                                                /*maximize=*/false, grid);
    return theta > 0.5 * kPi ? kPi - theta : theta;
}

/// Raw variance-minimizing axis of U1|y> in [0, pi) (no reflection).
inline double squeezed_axis_angle(const SpinOperators& ops, const LmgParams& params, double t1,
                                  int grid = 3142) {
    const XzMoments m = detail::squeezed_moments(ops, params, t1);
    return detail::extremal_angle([&](double th) { return m.var_theta(th); },
                                  /*maximize=*/false, grid);
}

/// QFI-favored encoding axis (variance maximum), exposed for comparison with
/// the variance-minimum prescription above.
inline double anti_squeezed_axis_angle(const SpinOperators& ops, const LmgParams& params,
                                       double t1, int grid = 3142) {
    const XzMoments m = detail::squeezed_moments(ops, params, t1);
    return detail::extremal_angle([&](double th) { return m.var_theta(th); },
                                  /*maximize=*/true, grid);
}

/// Robustness-optimal encoding axis: argmax over theta of the magnification
/// max_m |d<S_m>/dphi| / (N/2) with ideal reversal t2 = t1. Grid step
/// ~1e-3 rad plus parabolic refinement, like the theta_p search.
inline double optimize_theta_r(const SpinOperators& ops, const LmgParams& params, double t1,
                               int grid = 3142) {
    params.validate();
    detail::EchoCore core(ops, params, t1);
    core.set_reversal(params, IdealReversal{t1});
    return detail::extremal_angle(
        [&](double th) { return core.max_derivative_over_m(th).first; },
        /*maximize=*/true, grid);
}

enum class MeasurePolicy {
    pinned_at_echo,  // m optimized once at t2 = t1, then held fixed (default; matches the
                     // reference gain maps, whose optima sit at t2 = t1)
    joint            // m re-optimized at every t2
};

struct T2Optimum {
    double t2 = 0.0;
    double gain_db = 0.0;
    double measure_angle = 0.0;
};

/// Maximize the metrological gain over t2 in [0, 2 t1] (grid + parabolic
/// refinement) for a fixed encoding angle.
inline T2Optimum optimize_t2(const SpinOperators& ops, const LmgParams& params, double t1,
                             double theta, MeasurePolicy policy = MeasurePolicy::pinned_at_echo,
                             int grid_points = 200) {
    params.validate();
    require(t1 > 0.0, "optimize_t2: t1 must be positive");
    detail::EchoCore core(ops, params, t1);
    core.set_reversal(params, IdealReversal{t1});
    const double m_echo = detail::best_measure_angle(core, theta).first;

    const auto eval = [&](double t2) -> std::pair<double, double> {  // (gain_db, m)
        core.set_reversal(params, IdealReversal{t2});
        double m = m_echo;
        if (policy == MeasurePolicy::joint) m = detail::best_measure_angle(core, theta).first;
        const double d = std::abs(core.derivative(theta, m));
        if (d < 1e-300) return {-std::numeric_limits<double>::infinity(), m};
        const double dphi = std::sqrt(core.final_variance(m)) / d;
        return {gain_db_from_delta_phi(dphi, ops.n_atoms), m};
    };

    const double step = 2.0 * t1 / (grid_points - 1);
    int best = 0;
    double best_gain = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < grid_points; ++i) {
        const double g = eval(i * step).first;
        if (g > best_gain) {
            best_gain = g;
            best = i;
        }
    }
    const double t0 = best * step;
    const auto gain_at = [&](double t2) { return eval(std::max(t2, 0.0)).first; };
    double t2 = detail::parabolic_vertex(t0, step, gain_at(t0 - step), best_gain,
                                         gain_at(t0 + step), /*maximize=*/true);
    t2 = std::clamp(t2, 0.0, 2.0 * t1);
    const auto [gain, m] = eval(t2);
    return T2Optimum{t2, gain, m};
}

} // namespace echolab
