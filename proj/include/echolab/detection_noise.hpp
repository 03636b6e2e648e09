#pragma once

#include <cmath>
#include <string>

#include "echolab/common.hpp"
#include "echolab/interferometer.hpp"
#include "echolab/spin_core.hpp"

namespace echolab {

/// Gaussian detection-noise model: reading out Dicke state |m> returns
/// |m'> with probability proportional to exp(-(m - m')^2 / (2 sigma)^2).
/// The strength N = e^{-1/(2 sigma)^2} is the nearest-neighbour confusion
/// weight.
struct DetectionNoise {
    double strength = 0.0;  // N in [0, 1)

    void validate() const {
        require(strength >= 0.0 && strength < 1.0,
                "DetectionNoise: strength must lie in [0, 1)");
    }
    double sigma() const {
        validate();
        if (strength == 0.0) return 0.0;
        return 0.5 / std::sqrt(std::log(1.0 / strength));
    }
    static DetectionNoise from_sigma(double sigma) {
        require(sigma >= 0.0, "DetectionNoise: sigma must be nonnegative");
        if (sigma == 0.0) return DetectionNoise{0.0};
        return DetectionNoise{std::exp(-1.0 / (4.0 * sigma * sigma))};
    }
};

/// Row-stochastic confusion matrix Gamma_{m,m'}: each row is the Gaussian
/// kernel renormalized over the available indices, so rows sum to one.
inline RealMatrix gamma_matrix(int dim, const DetectionNoise& noise) {
    require(dim >= 2, "gamma_matrix: dim must be >= 2");
    noise.validate();
    RealMatrix g = RealMatrix::Zero(dim, dim);
    if (noise.strength == 0.0) return RealMatrix::Identity(dim, dim);
    for (int m = 0; m < dim; ++m) {
        double sum = 0.0;
        for (int mp = 0; mp < dim; ++mp) {
            const double k = static_cast<double>(m - mp);
            g(m, mp) = std::pow(noise.strength, k * k);
            sum += g(m, mp);
        }
        g.row(m) /= sum;
    }
    return g;
}

/// The measuring operator M and its first-order pieces. m_exact carries
/// entries N^{k^2} on the +-k off-diagonals with the series prefactor
/// 1/(1 + 2 sum_n N^{n^2}); terms below 1e-16 are dropped and entries
/// falling outside the basis are truncated without renormalization. m1 is
/// the unit-entry nearest-neighbour confusion matrix of the expansion
/// M ~ (M0 + N M1) / (1 + 2N).
struct NoiseOperators {
    RealMatrix m_exact;
    RealMatrix m0;
    RealMatrix m1;
};

inline NoiseOperators detection_operator(int dim, const DetectionNoise& noise) {
    require(dim >= 2, "detection_operator: dim must be >= 2");
    noise.validate();
    NoiseOperators out;
    out.m0 = RealMatrix::Identity(dim, dim);
    out.m1 = RealMatrix::Zero(dim, dim);
    for (int k = 0; k + 1 < dim; ++k) {
        out.m1(k, k + 1) = 1.0;
        out.m1(k + 1, k) = 1.0;
    }
    if (noise.strength == 0.0) {
        out.m_exact = out.m0;
        return out;
    }
    double series = 0.0;
    int k_max = 0;
    for (int n = 1;; ++n) {
        const double w = std::pow(noise.strength, static_cast<double>(n) * n);
        if (w < 1e-16) break;
        series += w;
        k_max = n;
    }
    const double prefactor = 1.0 / (1.0 + 2.0 * series);
    out.m_exact = RealMatrix::Zero(dim, dim);
    for (int m = 0; m < dim; ++m) {
        out.m_exact(m, m) += 1.0;
        for (int k = 1; k <= k_max; ++k) {
            const double w = std::pow(noise.strength, static_cast<double>(k) * k);
            if (m + k < dim) out.m_exact(m + k, m) += w;
            if (m - k >= 0) out.m_exact(m - k, m) += w;
        }
    }
    out.m_exact *= prefactor;
    return out;
}

/// Which moments enter Delta phi under M. `unnormalized` uses the bare
/// quadratic forms M^T S M and M^T S^2 M of the first-order expansion;
/// `normalized` divides every moment by <M^T M>, which is the convention
/// the robustness curves are computed in.
enum class MomentConvention { unnormalized, normalized };

/// Delta phi with the measuring operator inserted around the readout.
/// The phi-derivative is evaluated exactly through the commutator form with
/// the effective operator M^T S_m M (and the <M^T M> normalization term when
/// normalized). strength = 0 reduces to delta_phi identically.
inline double noisy_delta_phi(const EchoProtocol& protocol, const SpinOperators& ops,
                              const DetectionNoise& noise,
                              MomentConvention convention = MomentConvention::unnormalized) {
    protocol.validate();
    noise.validate();
    detail::EchoCore core(ops, protocol.params, protocol.t1);
    core.set_reversal(protocol.params, protocol.reversal);
    const Vector& u = core.u();
    const Vector utheta = core.u_theta(protocol.theta);

    const RealMatrix m_op = detection_operator(ops.dim, noise).m_exact;
    const Matrix sm = spin_component(ops, protocol.measure_angle);
    const Matrix o1 = m_op.cast<complexd>().transpose() * sm * m_op.cast<complexd>();
    const Matrix o2 = m_op.cast<complexd>().transpose() * (sm * sm) * m_op.cast<complexd>();

    const auto real_exp = [&](const Vector& l, const Matrix& op, const Vector& r) {
        return l.dot(op * r).real();
    };
    const auto deriv_exp = [&](const Matrix& op) {
        // i <y|[S_theta(U1), Op(U2 U1)]|y> = -2 Im <utheta|Op|u>
        return -2.0 * utheta.dot(op * u).imag();
    };

    const double mean1 = real_exp(u, o1, u);
    const double mean2 = real_exp(u, o2, u);
    const double d1 = deriv_exp(o1);

    double variance_m = 0.0, deriv = 0.0;
    if (convention == MomentConvention::unnormalized) {
        variance_m = mean2 - mean1 * mean1;
        deriv = d1;
    } else {
        const Matrix mm = (m_op.transpose() * m_op).cast<complexd>();
        const double n0 = real_exp(u, mm, u);
        const double dn = deriv_exp(mm);
        variance_m = mean2 / n0 - (mean1 / n0) * (mean1 / n0);
        deriv = (d1 * n0 - mean1 * dn) / (n0 * n0);
    }
    if (std::abs(deriv) < 1e-300)
        throw numeric_error("noisy_delta_phi: vanishing signal derivative");
    return std::sqrt(std::max(variance_m, 0.0)) / std::abs(deriv);
}

struct RobustnessOptions {
    double noise0 = 0.1;  // operating point of the finite difference
    double step = 0.01;
    MomentConvention convention = MomentConvention::normalized;
};

/// Central finite difference d(Delta phi)/dN at the operating point.
inline double noise_sensitivity(const EchoProtocol& protocol, const SpinOperators& ops,
                                const RobustnessOptions& options = {}) {
    require(options.noise0 - options.step > 0.0 && options.noise0 + options.step < 1.0,
            "noise_sensitivity: noise0 +- step must stay inside (0, 1)");
    const double hi = noisy_delta_phi(protocol, ops, DetectionNoise{options.noise0 + options.step},
                                      options.convention);
    const double lo = noisy_delta_phi(protocol, ops, DetectionNoise{options.noise0 - options.step},
                                      options.convention);
    return (hi - lo) / (2.0 * options.step);
}

/// Robustness coefficient R = -lg d(Delta phi)/dN; larger means the readout
/// responds less to detection noise.
inline double robustness_R(const EchoProtocol& protocol, const SpinOperators& ops,
                           const RobustnessOptions& options = {}) {
    const double der = noise_sensitivity(protocol, ops, options);
    if (der <= 0.0)
        throw numeric_error("robustness_R: nonpositive noise sensitivity " + std::to_string(der) +
                            "; R undefined");
    return -std::log10(der);
}

/// First-order coefficient d(Delta phi)/dN at N = 0 evaluated semi-
/// analytically from the Appendix-B expansion of the unnormalized pipeline,
/// with the numerator's noise dependence kept:
///   d(Delta phi)/dN = Delta phi0 * [2 + (d - 2ab + 4a^2)/(2c) - D1/D0],
/// a,c = first/second central moments of S_m, b,d = the corresponding
/// {M1, .} corrections, D0, D1 = commutator derivatives of S_m and
/// {M1, S_m}. Requires the ideal echo t2 = t1. No N argument: this is the
/// N -> 0 coefficient itself.
inline double noise_sensitivity_semi_analytic(const EchoProtocol& protocol,
                                              const SpinOperators& ops) {
    protocol.validate();
    const auto* ideal = std::get_if<IdealReversal>(&protocol.reversal);
    require(ideal != nullptr && std::abs(ideal->t2 - protocol.t1) <= 1e-12 * std::max(1.0, protocol.t1),
            "noise_sensitivity_semi_analytic: requires ideal reversal with t2 = t1");

    detail::EchoCore core(ops, protocol.params, protocol.t1);
    core.set_reversal(protocol.params, protocol.reversal);
    const Vector& u = core.u();
    const Vector utheta = core.u_theta(protocol.theta);

    const Matrix sm = spin_component(ops, protocol.measure_angle);
    const Matrix sm2 = sm * sm;
    const Matrix m1 = detection_operator(ops.dim, DetectionNoise{0.0}).m1.cast<complexd>();
    const Matrix ac1 = m1 * sm + sm * m1;    // {M1, S_m}
    const Matrix ac2 = m1 * sm2 + sm2 * m1;  // {M1, S_m^2}

    const double a = u.dot(sm * u).real();
    const double b = u.dot(ac1 * u).real();
    const double c2 = u.dot(sm2 * u).real() - a * a;
    const double d2 = u.dot(ac2 * u).real();
    const double d0 = -2.0 * utheta.dot(sm * u).imag();
    const double d1 = -2.0 * utheta.dot(ac1 * u).imag();
    if (std::abs(d0) < 1e-300)
        throw numeric_error("noise_sensitivity_semi_analytic: zero denominator commutator");
    if (c2 <= 0.0)
        throw numeric_error("noise_sensitivity_semi_analytic: vanishing readout variance");
    const double dphi0 = std::sqrt(c2) / std::abs(d0);
    return dphi0 * (2.0 + (d2 - 2.0 * a * b + 4.0 * a * a) / (2.0 * c2) - d1 / d0);
}

inline double robustness_semi_analytic(const EchoProtocol& protocol, const SpinOperators& ops) {
    const double der = noise_sensitivity_semi_analytic(protocol, ops);
    if (der <= 0.0)
        throw numeric_error("robustness_semi_analytic: nonpositive sensitivity " +
                            std::to_string(der));
    return -std::log10(der);
}

/// R_rel = R(protocol) - R(same encoding, no reversal), each branch with its
/// own noise-free-optimal measurement angle.
inline double relative_robustness(const EchoProtocol& protocol, const SpinOperators& ops,
                                  const RobustnessOptions& options = {}) {
    protocol.validate();
    EchoProtocol with = protocol;
    with.measure_angle =
        optimal_measure_angle(ops, protocol.params, protocol.t1, protocol.theta, protocol.reversal);
    EchoProtocol without = protocol;
    without.reversal = NoReversal{};
    without.measure_angle =
        optimal_measure_angle(ops, protocol.params, protocol.t1, protocol.theta, NoReversal{});
    return robustness_R(with, ops, options) - robustness_R(without, ops, options);
}

} // namespace echolab
