#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "echolab/common.hpp"
#include "echolab/spin_core.hpp"

namespace echolab {

/// H_LMG(chi, gamma) = chi (Sx^2 + gamma Sy^2), the canonical quadratic
/// collective-spin interaction. gamma = 0 is one-axis twisting, gamma = 0.5
/// two-axis twisting; 0 <= gamma <= 0.5 covers the general case up to a
/// linear transformation.
struct LmgParams {
    double chi = 1.0;
    double gamma = 0.0;

    void validate() const {
        require(chi != 0.0, "LmgParams: chi must be nonzero");
        require(gamma >= 0.0 && gamma <= 0.5, "LmgParams: gamma must lie in [0, 0.5]");
    }
};

inline Matrix lmg_hamiltonian(const SpinOperators& ops, const LmgParams& params) {
    params.validate();
    return params.chi * (ops.sx * ops.sx + params.gamma * (ops.sy * ops.sy));
}

/// Symmetrized covariance moments of (Sx, Sz) plus Var(Sy); everything the
/// x-z-plane searches need, computed once per state.
struct XzMoments {
    double ex, ez;          // <Sx>, <Sz>
    double cxx, czz, cxz;   // covariances
    double vy;              // Var(Sy)

    double var_theta(double theta) const {
        const double st = std::sin(theta), ct = std::cos(theta);
        return cxx * st * st + czz * ct * ct + 2.0 * cxz * st * ct;
    }
};

inline XzMoments xz_moments(const SpinState& state, const SpinOperators& ops) {
    const Vector xv = ops.sx * state.amplitudes;
    const Vector zv = ops.sz * state.amplitudes;
    XzMoments m{};
    m.ex = state.amplitudes.dot(xv).real();
    m.ez = state.amplitudes.dot(zv).real();
    m.cxx = xv.squaredNorm() - m.ex * m.ex;
    m.czz = zv.squaredNorm() - m.ez * m.ez;
    m.cxz = xv.dot(zv).real() - m.ex * m.ez;
    m.vy = variance(state, ops.sy);
    return m;
}

enum class QfiSearchDomain {
    xz_plane_and_y,  // x-z covariance block plus the Sy check (default; exact for H_LMG from |y>)
    full_sphere      // largest eigenvalue of the full 3x3 covariance matrix
};

/// QFI of a pure state under rotation generator S_n: F = 4 Var(S_n).
inline double qfi_pure(const SpinState& state, const SpinOperators& ops,
                       const Eigen::Vector3d& direction) {
    require(std::abs(direction.norm() - 1.0) <= 1e-9, "qfi_pure: direction must be a unit vector");
    const Matrix gen =
        direction.x() * ops.sx + direction.y() * ops.sy + direction.z() * ops.sz;
    return 4.0 * variance(state, gen);
}

inline double qfi_pure(const SpinState& state, const Matrix& generator) {
    return 4.0 * variance(state, generator);
}

/// Maximum of qfi_pure over generator directions. The x-z block maximum is
/// the top eigenvalue of the 2x2 covariance matrix; parity of the LMG flow
/// from |y> decouples the y axis, so comparing against Var(Sy) makes the
/// restricted search exact. The full-sphere variant diagonalizes the 3x3
/// covariance matrix instead.
struct QfiOptimum {
    double qfi;
    Eigen::Vector3d direction;
};

inline QfiOptimum max_qfi_direction(const SpinState& state, const SpinOperators& ops,
                                    QfiSearchDomain domain = QfiSearchDomain::xz_plane_and_y) {
    if (domain == QfiSearchDomain::full_sphere) {
        const Vector xv = ops.sx * state.amplitudes;
        const Vector yv = ops.sy * state.amplitudes;
        const Vector zv = ops.sz * state.amplitudes;
        const double ex = state.amplitudes.dot(xv).real();
        const double ey = state.amplitudes.dot(yv).real();
        const double ez = state.amplitudes.dot(zv).real();
        Eigen::Matrix3d cov;
        cov(0, 0) = xv.squaredNorm() - ex * ex;
        cov(1, 1) = yv.squaredNorm() - ey * ey;
        cov(2, 2) = zv.squaredNorm() - ez * ez;
        cov(0, 1) = cov(1, 0) = xv.dot(yv).real() - ex * ey;
        cov(0, 2) = cov(2, 0) = xv.dot(zv).real() - ex * ez;
        cov(1, 2) = cov(2, 1) = yv.dot(zv).real() - ey * ez;
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
        return {4.0 * es.eigenvalues()(2), es.eigenvectors().col(2)};
    }
    const XzMoments m = xz_moments(state, ops);
    Eigen::Matrix2d block;
    block << m.cxx, m.cxz, m.cxz, m.czz;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(block);
    const double lxz = es.eigenvalues()(1);
    if (m.vy > lxz) return {4.0 * m.vy, Eigen::Vector3d(0, 1, 0)};
    const Eigen::Vector2d v = es.eigenvectors().col(1);
    return {4.0 * lxz, Eigen::Vector3d(v(0), 0, v(1))};
}

/// Spectral QFI for a density matrix under the unitary family
/// rho(lambda) = e^{-i lambda G} rho e^{+i lambda G}:
///   F = sum_{q_k + q_k' > 0} 2 (q_k - q_k')^2 / (q_k + q_k') |<k'|G|k>|^2.
inline double qfi_general(const Matrix& density, const Matrix& generator) {
    require(density.rows() == density.cols() && generator.rows() == generator.cols() &&
                density.rows() == generator.rows(),
            "qfi_general: dimension mismatch");
    const double trace_err = std::abs(density.trace().real() - 1.0) + std::abs(density.trace().imag());
    require(trace_err <= 1e-9, "qfi_general: density must have unit trace");
    Eigen::SelfAdjointEigenSolver<Matrix> es(density);
    const RealVector q = es.eigenvalues();
    require(q.minCoeff() >= -1e-9, "qfi_general: density must be positive semidefinite");
    const Matrix g = es.eigenvectors().adjoint() * generator * es.eigenvectors();
    const double cutoff = 1e-12;
    double f = 0.0;
    for (Eigen::Index a = 0; a < q.size(); ++a) {
        for (Eigen::Index b = 0; b < q.size(); ++b) {
            const double s = q(a) + q(b);
            if (s <= cutoff) continue;
            const double d = q(a) - q(b);
            f += 2.0 * d * d / s * std::norm(g(a, b));
        }
    }
    return f;
}

/// Golden-section refinement of a bracketed 1-D extremum.
inline double golden_section(const std::function<double(double)>& f, double a, double b,
                             bool maximize, double tol) {
    constexpr double invphi = 0.6180339887498949;
    double c = b - invphi * (b - a);
    double d = a + invphi * (b - a);
    double fc = f(c), fd = f(d);
    const double sign = maximize ? -1.0 : 1.0;
    while (b - a > tol) {
        if (sign * fc < sign * fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - invphi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + invphi * (b - a);
            fd = f(d);
        }
    }
    return 0.5 * (a + b);
}

/// Best squeezing time: argmin over t of min_theta Var(S_theta) on
/// e^{-iHt}|y>. Coarse geometric grid over chi*t in (0, pi/2], then
/// golden-section refinement; the result is resolved well below 1e-4/chi.
///
/// A minimum at the right window edge is returned as-is (very small systems
/// squeeze monotonically all the way to chi t = pi/2). A flat landscape or a
/// minimum at t -> 0 means no squeezing develops and is reported as an error.
inline double find_best_squeezing_time(const SpinOperators& ops, const LmgParams& params,
                                       int coarse_points = 400) {
    params.validate();
    const double chi = std::abs(params.chi);
    const Propagator prop(lmg_hamiltonian(ops, LmgParams{1.0, params.gamma}));
    const SpinState initial = css(ops, 0.5 * kPi, 0.5 * kPi);
    const auto min_var = [&](double tau) {
        const SpinState st{ops.n_atoms, prop.apply(initial.amplitudes, tau)};
        const XzMoments m = xz_moments(st, ops);
        Eigen::Matrix2d block;
        block << m.cxx, m.cxz, m.cxz, m.czz;
        return Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(block).eigenvalues()(0);
    };
    const double lo = 1e-4, hi = 0.5 * kPi;
    const double ratio = std::pow(hi / lo, 1.0 / (coarse_points - 1));
    int best = -1;
    double best_val = 0.0, worst_val = 0.0, tau = lo;
    std::vector<double> taus(coarse_points);
    for (int i = 0; i < coarse_points; ++i, tau *= ratio) {
        taus[i] = tau;
        const double v = min_var(tau);
        if (best < 0 || v < best_val) {
            best = i;
            best_val = v;
        }
        worst_val = std::max(worst_val, v);
    }
    if (worst_val - best_val <= 1e-10 * (1.0 + std::abs(worst_val)))
        throw numeric_error(
            "find_best_squeezing_time: variance landscape is flat (no squeezing dynamics)");
    if (best == 0)
        throw numeric_error("find_best_squeezing_time: variance minimum at t -> 0; no squeezing "
                            "develops in (0, pi/2]/chi");
    if (best == coarse_points - 1) return hi / chi;
    const double refined =
        golden_section(min_var, taus[best - 1], taus[best + 1], /*maximize=*/false, 1e-7);
    return refined / chi;
}

/// Result of the per-gamma squeezing-time optimization.
struct SqueezeSearchResult {
    double gamma;
    double t1;
    double qfi_max;
    std::pair<double, double> window;
};

/// t1 maximizing max_n F[S_n] on e^{-iHt}|y> over the window
/// [w_lo, w_hi] * t_bs (defaults 0.25 and 3.0). Linear grid, then
/// golden-section refinement to better than 1e-4/chi.
inline SqueezeSearchResult optimize_t1(const SpinOperators& ops, const LmgParams& params,
                                       std::pair<double, double> window_factor = {0.25, 3.0},
                                       QfiSearchDomain domain = QfiSearchDomain::xz_plane_and_y,
                                       int grid_points = 300) {
    params.validate();
    require(window_factor.first > 0.0 && window_factor.second > window_factor.first,
            "optimize_t1: window must satisfy 0 < lo < hi");
    const double chi = std::abs(params.chi);
    const double t_bs = find_best_squeezing_time(ops, params);
    const double lo = window_factor.first * t_bs * chi;
    const double hi = window_factor.second * t_bs * chi;
    const Propagator prop(lmg_hamiltonian(ops, LmgParams{1.0, params.gamma}));
    const SpinState initial = css(ops, 0.5 * kPi, 0.5 * kPi);
    const auto qfi_at = [&](double tau) {
        const SpinState st{ops.n_atoms, prop.apply(initial.amplitudes, tau)};
        return max_qfi_direction(st, ops, domain).qfi;
    };
    int best = 0;
    double best_val = -1.0;
    std::vector<double> taus(grid_points);
    for (int i = 0; i < grid_points; ++i) {
        taus[i] = lo + (hi - lo) * i / (grid_points - 1);
        const double f = qfi_at(taus[i]);
        if (f > best_val) {
            best_val = f;
            best = i;
        }
    }
    const double a = taus[std::max(0, best - 1)];
    const double b = taus[std::min(grid_points - 1, best + 1)];
    const double tau1 = golden_section(qfi_at, a, b, /*maximize=*/true, 1e-7);
    return SqueezeSearchResult{params.gamma, tau1 / chi, qfi_at(tau1),
                               {lo / chi, hi / chi}};
}

} // namespace echolab
