#pragma once

#include <cmath>
#include <memory>
#include <mutex>
#include <utility>

#include <Eigen/Dense>

#include "echolab/common.hpp"

namespace echolab {

/// Collective spin operators on the (N+1)-dimensional symmetric (Dicke)
/// subspace of N spin-1/2 particles, hbar = 1.
///
/// Basis convention: index k in {0,...,N} labels |S, m> with S = N/2 and
/// m = S - k, so index 0 is the maximal-Sz state |j, j>. Ladder matrix
/// elements use Condon-Shortley phases, which makes sx real nonnegative on
/// the off-diagonals, sz real diagonal, and sy purely imaginary; any
/// Hamiltonian quadratic in sx, sy, sz then comes out exactly real.
struct SpinOperators {
    int n_atoms = 0;
    int dim = 0;
    Matrix sx, sy, sz;
    Matrix s_squared;

    double total_spin() const { return 0.5 * n_atoms; }
};

/// Pure state over the Dicke basis.
struct SpinState {
    int n_atoms = 0;
    Vector amplitudes;

    double norm() const { return amplitudes.norm(); }
};

inline constexpr int kMaxAtoms = 2000;  // dense (N+1)^2 matrices; 2001^2 complex ~ 64 MB each

inline SpinOperators build_operators(int n_atoms) {
    require(n_atoms >= 1, "build_operators: n_atoms must be >= 1");
    require(n_atoms <= kMaxAtoms, "build_operators: n_atoms exceeds cap " + std::to_string(kMaxAtoms));
    const int dim = n_atoms + 1;
    const double spin = 0.5 * n_atoms;

    SpinOperators ops;
    ops.n_atoms = n_atoms;
    ops.dim = dim;
    ops.sx = Matrix::Zero(dim, dim);
    ops.sy = Matrix::Zero(dim, dim);
    ops.sz = Matrix::Zero(dim, dim);
    for (int k = 0; k < dim; ++k) {
        const double m = spin - k;
        ops.sz(k, k) = m;
        if (k >= 1) {
            // S+ |S,m> = sqrt(S(S+1) - m(m+1)) |S,m+1>, target index k-1
            const double c = std::sqrt(spin * (spin + 1.0) - m * (m + 1.0));
            ops.sx(k - 1, k) = 0.5 * c;
            ops.sx(k, k - 1) = 0.5 * c;
            ops.sy(k - 1, k) = complexd(0.0, -0.5 * c);
            ops.sy(k, k - 1) = complexd(0.0, 0.5 * c);
        }
    }
    ops.s_squared = ops.sx * ops.sx + ops.sy * ops.sy + ops.sz * ops.sz;
    return ops;
}

/// Spin component in the x-z plane: S_theta = Sx sin(theta) + Sz cos(theta).
/// theta is the angle from the z-axis; theta = 0 gives Sz, pi/2 gives Sx.
inline Matrix spin_component(const SpinOperators& ops, double theta) {
    return std::sin(theta) * ops.sx + std::cos(theta) * ops.sz;
}

/// e^{-iHt} via cached spectral decomposition of the Hermitian generator.
/// The decomposition is computed once per Hamiltonian and reused for every
/// t, which is what grid sweeps need. Real-symmetric generators (the LMG
/// family in this basis) take a real solver path. Concurrent apply() is
/// safe; the lazy fill is guarded by std::call_once.
class Propagator {
public:
    explicit Propagator(Matrix hamiltonian, double hermiticity_tol = 1e-10)
        : h_(std::move(hamiltonian)) {
        require(h_.rows() == h_.cols(), "Propagator: matrix must be square");
        const double herm = (h_ - h_.adjoint()).cwiseAbs().maxCoeff();
        if (herm > hermiticity_tol)
            throw std::invalid_argument("Propagator: generator not Hermitian, max |H - H^dag| = " +
                                        std::to_string(herm));
    }

    Eigen::Index dim() const { return h_.rows(); }
    const Matrix& hamiltonian() const { return h_; }

    /// e^{-iHt} v
    Vector apply(const Vector& v, double t) const {
        require(v.size() == h_.rows(), "Propagator::apply: dimension mismatch");
        ensure_decomposed();
        if (t == 0.0) return v;
        const Vector phases = ((-kI * t) * evals_.array().cast<complexd>()).exp().matrix();
        if (real_path_) {
            // V (phases ∘ (V^T v)) with V real: split into two real matvecs
            const RealVector cr = evecs_real_.transpose() * v.real();
            const RealVector ci = evecs_real_.transpose() * v.imag();
            Vector c(v.size());
            c.real() = cr;
            c.imag() = ci;
            c.array() *= phases.array();
            Vector out(v.size());
            out.real() = evecs_real_ * c.real().matrix();
            out.imag() = evecs_real_ * c.imag().matrix();
            return out;
        }
        Vector c = evecs_cx_.adjoint() * v;
        c.array() *= phases.array();
        return evecs_cx_ * c;
    }

    const RealVector& eigenvalues() const {
        ensure_decomposed();
        return evals_;
    }

private:
    void ensure_decomposed() const {
        std::call_once(once_, [this] {
            if (h_.imag().cwiseAbs().maxCoeff() == 0.0) {
                real_path_ = true;
                Eigen::SelfAdjointEigenSolver<RealMatrix> es(h_.real());
                evals_ = es.eigenvalues();
                evecs_real_ = es.eigenvectors();
            } else {
                Eigen::SelfAdjointEigenSolver<Matrix> es(h_);
                evals_ = es.eigenvalues();
                evecs_cx_ = es.eigenvectors();
            }
        });
    }

    Matrix h_;
    mutable std::once_flag once_;
    mutable bool real_path_ = false;
    mutable RealVector evals_;
    mutable RealMatrix evecs_real_;
    mutable Matrix evecs_cx_;
};

/// e^{-iHt}|psi>. One-shot form; use a Propagator directly to reuse the
/// spectral decomposition across many times.
inline SpinState evolve(const SpinState& state, const Propagator& prop, double t) {
    return SpinState{state.n_atoms, prop.apply(state.amplitudes, t)};
}

inline SpinState evolve(const SpinState& state, const Matrix& hamiltonian, double t) {
    require(hamiltonian.rows() == state.amplitudes.size(),
            "evolve: Hamiltonian dimension does not match state");
    return evolve(state, Propagator(hamiltonian), t);
}

/// Coherent spin state |theta, phi> = e^{+i theta (Sx sin(phi) - Sy cos(phi))} |j,j>.
/// Mean spin points along (sin(polar)cos(azimuth), sin(polar)sin(azimuth), cos(polar))
/// with length N/2; css(pi/2, pi/2) is the |y> state used throughout.
inline SpinState css(const SpinOperators& ops, double polar, double azimuth) {
    require(std::isfinite(polar) && std::isfinite(azimuth), "css: angles must be finite");
    Vector top = Vector::Zero(ops.dim);
    top(0) = 1.0;
    const Matrix gen = std::sin(azimuth) * ops.sx - std::cos(azimuth) * ops.sy;
    Vector amps = Propagator(gen).apply(top, -polar);  // e^{+i polar G}
    amps /= amps.norm();
    return SpinState{ops.n_atoms, std::move(amps)};
}

enum class Axis { x, y, z };

/// R_{axis, angle} = e^{-i angle S_axis}.
inline SpinState rotate(const SpinState& state, const SpinOperators& ops, Axis axis, double angle) {
    const Matrix& gen = axis == Axis::x ? ops.sx : axis == Axis::y ? ops.sy : ops.sz;
    return SpinState{state.n_atoms, Propagator(gen).apply(state.amplitudes, angle)};
}

/// Rotation about an arbitrary direction; the axis vector must be normalized.
inline SpinState rotate(const SpinState& state, const SpinOperators& ops,
                        const Eigen::Vector3d& axis, double angle) {
    const double len = axis.norm();
    require(len > 0.0, "rotate: zero-length axis");
    require(std::abs(len - 1.0) <= 1e-9, "rotate: axis must be a unit vector");
    const Matrix gen = axis.x() * ops.sx + axis.y() * ops.sy + axis.z() * ops.sz;
    return SpinState{state.n_atoms, Propagator(gen).apply(state.amplitudes, angle)};
}

/// <psi|op|psi>. The imaginary residue is checked against tolerance and
/// discarded.
inline double expectation(const SpinState& state, const Matrix& op) {
    require(op.rows() == state.amplitudes.size(), "expectation: dimension mismatch");
    const complexd val = state.amplitudes.dot(op * state.amplitudes);
    const double scale = 1.0 + std::abs(val.real());
    if (std::abs(val.imag()) > 1e-8 * scale)
        throw numeric_error("expectation: imaginary residue " + std::to_string(val.imag()) +
                            " (operator not Hermitian?)");
    return val.real();
}

/// <op^2> - <op>^2, clamped to zero against roundoff.
inline double variance(const SpinState& state, const Matrix& op) {
    require(op.rows() == state.amplitudes.size(), "variance: dimension mismatch");
    const Vector opv = op * state.amplitudes;
    const double second = opv.squaredNorm();  // <psi|op^dag op|psi> = <op^2> for Hermitian op
    const complexd first = state.amplitudes.dot(opv);
    const double var = second - std::norm(first);
    return var > 0.0 ? var : 0.0;
}

/// |<a|b>|^2; all state comparisons go through fidelity, never global phase.
inline double fidelity(const SpinState& a, const SpinState& b) {
    return std::norm(a.amplitudes.dot(b.amplitudes));
}

} // namespace echolab
