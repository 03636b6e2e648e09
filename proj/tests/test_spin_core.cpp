#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>

#include "echolab/rng.hpp"
#include "echolab/spin_core.hpp"

using namespace echolab;

namespace {

SpinState random_state(const SpinOperators& ops, SplitMix64& rng) {
    Vector v(ops.dim);
    for (int i = 0; i < ops.dim; ++i)
        v(i) = complexd(rng.gaussian(0.0, 1.0), rng.gaussian(0.0, 1.0));
    v /= v.norm();
    return SpinState{ops.n_atoms, std::move(v)};
}

double max_abs(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }

} // namespace

TEST_CASE("operator algebra holds for a range of N", "[spin_core]") {
    for (int n : {1, 2, 10, 100, 200}) {
        const SpinOperators ops = build_operators(n);
        const double spin = 0.5 * n;
        CAPTURE(n);

        CHECK(max_abs(ops.sx - ops.sx.adjoint()) <= 1e-12);
        CHECK(max_abs(ops.sy - ops.sy.adjoint()) <= 1e-12);
        CHECK(max_abs(ops.sz - ops.sz.adjoint()) <= 1e-12);

        CHECK(max_abs(ops.sx * ops.sy - ops.sy * ops.sx - kI * ops.sz) <= 1e-10);
        CHECK(max_abs(ops.sy * ops.sz - ops.sz * ops.sy - kI * ops.sx) <= 1e-10);
        CHECK(max_abs(ops.sz * ops.sx - ops.sx * ops.sz - kI * ops.sy) <= 1e-10);

        const Matrix casimir = spin * (spin + 1.0) * Matrix::Identity(ops.dim, ops.dim);
        CHECK(max_abs(ops.s_squared - casimir) <= 1e-10);

        // structural: sx, sz real; sy imaginary; sx, sy tridiagonal; sz diagonal
        CHECK(ops.sx.imag().cwiseAbs().maxCoeff() == 0.0);
        CHECK(ops.sz.imag().cwiseAbs().maxCoeff() == 0.0);
        CHECK(ops.sy.real().cwiseAbs().maxCoeff() == 0.0);
        for (int i = 0; i < ops.dim; ++i)
            for (int j = 0; j < ops.dim; ++j) {
                if (std::abs(i - j) > 1) {
                    CHECK(std::abs(ops.sx(i, j)) == 0.0);
                    CHECK(std::abs(ops.sy(i, j)) == 0.0);
                }
                if (i != j) CHECK(std::abs(ops.sz(i, j)) == 0.0);
            }
    }
}

TEST_CASE("algebra holds at the relaxed tolerance for large N", "[spin_core]") {
    // beyond N = 200 the contract relaxes to 1e-8
    const SpinOperators ops = build_operators(400);
    CHECK((ops.sx * ops.sy - ops.sy * ops.sx - kI * ops.sz).cwiseAbs().maxCoeff() <= 1e-8);
    const double spin = 200.0;
    CHECK((ops.s_squared - spin * (spin + 1.0) * Matrix::Identity(ops.dim, ops.dim))
              .cwiseAbs()
              .maxCoeff() <= 1e-8);
}

TEST_CASE("single spin matches Pauli matrices", "[spin_core]") {
    const SpinOperators ops = build_operators(1);
    CHECK_THAT(ops.sx(0, 1).real(), Catch::Matchers::WithinAbs(0.5, 1e-15));
    CHECK_THAT(ops.sx(1, 0).real(), Catch::Matchers::WithinAbs(0.5, 1e-15));
    CHECK_THAT(ops.sz(0, 0).real(), Catch::Matchers::WithinAbs(0.5, 1e-15));
    CHECK_THAT(ops.sz(1, 1).real(), Catch::Matchers::WithinAbs(-0.5, 1e-15));
}

TEST_CASE("build_operators rejects bad atom numbers", "[spin_core]") {
    CHECK_THROWS_AS(build_operators(0), std::invalid_argument);
    CHECK_THROWS_AS(build_operators(-3), std::invalid_argument);
    CHECK_THROWS_AS(build_operators(kMaxAtoms + 1), std::invalid_argument);
}

TEST_CASE("css prepares coherent states with the right mean spin", "[spin_core]") {
    const SpinOperators ops = build_operators(24);
    const double spin = 12.0;

    SECTION("polar zero is the top state") {
        const SpinState s = css(ops, 0.0, 1.234);
        CHECK_THAT(std::abs(s.amplitudes(0)), Catch::Matchers::WithinAbs(1.0, 1e-12));
    }
    SECTION("y state") {
        const SpinState s = css(ops, 0.5 * kPi, 0.5 * kPi);
        CHECK_THAT(expectation(s, ops.sy), Catch::Matchers::WithinAbs(spin, 1e-9));
        CHECK_THAT(expectation(s, ops.sx), Catch::Matchers::WithinAbs(0.0, 1e-9));
        CHECK_THAT(expectation(s, ops.sz), Catch::Matchers::WithinAbs(0.0, 1e-9));
    }
    SECTION("general direction") {
        const double polar = 1.1, azimuth = -0.7;
        const SpinState s = css(ops, polar, azimuth);
        CHECK_THAT(expectation(s, ops.sx),
                   Catch::Matchers::WithinAbs(spin * std::sin(polar) * std::cos(azimuth), 1e-9));
        CHECK_THAT(expectation(s, ops.sy),
                   Catch::Matchers::WithinAbs(spin * std::sin(polar) * std::sin(azimuth), 1e-9));
        CHECK_THAT(expectation(s, ops.sz),
                   Catch::Matchers::WithinAbs(spin * std::cos(polar), 1e-9));
    }
    SECTION("single-spin x state by hand") {
        const SpinOperators one = build_operators(1);
        const SpinState s = css(one, 0.5 * kPi, 0.0);
        CHECK_THAT(expectation(s, one.sx), Catch::Matchers::WithinAbs(0.5, 1e-12));
    }
}

TEST_CASE("rotations are unitary and invertible", "[spin_core]") {
    const SpinOperators ops = build_operators(17);
    SplitMix64 rng(42);

    SECTION("zero angle is the identity") {
        const SpinState s = random_state(ops, rng);
        const SpinState r = rotate(s, ops, Axis::x, 0.0);
        CHECK(fidelity(s, r) >= 1.0 - 1e-12);
    }
    SECTION("pi rotation about y flips the top state") {
        SpinState top{ops.n_atoms, Vector::Zero(ops.dim)};
        top.amplitudes(0) = 1.0;
        const SpinState flipped = rotate(top, ops, Axis::y, kPi);
        CHECK_THAT(std::abs(flipped.amplitudes(ops.dim - 1)),
                   Catch::Matchers::WithinAbs(1.0, 1e-10));
    }
    SECTION("rotate then inverse-rotate restores the state") {
        for (int rep = 0; rep < 5; ++rep) {
            const SpinState s = random_state(ops, rng);
            const double angle = rng.gaussian(0.0, 2.0);
            const Eigen::Vector3d axis = Eigen::Vector3d(rng.gaussian(0, 1), rng.gaussian(0, 1),
                                                         rng.gaussian(0, 1))
                                             .normalized();
            const SpinState back = rotate(rotate(s, ops, axis, angle), ops, axis, -angle);
            CHECK(fidelity(s, back) >= 1.0 - 1e-10);
            CHECK(std::abs(back.norm() - 1.0) <= 1e-10);
        }
    }
    SECTION("zero axis is rejected") {
        const SpinState s = random_state(ops, rng);
        CHECK_THROWS_AS(rotate(s, ops, Eigen::Vector3d::Zero(), 0.3), std::invalid_argument);
    }
}

TEST_CASE("evolution is unitary and composable", "[spin_core]") {
    const SpinOperators ops = build_operators(12);
    SplitMix64 rng(7);
    const Matrix h = ops.sx * ops.sx + 0.3 * (ops.sy * ops.sy);
    const Propagator prop(h);

    SECTION("t = 0 is the identity") {
        const SpinState s = random_state(ops, rng);
        CHECK(fidelity(s, evolve(s, prop, 0.0)) >= 1.0 - 1e-12);
    }
    SECTION("norm preservation over random states") {
        for (int rep = 0; rep < 100; ++rep) {
            const SpinState s = random_state(ops, rng);
            const SpinState out = evolve(s, prop, rng.gaussian(0.0, 1.0));
            CHECK(std::abs(out.norm() - 1.0) <= 1e-10);
        }
    }
    SECTION("composition: U(t1 + t2) = U(t2) U(t1)") {
        const SpinState s = random_state(ops, rng);
        const SpinState once = evolve(s, prop, 0.7);
        const SpinState twice = evolve(evolve(s, prop, 0.3), prop, 0.4);
        CHECK(fidelity(once, twice) >= 1.0 - 1e-9);
    }
    SECTION("integer-spin 2 pi rotation about z is periodic") {
        const SpinOperators even = build_operators(2);
        SplitMix64 rng2(3);
        const SpinState s = random_state(even, rng2);
        const SpinState out = evolve(s, even.sz, 2.0 * kPi);
        CHECK(fidelity(s, out) >= 1.0 - 1e-10);
    }
    SECTION("dimension mismatch and non-Hermitian input are rejected") {
        const SpinState s = random_state(ops, rng);
        Matrix bad = Matrix::Zero(ops.dim, ops.dim);
        bad(0, 1) = 1.0;  // not Hermitian
        CHECK_THROWS_AS(evolve(s, bad, 0.1), std::invalid_argument);
        const SpinOperators other = build_operators(5);
        CHECK_THROWS_AS(evolve(s, other.sz, 0.1), std::invalid_argument);
    }
}

TEST_CASE("N=2 evolution under Sx^2 matches direct diagonalization", "[spin_core]") {
    const SpinOperators ops = build_operators(2);
    SplitMix64 rng(11);
    const SpinState s = random_state(ops, rng);
    const double t = 0.8321;

    // independent 3x3 route: diagonalize sx, square the eigenvalues by hand
    Eigen::SelfAdjointEigenSolver<Matrix> es(ops.sx);
    Matrix expm = Matrix::Zero(3, 3);
    for (int k = 0; k < 3; ++k) {
        const double lam = es.eigenvalues()(k);
        expm += std::exp(complexd(0.0, -lam * lam * t)) * es.eigenvectors().col(k) *
                es.eigenvectors().col(k).adjoint();
    }
    const Vector expected = expm * s.amplitudes;
    const SpinState got = evolve(s, Matrix(ops.sx * ops.sx), t);
    CHECK((expected - got.amplitudes).norm() <= 1e-10);
}

TEST_CASE("moments of the coherent state", "[spin_core]") {
    const SpinOperators ops = build_operators(30);
    const SpinState y = css(ops, 0.5 * kPi, 0.5 * kPi);
    CHECK_THAT(variance(y, ops.sz), Catch::Matchers::WithinAbs(30.0 / 4.0, 1e-9));
    CHECK_THAT(expectation(y, ops.sy), Catch::Matchers::WithinAbs(15.0, 1e-9));
}

TEST_CASE("squeezing pushes a quadrature below projection noise", "[spin_core]") {
    const SpinOperators ops = build_operators(2);
    const SpinState y = css(ops, 0.5 * kPi, 0.5 * kPi);
    const SpinState squeezed = evolve(y, Matrix(ops.sx * ops.sx), 0.2);
    double best = 1e9;
    for (int i = 0; i < 600; ++i) {
        const double theta = kPi * i / 600.0;
        best = std::min(best, variance(squeezed, spin_component(ops, theta)));
    }
    CHECK(best < 2.0 / 4.0);
}

TEST_CASE("spin_component interpolates between Sz and Sx", "[spin_core]") {
    const SpinOperators ops = build_operators(9);
    CHECK(max_abs(spin_component(ops, 0.0) - ops.sz) <= 1e-15);
    CHECK(max_abs(spin_component(ops, 0.5 * kPi) - ops.sx) <= 1e-12);

    // eigenvalues of S_theta match those of Sz for any theta
    Eigen::SelfAdjointEigenSolver<Matrix> a(spin_component(ops, 0.25 * kPi));
    Eigen::SelfAdjointEigenSolver<Matrix> b(ops.sz);
    CHECK((a.eigenvalues() - b.eigenvalues()).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("rotation conjugation maps Sx^2 evolution to Sz^2 evolution", "[spin_core]") {
    const SpinOperators ops = build_operators(14);
    SplitMix64 rng(5);
    const SpinState s = random_state(ops, rng);
    const double chi_t = 0.37;
    // R_{y,-pi/2} e^{-i chi t Sx^2} R_{y,+pi/2} |s> = e^{-i chi t Sz^2} |s>
    const SpinState lhs = rotate(
        evolve(rotate(s, ops, Axis::y, 0.5 * kPi), Matrix(ops.sx * ops.sx), chi_t), ops, Axis::y,
        -0.5 * kPi);
    const SpinState rhs = evolve(s, Matrix(ops.sz * ops.sz), chi_t);
    CHECK(fidelity(lhs, rhs) >= 1.0 - 1e-9);
}

TEST_CASE("LMG Hamiltonian couples only next-nearest Dicke indices", "[spin_core]") {
    const SpinOperators ops = build_operators(16);
    const Matrix h = ops.sx * ops.sx + 0.4 * (ops.sy * ops.sy);
    for (int i = 0; i < ops.dim; ++i)
        for (int j = 0; j < ops.dim; ++j)
            if (std::abs(i - j) != 0 && std::abs(i - j) != 2) CHECK(std::abs(h(i, j)) <= 1e-14);
}
