#pragma once

#include <array>
#include <cmath>
#include <utility>
#include <vector>

#include <boost/numeric/odeint.hpp>

#include "echolab/common.hpp"

namespace echolab::meanfield {

/// Closed-form mean-field trajectory of the displaced collective spin in
/// the x-z plane after a small rotation, linearized around <Sy> ~ S:
///   dx/dt = 2 chi gamma S z,   dz/dt = 2 chi (1-gamma) S x,
/// solved by two exponentials with rate 2 chi S sqrt(gamma(1-gamma)).
///
/// theta here parameterizes the initial displacement, x(0) = S phi sin(theta),
/// z(0) = S phi cos(theta); a quantum encoding about the axis at angle
/// theta_enc displaces perpendicular to it, i.e. corresponds to
/// theta = theta_enc - pi/2.
struct MeanFieldTrajectory {
    double gamma;
    double chi;
    double spin;        // S = N/2
    double theta;
    double phi;
    double growth_rate; // 2 chi S sqrt(gamma(1-gamma))
    double a, b, c, d;  // exponential weights

    std::pair<double, double> at(double t) const {
        const double ep = std::exp(growth_rate * t);
        const double em = std::exp(-growth_rate * t);
        return {a * ep + b * em, c * ep - d * em};
    }
};

inline MeanFieldTrajectory make_trajectory(double gamma, double chi, double spin, double theta,
                                           double phi) {
    require(gamma >= 0.0 && gamma <= 1.0, "mean-field: gamma must lie in [0, 1]");
    if (gamma == 0.0 || gamma == 1.0)
        throw numeric_error("mean-field closed form degenerate at gamma = " + std::to_string(gamma) +
                            " (vanishing rate); integrate the ODE instead");
    MeanFieldTrajectory tr{};
    tr.gamma = gamma;
    tr.chi = chi;
    tr.spin = spin;
    tr.theta = theta;
    tr.phi = phi;
    tr.growth_rate = 2.0 * chi * spin * std::sqrt(gamma * (1.0 - gamma));
    const double sp = spin * phi;
    const double rg = std::sqrt(gamma / (1.0 - gamma));
    const double ri = std::sqrt((1.0 - gamma) / gamma);
    tr.a = 0.5 * sp * (std::sin(theta) + rg * std::cos(theta));
    tr.b = 0.5 * sp * (std::sin(theta) - rg * std::cos(theta));
    tr.c = 0.5 * sp * (ri * std::sin(theta) + std::cos(theta));
    tr.d = 0.5 * sp * (ri * std::sin(theta) - std::cos(theta));
    return tr;
}

inline std::pair<double, double> mf_closed_form(double gamma, double chi, double spin, double theta,
                                                double phi, double t) {
    return make_trajectory(gamma, chi, spin, theta, phi).at(t);
}

struct TrajectorySample {
    double t;
    double x;
    double z;
};

/// Adaptive Dormand-Prince integration of the mean-field ODE system,
/// sampled on the given time grid. Handles the gamma in {0, 1} boundaries
/// the closed form cannot.
inline std::vector<TrajectorySample> mf_ode(double gamma, double chi, double spin, double theta,
                                            double phi, const std::vector<double>& t_grid) {
    require(gamma >= 0.0 && gamma <= 1.0, "mf_ode: gamma must lie in [0, 1]");
    require(!t_grid.empty(), "mf_ode: empty time grid");
    using state_type = std::array<double, 2>;
    const auto rhs = [gamma, chi, spin](const state_type& s, state_type& dsdt, double) {
        dsdt[0] = 2.0 * chi * gamma * spin * s[1];
        dsdt[1] = 2.0 * chi * (1.0 - gamma) * spin * s[0];
    };
    state_type s{spin * phi * std::sin(theta), spin * phi * std::cos(theta)};
    std::vector<TrajectorySample> out;
    out.reserve(t_grid.size());
    namespace odeint = boost::numeric::odeint;
    auto stepper = odeint::make_controlled(1e-12, 1e-10,
                                           odeint::runge_kutta_dopri5<state_type>());
    double t_now = 0.0;
    for (double t_target : t_grid) {
        if (t_target > t_now) {
            odeint::integrate_adaptive(stepper, rhs, s, t_now, t_target,
                                       (t_target - t_now) / 64.0);
            t_now = t_target;
        } else if (t_target == 0.0 && out.empty()) {
            // initial condition sample
        } else {
            require(t_target >= t_now, "mf_ode: time grid must be nondecreasing");
        }
        out.push_back({t_target, s[0], s[1]});
    }
    return out;
}

/// Robustness-optimal encoding angle from the mean-field argument:
/// theta_r = arcsin(sqrt(gamma)).
inline double mf_theta_r(double gamma) {
    require(gamma >= 0.0 && gamma <= 1.0, "mf_theta_r: gamma must lie in [0, 1]");
    return std::asin(std::sqrt(gamma));
}

/// Growing-mode amplitude of the echo readout as a function of the encoding
/// angle (up to a positive constant):
///   g(theta) = (sqrt(1-g) + g/sqrt(1-g)) sin(theta) + (sqrt(g) + (1-g)/sqrt(g)) cos(theta),
/// maximized exactly at arcsin(sqrt(gamma)). Note the sin/cos pairing: the
/// encoding displaces the spin perpendicular to its axis, which swaps the
/// coefficients relative to a displacement-angle parameterization.
inline double mf_growth_coefficient(double gamma, double theta) {
    require(gamma > 0.0 && gamma < 1.0, "mf_growth_coefficient: gamma must lie in (0, 1)");
    const double sg = std::sqrt(gamma);
    const double cg = std::sqrt(1.0 - gamma);
    return (cg + gamma / cg) * std::sin(theta) + (sg + (1.0 - gamma) / sg) * std::cos(theta);
}

} // namespace echolab::meanfield
