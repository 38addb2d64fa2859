#pragma once

#include <array>
#include <stdexcept>
#include <string>

#include "chainflow/potential.hpp"

namespace chainflow {

// Conjugate parameters of the single-site Gibbs measure
//   nu_lambda(dr,dp) = exp(lambda . zeta(r,p) - Theta(lambda)) dr dp
// with zeta = (r, p, -e).  l3 is the inverse temperature.
struct Lambda {
    double l1 = 0.0;
    double l2 = 0.0;
    double l3 = 1.0;

    double tension() const { return l1 / l3; }
    double velocity() const { return l2 / l3; }
    double temperature() const { return 1.0 / l3; }
};

// Conserved triple in physical coordinates; the u-vector used against Lambda
// is (r_bar, p_bar, -e_tot).
struct MacroState {
    double r_bar = 0.0;
    double p_bar = 0.0;
    double e_tot = 0.0;

    double e_int() const { return e_tot - 0.5 * p_bar * p_bar; }
};

inline double lambda_dot_u(const Lambda& l, const MacroState& u) {
    return l.l1 * u.r_bar + l.l2 * u.p_bar - l.l3 * u.e_tot;
}

struct Mat3 {
    std::array<std::array<double, 3>, 3> m{};
    double& operator()(int i, int j) { return m[i][j]; }
    double operator()(int i, int j) const { return m[i][j]; }
};

// Solves A x = b for symmetric positive definite A (Cholesky).
std::array<double, 3> solve_spd3(const Mat3& a, const std::array<double, 3>& b);

enum class ThermoErrc {
    non_convergent,
    quadrature_failure,
    not_admissible,
    not_hyperbolic,
};

class ThermoError : public std::runtime_error {
public:
    ThermoError(ThermoErrc code, const std::string& what)
        : std::runtime_error(what), code(code) {}
    ThermoErrc code;
};

// All single-site moments needed anywhere, computed in one adaptive
// quadrature pass over the r-marginal (p-moments are analytic).
struct SiteMoments {
    double theta = 0.0;   // log Z(lambda)
    double log_zr = 0.0;     // log of the r-integral
    double mean_r = 0.0, var_r = 0.0;
    double mean_V = 0.0, var_V = 0.0, cov_rV = 0.0;
    double mean_dV = 0.0;  // E[V'(r)]
    double mean_p = 0.0, var_p = 0.0;
    double mean_e = 0.0, var_e = 0.0, cov_re = 0.0, cov_pe = 0.0;
};

SiteMoments site_moments(const Lambda& lam, const Potential& pot);

// Location of the r-marginal: mode, log-density value at the mode, and the
// truncation window where exp(phi - phi*) has fallen below 1e-16.
struct RWindow {
    double mode = 0.0;
    double phi_mode = 0.0;
    double lo = 0.0;
    double hi = 0.0;
};
RWindow r_marginal_window(const Lambda& lam, const Potential& pot);

double partition_log(const Lambda& lam, const Potential& pot);
MacroState grad_theta(const Lambda& lam, const Potential& pot);
Mat3 hessian_theta(const Lambda& lam, const Potential& pot);
Lambda invert_to_lambda(const MacroState& u, const Potential& pot);
// Same, but seeded from a nearby solution (used by sweeping table builders).
Lambda invert_to_lambda(const MacroState& u, const Potential& pot,
                        const Lambda& warm_start);
double legendre_phi(const MacroState& u, const Potential& pot);

// Equilibrium tension P(r_bar, e_int) = E[V'(r)] = l1/l3, Galilean invariant.
double tension(double r_bar, double e_int, const Potential& pot);

// Isentropic sound speed c = sqrt(dP/dr at constant entropy); the partial
// derivatives of P come from centered differences of tension() with relative
// step 1e-5.
double sound_speed(double r_bar, double e_int, const Potential& pot);

// Thermodynamic entropy s = -Phi(r, 0, -e); ds/de = beta > 0.
double entropy(double r_bar, double e_int, const Potential& pot);

// Large-deviation rate function I(x) = Phi(x) - x.lambda + Theta(lambda).
double rate_function(const MacroState& x, const Lambda& lam, const Potential& pot);

}  // namespace chainflow
