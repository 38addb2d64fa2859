#include "chainflow/thermo.hpp"

#include <cmath>

#include "chainflow/quadrature.hpp"

namespace chainflow {

namespace {

constexpr double kLogTrunc = -40.0;  // exp(-40) < 1e-16 of the mode value

void require_positive_beta(const Lambda& lam) {
    if (!(lam.l3 > 0.0))
        throw ThermoError(ThermoErrc::non_convergent,
                          "l3 (inverse temperature) must be positive");
}

// log-density of the r-marginal up to normalization
inline double phi(double r, const Lambda& lam, const Potential& pot) {
    return lam.l1 * r - lam.l3 * pot.eval(r);
}

}  // namespace

std::array<double, 3> solve_spd3(const Mat3& a, const std::array<double, 3>& b) {
    // Cholesky a = L L^T
    double l00 = std::sqrt(a(0, 0));
    double l10 = a(1, 0) / l00;
    double l20 = a(2, 0) / l00;
    double l11 = std::sqrt(a(1, 1) - l10 * l10);
    double l21 = (a(2, 1) - l20 * l10) / l11;
    double l22 = std::sqrt(a(2, 2) - l20 * l20 - l21 * l21);
    if (!(l00 > 0.0) || !(l11 > 0.0) || !(l22 > 0.0))
        throw ThermoError(ThermoErrc::not_admissible,
                          "covariance matrix not positive definite");
    double y0 = b[0] / l00;
    double y1 = (b[1] - l10 * y0) / l11;
    double y2 = (b[2] - l20 * y0 - l21 * y1) / l22;
    double x2 = y2 / l22;
    double x1 = (y1 - l21 * x2) / l11;
    double x0 = (y0 - l10 * x1 - l20 * x2) / l00;
    return {x0, x1, x2};
}

RWindow r_marginal_window(const Lambda& lam, const Potential& pot) {
    require_positive_beta(lam);
    const double target = lam.l1 / lam.l3;  // mode solves V'(r) = l1/l3

    // Bracket V'(r) = target; V' diverges in both directions for admitted
    // potentials.
    double lo = target - 1.0, hi = target + 1.0;
    double width = 1.0;
    for (int it = 0; it < 200 && pot.deriv(lo) > target; ++it) {
        lo -= width;
        width *= 2.0;
    }
    width = 1.0;
    for (int it = 0; it < 200 && pot.deriv(hi) < target; ++it) {
        hi += width;
        width *= 2.0;
    }
    if (pot.deriv(lo) > target || pot.deriv(hi) < target)
        throw ThermoError(ThermoErrc::quadrature_failure,
                          "could not bracket the mode of the r-marginal");
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (pot.deriv(mid) < target)
            lo = mid;
        else
            hi = mid;
        if (hi - lo < 1e-13 * (1.0 + std::fabs(mid))) break;
    }

    RWindow w;
    w.mode = 0.5 * (lo + hi);
    w.phi_mode = phi(w.mode, lam, pot);

    // Outward doubling until the integrand has decayed below 1e-16 of the
    // mode value.
    const double curv = std::max(lam.l3 * pot.deriv2(w.mode), 1e-8);
    const double h0 = 1.0 / std::sqrt(curv);
    double step = h0;
    w.hi = w.mode + step;
    for (int it = 0; it < 600 && phi(w.hi, lam, pot) - w.phi_mode > kLogTrunc; ++it) {
        step *= 2.0;
        w.hi = w.mode + step;
    }
    step = h0;
    w.lo = w.mode - step;
    for (int it = 0; it < 600 && phi(w.lo, lam, pot) - w.phi_mode > kLogTrunc; ++it) {
        step *= 2.0;
        w.lo = w.mode - step;
    }
    return w;
}

SiteMoments site_moments(const Lambda& lam, const Potential& pot) {
    require_positive_beta(lam);
    const RWindow w = r_marginal_window(lam, pot);
    const double v_mode = pot.eval(w.mode);

    // Components (all against the normalized weight g = exp(phi - phi*)):
    //   0: g, 1: (r-r*) g, 2: (r-r*)^2 g, 3: (V-V*) g, 4: (V-V*)^2 g,
    //   5: (r-r*)(V-V*) g, 6: V' g
    auto integrand = [&](double r, double* out) {
        const double g = std::exp(phi(r, lam, pot) - w.phi_mode);
        const double dr = r - w.mode;
        const double dv = pot.eval(r) - v_mode;
        out[0] = g;
        out[1] = dr * g;
        out[2] = dr * dr * g;
        out[3] = dv * g;
        out[4] = dv * dv * g;
        out[5] = dr * dv * g;
        out[6] = pot.deriv(r) * g;
    };

    const double tol = 1e-13 * std::max(1.0, w.hi - w.lo);
    const auto q = AdaptiveGL::integrate(integrand, 7, w.lo, w.hi, tol);
    if (!q.converged || !(q.value[0] > 0.0) || !std::isfinite(q.value[0]))
        throw ThermoError(ThermoErrc::quadrature_failure,
                          "adaptive quadrature did not reach tolerance");

    const double z = q.value[0];
    SiteMoments m;
    m.log_zr = w.phi_mode + std::log(z);
    const double er = q.value[1] / z;
    const double ev = q.value[3] / z;
    m.mean_r = w.mode + er;
    m.var_r = q.value[2] / z - er * er;
    m.mean_V = v_mode + ev;
    m.var_V = q.value[4] / z - ev * ev;
    m.cov_rV = q.value[5] / z - er * ev;
    m.mean_dV = q.value[6] / z;

    m.mean_p = lam.l2 / lam.l3;
    m.var_p = 1.0 / lam.l3;
    m.theta = 0.5 * std::log(2.0 * M_PI / lam.l3) +
              0.5 * lam.l2 * lam.l2 / lam.l3 + m.log_zr;

    m.mean_e = m.mean_V + 0.5 * (m.var_p + m.mean_p * m.mean_p);
    // e couples r and p only through V(r) and p^2/2; p is Gaussian.
    m.var_e = m.var_V + m.mean_p * m.mean_p * m.var_p + 0.5 * m.var_p * m.var_p;
    m.cov_re = m.cov_rV;
    m.cov_pe = m.mean_p * m.var_p;
    return m;
}

double partition_log(const Lambda& lam, const Potential& pot) {
    return site_moments(lam, pot).theta;
}

MacroState grad_theta(const Lambda& lam, const Potential& pot) {
    const SiteMoments m = site_moments(lam, pot);
    return MacroState{m.mean_r, m.mean_p, m.mean_e};
}

Mat3 hessian_theta(const Lambda& lam, const Potential& pot) {
    const SiteMoments m = site_moments(lam, pot);
    Mat3 h;
    h(0, 0) = m.var_r;
    h(0, 1) = h(1, 0) = 0.0;
    h(0, 2) = h(2, 0) = -m.cov_re;
    h(1, 1) = m.var_p;
    h(1, 2) = h(2, 1) = -m.cov_pe;
    h(2, 2) = m.var_e;
    return h;
}

namespace {

Lambda invert_core(const MacroState& u, const Potential& pot, Lambda lam);

}  // namespace

Lambda invert_to_lambda(const MacroState& u, const Potential& pot) {
    const double e = u.e_int();
    // Quick inadmissibility check: for the bundled convex potentials the
    // internal energy floor at fixed stretch is V(r_bar).
    if (pot.kind != Potential::Kind::custom && !(e > pot.eval(u.r_bar)))
        throw ThermoError(ThermoErrc::not_admissible,
                          "internal energy at or below the zero-temperature floor");

    // Harmonic warm start, clipped to l3 > 0.
    double beta0 = e - 0.5 * u.r_bar * u.r_bar;
    beta0 = (beta0 > 1e-3) ? 1.0 / beta0 : 1.0e3;
    return invert_core(u, pot, Lambda{u.r_bar * beta0, u.p_bar * beta0, beta0});
}

Lambda invert_to_lambda(const MacroState& u, const Potential& pot,
                        const Lambda& warm_start) {
    const double e = u.e_int();
    if (pot.kind != Potential::Kind::custom && !(e > pot.eval(u.r_bar)))
        throw ThermoError(ThermoErrc::not_admissible,
                          "internal energy at or below the zero-temperature floor");
    Lambda lam = warm_start;
    if (!(lam.l3 > 0.0)) lam.l3 = 1.0;
    return invert_core(u, pot, lam);
}

namespace {

Lambda invert_core(const MacroState& u, const Potential& pot, Lambda lam) {

    // Newton on the strictly convex objective F(l) = Theta(l) - l.u with the
    // analytic Hessian and a backtracking line search.
    double f_cur;
    SiteMoments m;
    auto eval_f = [&](const Lambda& l) {
        m = site_moments(l, pot);
        return m.theta - lambda_dot_u(l, u);
    };
    f_cur = eval_f(lam);

    const double gtol = 1e-12 * std::max(1.0, std::fabs(u.e_tot));
    Lambda best = lam;
    double best_g = HUGE_VAL;
    int stalled = 0;
    for (int it = 0; it < 80; ++it) {
        const std::array<double, 3> grad = {m.mean_r - u.r_bar, m.mean_p - u.p_bar,
                                            -m.mean_e + u.e_tot};
        const double gmax = std::max({std::fabs(grad[0]), std::fabs(grad[1]),
                                      std::fabs(grad[2])});
        if (gmax < best_g) {
            best = lam;
            best_g = gmax;
            stalled = 0;
        } else if (++stalled > 3) {
            break;  // gradient at the quadrature noise floor
        }
        if (gmax < gtol) return lam;

        Mat3 h;
        h(0, 0) = m.var_r;
        h(0, 1) = h(1, 0) = 0.0;
        h(0, 2) = h(2, 0) = -m.cov_re;
        h(1, 1) = m.var_p;
        h(1, 2) = h(2, 1) = -m.cov_pe;
        h(2, 2) = m.var_e;
        std::array<double, 3> step;
        try {
            step = solve_spd3(h, grad);
        } catch (const ThermoError&) {
            throw ThermoError(ThermoErrc::not_admissible,
                              "Newton step failed: state outside the image of DTheta");
        }

        if (gmax < 1e-6) {
            // Quadratic-convergence endgame: the objective differences sit at
            // quadrature noise, so Armijo on f is meaningless here.
            Lambda trial{lam.l1 - step[0], lam.l2 - step[1], lam.l3 - step[2]};
            double shrink = 1.0;
            while (trial.l3 <= 0.0 && shrink > 1e-6) {
                shrink *= 0.5;
                trial = Lambda{lam.l1 - shrink * step[0], lam.l2 - shrink * step[1],
                               lam.l3 - shrink * step[2]};
            }
            lam = trial;
            f_cur = eval_f(lam);
            continue;
        }

        const double slope =
            -(grad[0] * step[0] + grad[1] * step[1] + grad[2] * step[2]);
        double alpha = 1.0;
        bool moved = false;
        for (int bt = 0; bt < 40; ++bt) {
            Lambda trial{lam.l1 - alpha * step[0], lam.l2 - alpha * step[1],
                         lam.l3 - alpha * step[2]};
            if (trial.l3 > 0.0) {
                double f_trial;
                try {
                    f_trial = eval_f(trial);
                } catch (const ThermoError&) {
                    f_trial = HUGE_VAL;
                }
                if (f_trial <= f_cur + 1e-4 * alpha * slope) {
                    lam = trial;
                    f_cur = f_trial;
                    moved = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if (!moved)
            throw ThermoError(ThermoErrc::not_admissible,
                              "Newton line search stalled: state not admissible");
        if (lam.l3 > 1e12)
            throw ThermoError(ThermoErrc::not_admissible,
                              "inverse temperature diverging: state on the boundary");
    }

    if (best_g < 1e-9) return best;
    throw ThermoError(ThermoErrc::not_admissible,
                      "Newton did not converge to the requested state");
}

}  // namespace

double legendre_phi(const MacroState& u, const Potential& pot) {
    const Lambda lam = invert_to_lambda(u, pot);
    return lambda_dot_u(lam, u) - partition_log(lam, pot);
}

double tension(double r_bar, double e_int, const Potential& pot) {
    const Lambda lam = invert_to_lambda(MacroState{r_bar, 0.0, e_int}, pot);
    return lam.l1 / lam.l3;
}

double sound_speed(double r_bar, double e_int, const Potential& pot) {
    const double p0 = tension(r_bar, e_int, pot);
    const double hr = 1e-5 * std::max(std::fabs(r_bar), 1.0);
    const double he = 1e-5 * std::max(std::fabs(e_int), 1.0);
    const double p_r =
        (tension(r_bar + hr, e_int, pot) - tension(r_bar - hr, e_int, pot)) /
        (2.0 * hr);
    const double p_e =
        (tension(r_bar, e_int + he, pot) - tension(r_bar, e_int - he, pot)) /
        (2.0 * he);
    // Isentropic derivative: along an isentrope de = +P dr (P is a tension,
    // not a pressure), so dP/dr|_s = P_r + P P_e.
    const double c2 = p_r + p0 * p_e;
    if (!(c2 > 0.0))
        throw ThermoError(ThermoErrc::not_hyperbolic, "sound speed squared <= 0");
    return std::sqrt(c2);
}

double entropy(double r_bar, double e_int, const Potential& pot) {
    return -legendre_phi(MacroState{r_bar, 0.0, e_int}, pot);
}

double rate_function(const MacroState& x, const Lambda& lam, const Potential& pot) {
    return legendre_phi(x, pot) - lambda_dot_u(lam, x) + partition_log(lam, pot);
}

}  // namespace chainflow
