#include "chainflow/gibbs.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>

#include "chainflow/quadrature.hpp"

namespace chainflow {

LambdaProfile LambdaProfile::constant(const Lambda& lam, std::size_t n) {
    LambdaProfile p;
    p.values.assign(n, lam);
    return p;
}

LambdaProfile LambdaProfile::from_function(
    const std::function<Lambda(double)>& lam_of_x, std::size_t n) {
    LambdaProfile p;
    p.values.reserve(n);
    for (std::size_t i = 1; i <= n; ++i) p.values.push_back(lam_of_x(double(i) / n));
    for (const Lambda& l : p.values)
        if (!(l.l3 > 0.0))
            throw ThermoError(ThermoErrc::non_convergent,
                              "profile contains l3 <= 0");
    return p;
}

LambdaProfile LambdaProfile::from_macro(
    const std::function<MacroState(double)>& u_of_x, std::size_t n,
    const Potential& pot) {
    LambdaProfile p;
    p.values.reserve(n);
    for (std::size_t i = 1; i <= n; ++i)
        p.values.push_back(invert_to_lambda(u_of_x(double(i) / n), pot));
    return p;
}

namespace {

struct Envelope {
    // Gaussian branch
    bool gaussian = true;
    double mode = 0.0;
    double phi_mode = 0.0;
    double sigma = 1.0;
    // Piecewise-exponential fallback: flat top on [mode-w, mode+w], tangent
    // exponential tails outside (valid for log-concave marginals).
    double w = 0.0;
    double slope_lo = 0.0, slope_hi = 0.0;  // |phi'| at the tangent points
    double phi_lo = 0.0, phi_hi = 0.0;      // phi - phi_mode at the tangent points
    double mass_lo = 0.0, mass_mid = 0.0, mass_hi = 0.0;
};

double phi_of(const Lambda& lam, const Potential& pot, double r) {
    return lam.l1 * r - lam.l3 * pot.eval(r);
}

Envelope build_envelope(const Lambda& lam, const Potential& pot) {
    const RWindow win = r_marginal_window(lam, pot);
    Envelope env;
    env.mode = win.mode;
    env.phi_mode = win.phi_mode;

    const double c_env =
        std::min(pot.deriv2(win.mode), std::max(pot.curvature_min, 0.0));
    if (c_env > 0.05) {
        env.gaussian = true;
        env.sigma = std::sqrt(1.2 / (lam.l3 * c_env));
        return env;
    }

    // Tiny curvature at the mode: tangent-exponential fallback.
    env.gaussian = false;
    double w = 1.0 / std::sqrt(lam.l3 * std::max(pot.deriv2(win.mode), 1e-4));
    for (int it = 0; it < 60; ++it) {
        if (env.phi_mode - phi_of(lam, pot, env.mode + w) >= 1.0 &&
            env.phi_mode - phi_of(lam, pot, env.mode - w) >= 1.0)
            break;
        w *= 2.0;
    }
    env.w = w;
    const double lo = env.mode - w, hi = env.mode + w;
    env.slope_lo = lam.l1 - lam.l3 * pot.deriv(lo);   // > 0 (phi rising)
    env.slope_hi = -(lam.l1 - lam.l3 * pot.deriv(hi));  // > 0 (phi falling)
    env.slope_lo = std::max(env.slope_lo, 1e-12);
    env.slope_hi = std::max(env.slope_hi, 1e-12);
    env.phi_lo = phi_of(lam, pot, lo) - env.phi_mode;
    env.phi_hi = phi_of(lam, pot, hi) - env.phi_mode;
    env.mass_lo = std::exp(env.phi_lo) / env.slope_lo;
    env.mass_hi = std::exp(env.phi_hi) / env.slope_hi;
    env.mass_mid = 2.0 * w;
    return env;
}

// Envelope log-height (relative to the mode) at r; the acceptance test is
// log(u) < phi(r) - phi_mode - log_envelope(r).
double log_envelope(const Envelope& env, double r) {
    if (env.gaussian) {
        const double d = r - env.mode;
        return -0.5 * d * d / (env.sigma * env.sigma);
    }
    if (r < env.mode - env.w)
        return env.phi_lo + env.slope_lo * (r - (env.mode - env.w));
    if (r > env.mode + env.w)
        return env.phi_hi - env.slope_hi * (r - (env.mode + env.w));
    return 0.0;
}

double draw_envelope(const Envelope& env, Rng& rng) {
    if (env.gaussian) return env.mode + env.sigma * rng.gauss();
    const double total = env.mass_lo + env.mass_mid + env.mass_hi;
    double u = rng.uniform() * total;
    if (u < env.mass_lo) {
        const double v = std::max(rng.uniform(), 1e-300);
        return env.mode - env.w + std::log(v) / env.slope_lo;
    }
    u -= env.mass_lo;
    if (u < env.mass_mid) return env.mode - env.w + u;
    const double v = std::max(rng.uniform(), 1e-300);
    return env.mode + env.w - std::log(v) / env.slope_hi;
}

double sample_r(const Lambda& lam, const Potential& pot, const Envelope& env,
                Rng& rng) {
    for (int trial = 1; trial <= 2000; ++trial) {
        const double r = draw_envelope(env, rng);
        const double log_accept =
            phi_of(lam, pot, r) - env.phi_mode - log_envelope(env, r);
        double u = rng.uniform();
        while (u == 0.0) u = rng.uniform();
        if (std::log(u) < log_accept) return r;
        if (trial == 2000)
            throw EnvelopeFailure(
                "rejection acceptance rate below 1e-3: envelope mis-specified "
                "for potential " + pot.name);
    }
    return env.mode;  // unreachable
}

}  // namespace

std::pair<double, double> sample_site(const Lambda& lam, const Potential& pot,
                                      Rng& rng) {
    if (!(lam.l3 > 0.0))
        throw ThermoError(ThermoErrc::non_convergent, "sample_site needs l3 > 0");
    const Envelope env = build_envelope(lam, pot);
    const double r = sample_r(lam, pot, env, rng);
    const double p = lam.l2 / lam.l3 + rng.gauss() / std::sqrt(lam.l3);
    return {r, p};
}

ChainState sample_chain(const LambdaProfile& profile, const Potential& pot,
                        Rng& rng) {
    const std::size_t n = profile.size();
    ChainState st;
    st.r.resize(n);
    st.p.resize(n);

    // Envelopes are cached per distinct lambda so constant or piecewise
    // profiles pay the mode search once.
    std::map<std::tuple<double, double, double>, Envelope> cache;
    for (std::size_t i = 0; i < n; ++i) {
        const Lambda& lam = profile.values[i];
        auto key = std::make_tuple(lam.l1, lam.l2, lam.l3);
        auto it = cache.find(key);
        if (it == cache.end()) it = cache.emplace(key, build_envelope(lam, pot)).first;
        st.r[i] = sample_r(lam, pot, it->second, rng);
        st.p[i] = lam.l2 / lam.l3 + rng.gauss() / std::sqrt(lam.l3);
    }
    return st;
}

std::pair<ChainState, ChainState> sample_chain_pair(const LambdaProfile& profile,
                                                    const Potential& pot, Rng& rng) {
    const std::size_t n = profile.size();
    ChainState a, b;
    a.r.resize(n);
    a.p.resize(n);
    b.r.resize(n);
    b.p.resize(n);

    std::map<std::tuple<double, double, double>, RQuantile> cache;
    for (std::size_t i = 0; i < n; ++i) {
        const Lambda& lam = profile.values[i];
        auto key = std::make_tuple(lam.l1, lam.l2, lam.l3);
        auto it = cache.find(key);
        if (it == cache.end()) it = cache.emplace(key, RQuantile(lam, pot)).first;
        const double u = rng.uniform();
        a.r[i] = (it->second)(u);
        b.r[i] = (it->second)(1.0 - u);
        const double z = rng.gauss();
        const double mean = lam.l2 / lam.l3;
        const double sd = 1.0 / std::sqrt(lam.l3);
        a.p[i] = mean + sd * z;
        b.p[i] = mean - sd * z;
    }
    return {std::move(a), std::move(b)};
}

double log_density_site(const Lambda& lam, double r, double p, const Potential& pot) {
    const double e = 0.5 * p * p + pot.eval(r);
    return lam.l1 * r + lam.l2 * p - lam.l3 * e - partition_log(lam, pot);
}

RQuantile::RQuantile(const Lambda& lam, const Potential& pot) {
    const RWindow win = r_marginal_window(lam, pot);
    const int n_cells = 4096;
    const double h = (win.hi - win.lo) / n_cells;
    grid_.resize(n_cells + 1);
    cdf_.resize(n_cells + 1);
    pdf_.resize(n_cells + 1);
    grid_[0] = win.lo;
    cdf_[0] = 0.0;

    auto density = [&](double r, double* out) {
        out[0] = std::exp(phi_of(lam, pot, r) - win.phi_mode);
    };
    // Per-cell GL15 masses; plenty below the sampling resolution we need.
    for (int i = 0; i < n_cells; ++i) {
        const double a = win.lo + i * h, b2 = a + h;
        auto res = AdaptiveGL::integrate(density, 1, a, b2, 1e-14 * h);
        grid_[i + 1] = b2;
        cdf_[i + 1] = cdf_[i] + res.value[0];
    }
    const double total = cdf_.back();
    for (double& c : cdf_) c /= total;
    cdf_.back() = 1.0;
    for (int i = 0; i <= n_cells; ++i) {
        double fx;
        density(grid_[i], &fx);
        pdf_[i] = fx / total;
    }
}

double RQuantile::operator()(double u) const {
    u = std::clamp(u, 0.0, 1.0);
    auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    std::size_t hi = std::min<std::size_t>(it - cdf_.begin(), cdf_.size() - 1);
    if (hi == 0) hi = 1;
    const std::size_t lo = hi - 1;
    const double mass = cdf_[hi] - cdf_[lo];
    if (mass <= 0.0) return grid_[lo];
    const double target = u - cdf_[lo];
    const double width = grid_[hi] - grid_[lo];
    // Linear density model within the cell: solve
    //   rho_lo t + (drho / 2 width) t^2 = target, t in [0, width].
    const double rho_lo = pdf_[lo] * width / mass;  // rescaled so cell mass = width
    const double drho = (pdf_[hi] - pdf_[lo]) * width / mass;
    const double tgt = target * width / mass;
    double t;
    if (std::fabs(drho) < 1e-12 * std::max(rho_lo, 1e-300)) {
        t = rho_lo > 0.0 ? tgt / rho_lo : 0.5 * width;
    } else {
        const double a2 = 0.5 * drho / width;
        const double disc = rho_lo * rho_lo + 4.0 * a2 * tgt;
        t = disc > 0.0 ? (2.0 * tgt) / (rho_lo + std::sqrt(disc)) : tgt / rho_lo;
    }
    t = std::clamp(t, 0.0, width);
    return grid_[lo] + t;
}

}  // namespace chainflow
