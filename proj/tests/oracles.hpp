#pragma once

// Independent oracles used by the test suites: finite differences, exact
// linear-system solutions, distribution tests, permutation-invariant sums.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

#include "chainflow/thermo.hpp"

namespace oracles {

using chainflow::Lambda;
using chainflow::MacroState;
using chainflow::Potential;

// Permutation-invariant sum: sorting first makes the result independent of
// the order the values appear in, so exchanging two entries cannot change
// the rounded total.
inline double sorted_sum(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    double acc = 0.0;
    for (double x : v) acc += x;
    return acc;
}

struct MeanVar {
    double mean = 0.0, var = 0.0, se = 0.0;
};

inline MeanVar mean_var(const std::vector<double>& v) {
    MeanVar out;
    if (v.empty()) return out;
    out.mean = std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
    if (v.size() > 1) {
        double ss = 0.0;
        for (double x : v) ss += (x - out.mean) * (x - out.mean);
        out.var = ss / double(v.size() - 1);
        out.se = std::sqrt(out.var / double(v.size()));
    }
    return out;
}

// One-sample Kolmogorov-Smirnov statistic against a CDF.
inline double ks_statistic(std::vector<double> sample,
                           const std::function<double(double)>& cdf) {
    std::sort(sample.begin(), sample.end());
    const double n = double(sample.size());
    double d = 0.0;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const double f = cdf(sample[i]);
        d = std::max(d, std::fabs(f - double(i) / n));
        d = std::max(d, std::fabs(double(i + 1) / n - f));
    }
    return d;
}

// Critical value at the 1% level (asymptotic, fine for n >= 50).
inline double ks_crit_1pct(std::size_t n) { return 1.628 / std::sqrt(double(n)); }

// Two-sample KS.
inline double ks_two_sample(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    double d = 0.0;
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i] <= b[j])
            ++i;
        else
            ++j;
        d = std::max(d, std::fabs(double(i) / a.size() - double(j) / b.size()));
    }
    return d;
}

inline double ks_two_sample_crit_1pct(std::size_t n, std::size_t m) {
    return 1.628 * std::sqrt(double(n + m) / (double(n) * double(m)));
}

// Wilson-Hilferty chi-square quantile (upper tail alpha = 1%).
inline double chi2_crit_1pct(int df) {
    const double z = 2.3263478740408408;
    const double a = 2.0 / (9.0 * df);
    const double t = 1.0 - a + z * std::sqrt(a);
    return df * t * t * t;
}

// Pearson chi-square of observed integer counts against Poisson(mu), with
// tail bins merged so every expected count is >= 5.
struct Chi2Result {
    double stat = 0.0;
    int df = 0;
};

inline Chi2Result poisson_chi2(const std::vector<std::uint64_t>& counts, double mu) {
    const double n = double(counts.size());
    // Poisson pmf over a window around mu wide enough for our sample sizes.
    const int lo = std::max(0, int(mu - 8.0 * std::sqrt(mu)));
    const int hi = int(mu + 8.0 * std::sqrt(mu)) + 2;
    std::vector<double> pmf;
    double logp = -mu + lo * std::log(mu);
    for (int k = 2; k <= lo; ++k) logp -= std::log(double(k));
    for (int k = lo; k <= hi; ++k) {
        pmf.push_back(std::exp(logp));
        logp += std::log(mu) - std::log(double(k + 1));
    }
    std::vector<double> observed(pmf.size(), 0.0);
    for (std::uint64_t c : counts) {
        int idx = int(c) - lo;
        idx = std::clamp(idx, 0, int(pmf.size()) - 1);
        observed[idx] += 1.0;
    }
    // Merge adjacent cells until expected >= 5.
    std::vector<double> obs_m, exp_m;
    double co = 0.0, ce = 0.0;
    for (std::size_t i = 0; i < pmf.size(); ++i) {
        co += observed[i];
        ce += n * pmf[i];
        if (ce >= 5.0) {
            obs_m.push_back(co);
            exp_m.push_back(ce);
            co = ce = 0.0;
        }
    }
    if (!obs_m.empty()) {
        obs_m.back() += co;
        exp_m.back() += ce;
    }
    Chi2Result res;
    for (std::size_t i = 0; i < obs_m.size(); ++i)
        res.stat += (obs_m[i] - exp_m[i]) * (obs_m[i] - exp_m[i]) / exp_m[i];
    res.df = std::max(1, int(obs_m.size()) - 1);
    return res;
}

// Finite-difference Hessian of partition_log.
inline chainflow::Mat3 fd_hessian_theta(const Lambda& lam, const Potential& pot,
                                        double h = 1e-4) {
    auto theta = [&](double a, double b, double c) {
        return chainflow::partition_log(Lambda{a, b, c}, pot);
    };
    const double x[3] = {lam.l1, lam.l2, lam.l3};
    chainflow::Mat3 m;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            double xi[3] = {x[0], x[1], x[2]};
            if (i == j) {
                const double f0 = theta(xi[0], xi[1], xi[2]);
                xi[i] += h;
                const double fp = theta(xi[0], xi[1], xi[2]);
                xi[i] -= 2 * h;
                const double fm = theta(xi[0], xi[1], xi[2]);
                m(i, j) = (fp - 2 * f0 + fm) / (h * h);
            } else {
                xi[i] += h;
                xi[j] += h;
                const double fpp = theta(xi[0], xi[1], xi[2]);
                xi[j] -= 2 * h;
                const double fpm = theta(xi[0], xi[1], xi[2]);
                xi[i] -= 2 * h;
                const double fmm = theta(xi[0], xi[1], xi[2]);
                xi[j] += 2 * h;
                const double fmp = theta(xi[0], xi[1], xi[2]);
                m(i, j) = (fpp - fpm - fmp + fmm) / (4 * h * h);
            }
        }
    return m;
}

// Brute-force isentrope tracer: stays on the level set s(r, e) = s0 by
// re-solving for e at each r with a 1D Newton on the entropy itself, then
// differentiates the tension along the traced curve.
inline double isentrope_sound_speed2(double r0, double e0, const Potential& pot,
                                     double dr = 2e-4) {
    const double s0 = chainflow::entropy(r0, e0, pot);
    auto e_on_isentrope = [&](double r) {
        double e = e0;
        for (int it = 0; it < 60; ++it) {
            const double s = chainflow::entropy(r, e, pot);
            const Lambda lam =
                chainflow::invert_to_lambda(MacroState{r, 0.0, e}, pot);
            const double step = (s - s0) / lam.l3;  // ds/de = beta
            e -= step;
            if (std::fabs(step) < 1e-12) break;
        }
        return e;
    };
    const double pp = chainflow::tension(r0 + dr, e_on_isentrope(r0 + dr), pot);
    const double pm = chainflow::tension(r0 - dr, e_on_isentrope(r0 - dr), pot);
    return (pp - pm) / (2.0 * dr);
}

// Exact solution of the harmonic (linear) system r_t = p_x, p_t = r_x on
// [0,1] with p(0,t) = 0 and r(1,t) = tau(t), by characteristic tracing with
// reflections.  E comes from the pointwise-conserved temperature field.
struct DAlembert {
    std::function<double(double)> r0, p0, theta0;  // theta = e_int - r^2/2
    std::function<double(double)> tau;

    double wplus(double x, double t) const {
        if (x + t <= 1.0) return p0(x + t) + r0(x + t);
        const double s = t - (1.0 - x);
        return wminus(1.0, s) + 2.0 * tau(s);
    }
    double wminus(double x, double t) const {
        if (t <= x) return p0(x - t) - r0(x - t);
        return -wplus(0.0, t - x);
    }

    MacroState at(double x, double t) const {
        const double wp = wplus(x, t), wm = wminus(x, t);
        const double r = 0.5 * (wp - wm);
        const double p = 0.5 * (wp + wm);
        const double e_int = 0.5 * r * r + theta0(x);
        return MacroState{r, p, e_int + 0.5 * p * p};
    }
};

}  // namespace oracles
