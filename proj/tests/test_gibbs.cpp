#include <doctest.h>

#include <cmath>

#include "chainflow/gibbs.hpp"
#include "chainflow/quadrature.hpp"
#include "oracles.hpp"

using namespace chainflow;

TEST_CASE("sample_site: harmonic moments within CLT bands") {
    const auto pot = make_harmonic();
    Rng rng(123, 0);
    const int n = 1000000;

    SUBCASE("symmetric state") {
        double sr = 0.0, sp = 0.0;
        for (int i = 0; i < n; ++i) {
            auto [r, p] = sample_site({0, 0, 1}, pot, rng);
            sr += r;
            sp += p;
        }
        CHECK(std::fabs(sr / n) < 4.0 / std::sqrt(double(n)));
        CHECK(std::fabs(sp / n) < 4.0 / std::sqrt(double(n)));
    }

    SUBCASE("shifted state") {
        double sr = 0.0, srr = 0.0;
        for (int i = 0; i < n; ++i) {
            auto [r, p] = sample_site({1, 0, 1}, pot, rng);
            sr += r;
            srr += r * r;
            (void)p;
        }
        const double mean = sr / n;
        const double var = srr / n - mean * mean;
        CHECK(std::fabs(mean - 1.0) < 4.0 / std::sqrt(double(n)));
        // Var(sample variance) ~ 2 var^2 / n for Gaussian
        CHECK(std::fabs(var - 1.0) < 4.0 * std::sqrt(2.0 / double(n)));
    }
}

TEST_CASE("sample_site: coslattice moments match quadrature") {
    const auto pot = make_coslattice(0.5);
    const Lambda lam{0.6, 0.0, 1.0};
    const SiteMoments m = site_moments(lam, pot);
    Rng rng(7, 3);
    const int n = 100000;
    std::vector<double> rs(n), dvs(n), p2s(n);
    for (int i = 0; i < n; ++i) {
        auto [r, p] = sample_site(lam, pot, rng);
        rs[i] = r;
        dvs[i] = pot.deriv(r);
        p2s[i] = p * p;
    }
    const auto mr = oracles::mean_var(rs);
    const auto mdv = oracles::mean_var(dvs);
    const auto mp2 = oracles::mean_var(p2s);
    CHECK(std::fabs(mr.mean - m.mean_r) < 5.0 * mr.se);
    CHECK(std::fabs(mdv.mean - m.mean_dV) < 5.0 * mdv.se);
    CHECK(std::fabs(mp2.mean - (m.var_p + m.mean_p * m.mean_p)) < 5.0 * mp2.se);
}

TEST_CASE("sample_site: tiny mode curvature falls back to the exponential envelope") {
    // a = 0.95 leaves V'' as small as 0.05: below the Gaussian-envelope
    // threshold, so the tangent-exponential branch must carry the load.
    const auto pot = make_coslattice(0.95);
    const Lambda lam{0.0, 0.0, 4.0};
    const SiteMoments m = site_moments(lam, pot);
    Rng rng(99, 1);
    const int n = 200000;
    std::vector<double> rs(n), vs(n);
    for (int i = 0; i < n; ++i) {
        auto [r, p] = sample_site(lam, pot, rng);
        rs[i] = r;
        vs[i] = pot.eval(r);
        (void)p;
    }
    const auto mr = oracles::mean_var(rs);
    const auto mv = oracles::mean_var(vs);
    CHECK(std::fabs(mr.mean - m.mean_r) < 5.0 * mr.se);
    CHECK(std::fabs(mr.var - m.var_r) < 0.02 * m.var_r);
    CHECK(std::fabs(mv.mean - m.mean_V) < 5.0 * mv.se);
}

TEST_CASE("sample_chain: exchangeability, product structure, N=1") {
    const auto pot = make_coslattice(0.5);
    const Lambda lam{1.0, 0.0, 1.0};  // tau = 1, beta = 1

    SUBCASE("constant profile is exchangeable (two-half KS at 1%)") {
        Rng rng(5, 0);
        const int n = 4096;
        const ChainState st = sample_chain(LambdaProfile::constant(lam, n), pot, rng);
        std::vector<double> first(st.r.begin(), st.r.begin() + n / 2);
        std::vector<double> second(st.r.begin() + n / 2, st.r.end());
        const double d = oracles::ks_two_sample(first, second);
        CHECK(d < oracles::ks_two_sample_crit_1pct(n / 2, n / 2));
    }

    SUBCASE("distinct sites are uncorrelated") {
        Rng rng(6, 0);
        const int n = 64, reps = 4000;
        double s_ab = 0.0, s_a = 0.0, s_b = 0.0, s_aa = 0.0, s_bb = 0.0;
        for (int it = 0; it < reps; ++it) {
            const ChainState st =
                sample_chain(LambdaProfile::constant(lam, n), pot, rng);
            const double a = st.r[10], b = st.r[40];
            s_ab += a * b;
            s_a += a;
            s_b += b;
            s_aa += a * a;
            s_bb += b * b;
        }
        const double cov = s_ab / reps - (s_a / reps) * (s_b / reps);
        const double va = s_aa / reps - (s_a / reps) * (s_a / reps);
        const double vb = s_bb / reps - (s_b / reps) * (s_b / reps);
        const double corr = cov / std::sqrt(va * vb);
        CHECK(std::fabs(corr) < 5.0 / std::sqrt(double(reps)));
    }

    SUBCASE("N=1 reduces to sample_site") {
        Rng a(77, 2), b(77, 2);
        const ChainState st = sample_chain(LambdaProfile::constant(lam, 1), pot, a);
        const auto [r, p] = sample_site(lam, pot, b);
        CHECK(st.r[0] == r);
        CHECK(st.p[0] == p);
    }
}

TEST_CASE("sampling is deterministic per stream") {
    const auto pot = make_coslattice(0.5);
    const LambdaProfile prof = LambdaProfile::constant({0.5, 0.3, 2.0}, 128);
    Rng a(2024, 5), b(2024, 5), c(2024, 6);
    const ChainState s1 = sample_chain(prof, pot, a);
    const ChainState s2 = sample_chain(prof, pot, b);
    const ChainState s3 = sample_chain(prof, pot, c);
    CHECK(s1.r == s2.r);
    CHECK(s1.p == s2.p);
    CHECK(s1.r != s3.r);  // different stream, different draw
}

TEST_CASE("log_density_site: value, normalization, shift identity") {
    const auto pot = make_harmonic();
    CHECK(log_density_site({0, 0, 1}, 0.0, 0.0, pot) ==
          doctest::Approx(-std::log(2.0 * M_PI)).epsilon(1e-11));

    // integrates to 1: quadrature of exp(log_density) with the p-part
    // integrated out analytically
    const auto cpot = make_coslattice(0.5);
    const Lambda lam{0.4, -0.2, 1.3};
    const RWindow w = r_marginal_window(lam, cpot);
    auto integrand = [&](double r, double* out) {
        const double log_r_part = lam.l1 * r - lam.l3 * cpot.eval(r) -
                                  partition_log(lam, cpot) +
                                  0.5 * std::log(2.0 * M_PI / lam.l3) +
                                  0.5 * lam.l2 * lam.l2 / lam.l3;
        out[0] = std::exp(log_r_part);
    };
    const auto q = AdaptiveGL::integrate(integrand, 1, w.lo, w.hi, 1e-12);
    CHECK(q.value[0] == doctest::Approx(1.0).epsilon(1e-8));

    // shift identity: log f(r,p) - log f(r,-p) = 2 l2 p
    CHECK(log_density_site(lam, 0.3, 0.8, cpot) -
              log_density_site(lam, 0.3, -0.8, cpot) ==
          doctest::Approx(2.0 * lam.l2 * 0.8).epsilon(1e-12));
}

TEST_CASE("lambda profile from a macroscopic profile reproduces the states") {
    const auto pot = make_coslattice(0.5);
    auto u_of_x = [&](double x) {
        const Lambda lam{0.5 + 0.3 * x, 0.1 * x, 1.0 + 0.5 * x};
        return grad_theta(lam, pot);
    };
    const auto prof = LambdaProfile::from_macro(u_of_x, 16, pot);
    for (int i = 1; i <= 16; ++i) {
        const MacroState want = u_of_x(double(i) / 16);
        const MacroState got = grad_theta(prof.values[i - 1], pot);
        CHECK(got.r_bar == doctest::Approx(want.r_bar).epsilon(1e-8));
        CHECK(got.p_bar == doctest::Approx(want.p_bar).epsilon(1e-8));
        CHECK(got.e_tot == doctest::Approx(want.e_tot).epsilon(1e-8));
    }
}

TEST_CASE("antithetic pairs: exact marginals, strong pair-mean cancellation") {
    const auto pot = make_coslattice(0.5);
    const Lambda lam{1.0, 0.0, 1.0};
    const LambdaProfile prof = LambdaProfile::constant(lam, 2048);
    const SiteMoments m = site_moments(lam, pot);

    Rng rng(31, 9);
    auto [a, b] = sample_chain_pair(prof, pot, rng);

    // each member alone must carry the right marginal
    const auto ma = oracles::mean_var(a.r);
    const auto mb = oracles::mean_var(b.r);
    CHECK(std::fabs(ma.mean - m.mean_r) < 5.0 * std::sqrt(m.var_r / 2048.0));
    CHECK(std::fabs(mb.mean - m.mean_r) < 5.0 * std::sqrt(m.var_r / 2048.0));
    CHECK(std::fabs(ma.var - m.var_r) < 0.15 * m.var_r);

    // momenta cancel exactly; the stretch pair means collapse most of the
    // fluctuation (the r-marginal is nearly symmetric)
    for (std::size_t i = 0; i < 64; ++i)
        CHECK(a.p[i] + b.p[i] == doctest::Approx(2.0 * m.mean_p).epsilon(1e-12));
    std::vector<double> pair_mean(a.r.size());
    for (std::size_t i = 0; i < a.r.size(); ++i)
        pair_mean[i] = 0.5 * (a.r[i] + b.r[i]);
    const auto mpair = oracles::mean_var(pair_mean);
    CHECK(mpair.var < 0.05 * m.var_r);
}

TEST_CASE("quantile sampler matches the rejection sampler distribution") {
    const auto pot = make_coslattice(0.5);
    const Lambda lam{0.8, 0.0, 1.5};
    RQuantile q(lam, pot);
    Rng rng(17, 4);
    const int n = 60000;
    std::vector<double> via_q(n), via_rej(n);
    for (int i = 0; i < n; ++i) via_q[i] = q(rng.uniform());
    for (int i = 0; i < n; ++i) via_rej[i] = sample_site(lam, pot, rng).first;
    const double d = oracles::ks_two_sample(via_q, via_rej);
    CHECK(d < oracles::ks_two_sample_crit_1pct(n, n));
}
