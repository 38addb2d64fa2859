#include <doctest.h>

#include <cmath>

#include "chainflow/rng.hpp"
#include "chainflow/thermo.hpp"
#include "oracles.hpp"

using namespace chainflow;

namespace {

const double kLog2Pi = std::log(2.0 * M_PI);

// Harmonic closed forms: Theta = log 2pi - log l3 + (l1^2 + l2^2)/(2 l3),
// u = (l1/l3, l2/l3, -(1/l3 + (tau^2 + v^2)/2)), Phi = -1 - log 2pi + log beta.
double harmonic_theta(const Lambda& l) {
    return kLog2Pi - std::log(l.l3) + 0.5 * (l.l1 * l.l1 + l.l2 * l.l2) / l.l3;
}

MacroState harmonic_grad(const Lambda& l) {
    const double tau = l.l1 / l.l3, v = l.l2 / l.l3;
    return MacroState{tau, v, 1.0 / l.l3 + 0.5 * (tau * tau + v * v)};
}

}  // namespace

TEST_CASE("potential validation") {
    CHECK(validate_potential(make_harmonic()).ok);
    CHECK(validate_potential(make_coslattice(0.5)).ok);
    const auto fpu = make_fpu(1.0);
    CHECK_FALSE(fpu.curvature_bound_ok);
    CHECK(validate_potential(fpu).ok);  // positivity/growth/FD still hold

    // a potential lying about its derivative must be caught
    auto bad = make_custom(
        "bad", [](double r) { return 0.5 * r * r; }, [](double r) { return 2.0 * r; },
        [](double) { return 1.0; });
    CHECK_FALSE(validate_potential(bad).ok);
}

TEST_CASE("partition_log: harmonic closed forms") {
    const auto pot = make_harmonic();
    CHECK(partition_log({0, 0, 1}, pot) == doctest::Approx(kLog2Pi).epsilon(1e-12));
    CHECK(partition_log({1, 0, 1}, pot) ==
          doctest::Approx(kLog2Pi + 0.5).epsilon(1e-12));
    CHECK(partition_log({1, 2, 2}, pot) ==
          doctest::Approx(kLog2Pi - std::log(2.0) + 1.25).epsilon(1e-12));
    CHECK_THROWS_AS(partition_log({0, 0, -1}, pot), ThermoError);
}

TEST_CASE("grad_theta: harmonic closed forms and odd symmetry") {
    const auto pot = make_harmonic();
    auto u = grad_theta({0, 0, 1}, pot);
    CHECK(u.r_bar == doctest::Approx(0.0).epsilon(1e-10));
    CHECK(u.p_bar == 0.0);
    CHECK(u.e_tot == doctest::Approx(1.0).epsilon(1e-10));
    u = grad_theta({1, 0, 1}, pot);
    CHECK(u.r_bar == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(u.e_tot == doctest::Approx(1.5).epsilon(1e-10));

    // p-marginal symmetry holds for any potential at l2 = 0
    const auto cpot = make_coslattice(0.5);
    CHECK(grad_theta({0.3, 0, 2.0}, cpot).p_bar == 0.0);
}

TEST_CASE("hessian_theta matches the finite-difference Hessian") {
    const auto pots = {make_harmonic(), make_coslattice(0.5)};
    for (const auto& pot : pots) {
        for (const Lambda lam : {Lambda{0, 0, 1}, Lambda{0.8, -0.4, 2.2}}) {
            const Mat3 h = hessian_theta(lam, pot);
            const Mat3 fd = oracles::fd_hessian_theta(lam, pot);
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j)
                    CHECK(h(i, j) ==
                          doctest::Approx(fd(i, j)).epsilon(1e-5).scale(1.0));
        }
    }
    // harmonic Var(r) = 1/l3
    CHECK(hessian_theta({0, 0, 1}, make_harmonic())(0, 0) ==
          doctest::Approx(1.0).epsilon(1e-10));
    // positive definite: Cholesky must not throw
    const Mat3 h = hessian_theta({1.0, 0.5, 0.7}, make_coslattice(0.3));
    CHECK_NOTHROW(solve_spd3(h, {1.0, 1.0, 1.0}));
}

TEST_CASE("duality roundtrip on the acceptance grid") {
    for (const auto& pot : {make_harmonic(), make_coslattice(0.5)}) {
        for (double tau : {-2.0, -1.0, 0.0, 1.0, 2.0})
            for (double v : {-1.0, 0.0, 1.0})
                for (double beta : {0.25, 0.5, 1.0, 2.0, 4.0}) {
                    const Lambda lam{tau * beta, v * beta, beta};
                    const MacroState u = grad_theta(lam, pot);
                    const Lambda back = invert_to_lambda(u, pot);
                    CHECK(std::fabs(back.l1 - lam.l1) < 1e-8);
                    CHECK(std::fabs(back.l2 - lam.l2) < 1e-8);
                    CHECK(std::fabs(back.l3 - lam.l3) < 1e-8);
                }
    }
}

TEST_CASE("invert_to_lambda rejects inadmissible states") {
    const auto pot = make_harmonic();
    // e_int = r^2/2 is the zero-temperature floor
    CHECK_THROWS_AS(invert_to_lambda(MacroState{1.0, 0.0, 0.5}, pot), ThermoError);
    CHECK_THROWS_AS(invert_to_lambda(MacroState{0.0, 0.0, -1.0}, pot), ThermoError);
}

TEST_CASE("legendre_phi: harmonic values, Fenchel-Young") {
    const auto pot = make_harmonic();
    CHECK(legendre_phi(MacroState{0, 0, 1}, pot) ==
          doctest::Approx(-kLog2Pi - 1.0).epsilon(1e-10));
    // Phi(r,0,-e) = -1 - log 2pi + log beta with beta = 1/(e - r^2/2)
    CHECK(legendre_phi(MacroState{1, 0, 1.5}, pot) ==
          doctest::Approx(-kLog2Pi - 1.0).epsilon(1e-10));
    CHECK(legendre_phi(MacroState{0.5, 0, 2.0}, pot) ==
          doctest::Approx(-kLog2Pi - 1.0 + std::log(1.0 / (2.0 - 0.125)))
              .epsilon(1e-10));

    // Fenchel-Young: Phi(u) + Theta(l) - l.u >= 0 on random pairs
    const auto cpot = make_coslattice(0.5);
    Rng rng(7, 0);
    for (int it = 0; it < 20; ++it) {
        const Lambda probe{2.0 * rng.uniform() - 1.0, rng.uniform() - 0.5,
                           0.3 + 2.0 * rng.uniform()};
        const Lambda state_lam{2.0 * rng.uniform() - 1.0, rng.uniform() - 0.5,
                               0.3 + 2.0 * rng.uniform()};
        const MacroState u = grad_theta(state_lam, cpot);
        const double gap =
            legendre_phi(u, cpot) + partition_log(probe, cpot) - lambda_dot_u(probe, u);
        CHECK(gap >= -1e-10);
    }
}

TEST_CASE("gaussian factorization of the p-marginal") {
    const auto pot = make_coslattice(0.5);
    for (const Lambda lam : {Lambda{0.4, 0.9, 1.3}, Lambda{-0.7, -1.1, 0.6}}) {
        const double with_p = partition_log(lam, pot);
        const double without_p = partition_log({lam.l1, 0.0, lam.l3}, pot);
        CHECK(with_p - without_p ==
              doctest::Approx(0.5 * lam.l2 * lam.l2 / lam.l3).epsilon(1e-11));
    }
}

TEST_CASE("tension: harmonic closed form and dual quadrature routes") {
    const auto pot = make_harmonic();
    CHECK(tension(1.0, 1.5, pot) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(tension(0.0, 1.0, pot) == doctest::Approx(0.0).scale(1.0).epsilon(1e-9));

    // Two independent routes: l1/l3 of the inverted state vs E[V'] quadrature.
    const auto cpot = make_coslattice(0.5);
    const double p1 = tension(0.3, 1.0, cpot);
    const Lambda lam = invert_to_lambda(MacroState{0.3, 0.0, 1.0}, cpot);
    const double p2 = site_moments(lam, cpot).mean_dV;
    CHECK(p1 == doctest::Approx(p2).epsilon(1e-8));
    // The integration-by-parts identity E[V'] = l1/l3 must hold exactly.
    CHECK(p2 == doctest::Approx(lam.l1 / lam.l3).epsilon(1e-8));
}

TEST_CASE("tension and entropy are Galilean invariant") {
    const auto pot = make_coslattice(0.5);
    const double r = 0.4, e = 1.1;
    const Lambda lam = invert_to_lambda(MacroState{r, 0.0, e}, pot);
    for (double v : {-0.7, 0.5, 1.3}) {
        const MacroState moving{r, v, e + 0.5 * v * v};
        const Lambda lam_m = invert_to_lambda(moving, pot);
        CHECK(lam_m.l1 / lam_m.l3 ==
              doctest::Approx(lam.l1 / lam.l3).epsilon(1e-9));
        CHECK(lam_m.l3 == doctest::Approx(lam.l3).epsilon(1e-9));
        CHECK(lam_m.l2 / lam_m.l3 == doctest::Approx(v).epsilon(1e-9));
    }
}

TEST_CASE("sound_speed: harmonic c = 1 and the isentrope-tracer oracle") {
    const auto pot = make_harmonic();
    CHECK(sound_speed(1.0, 1.5, pot) == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(sound_speed(0.3, 0.9, pot) == doctest::Approx(1.0).epsilon(1e-8));

    const auto cpot = make_coslattice(0.5);
    const double c = sound_speed(0.0, 1.0, cpot);
    const double c2_traced = oracles::isentrope_sound_speed2(0.0, 1.0, cpot);
    CHECK(c * c == doctest::Approx(c2_traced).epsilon(2e-5));

    // strict hyperbolicity across a state grid
    for (double r : {-0.5, 0.0, 0.7})
        for (double e : {0.6, 1.0, 2.0})
            CHECK(sound_speed(r, e + cpot.eval(r), cpot) > 0.0);
}

TEST_CASE("entropy: value, ds/de = beta, ds/dr = -beta P") {
    const auto pot = make_harmonic();
    CHECK(entropy(0.0, 1.0, pot) == doctest::Approx(kLog2Pi + 1.0).epsilon(1e-10));

    const double h = 1e-6;
    const double dsde = (entropy(1.0, 1.5 + h, pot) - entropy(1.0, 1.5 - h, pot)) / (2 * h);
    CHECK(dsde == doctest::Approx(1.0).epsilon(1e-5));  // beta = 1 there

    // Gibbs relation in the tension sign convention: ds/dr = -beta P.
    const double dsdr = (entropy(1.0 + h, 1.5, pot) - entropy(1.0 - h, 1.5, pot)) / (2 * h);
    CHECK(dsdr == doctest::Approx(-1.0).epsilon(1e-5));  // beta P = 1

    const auto cpot = make_coslattice(0.5);
    const Lambda lam = invert_to_lambda(MacroState{0.4, 0.0, 1.2}, cpot);
    const double dsde2 =
        (entropy(0.4, 1.2 + h, cpot) - entropy(0.4, 1.2 - h, cpot)) / (2 * h);
    CHECK(dsde2 == doctest::Approx(lam.l3).epsilon(1e-5));
}

TEST_CASE("rate_function: zero at the mean, positive elsewhere") {
    const auto pot = make_coslattice(0.5);
    const Lambda lam{0.5, 0.2, 1.4};
    const MacroState u = grad_theta(lam, pot);
    CHECK(rate_function(u, lam, pot) == doctest::Approx(0.0).scale(1.0).epsilon(1e-9));

    // spec value: harmonic, lambda = (0,0,1), x = (1, 0, -1.5) -> 1/2
    CHECK(rate_function(MacroState{1, 0, 1.5}, Lambda{0, 0, 1}, make_harmonic()) ==
          doctest::Approx(0.5).epsilon(1e-10));

    Rng rng(11, 0);
    for (int it = 0; it < 10; ++it) {
        const Lambda other{rng.uniform() - 0.5, rng.uniform() - 0.5,
                           0.5 + rng.uniform()};
        const MacroState x = grad_theta(other, pot);
        const double i = rate_function(x, lam, pot);
        const bool same = std::fabs(other.l1 - lam.l1) + std::fabs(other.l2 - lam.l2) +
                              std::fabs(other.l3 - lam.l3) <
                          1e-12;
        if (!same) CHECK(i > 0.0);
    }
}

TEST_CASE("quadrature window covers the mass") {
    const auto pot = make_coslattice(0.5);
    const RWindow w = r_marginal_window({0.7, 0.0, 2.0}, pot);
    CHECK(w.lo < w.mode);
    CHECK(w.hi > w.mode);
    // integrand decayed below 1e-16 of the mode at both ends
    auto phi = [&](double r) { return 0.7 * r - 2.0 * pot.eval(r); };
    CHECK(phi(w.lo) - w.phi_mode <= std::log(1e-16) + 1e-9);
    CHECK(phi(w.hi) - w.phi_mode <= std::log(1e-16) + 1e-9);
}
