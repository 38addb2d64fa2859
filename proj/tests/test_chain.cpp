#include <doctest.h>

#include <cmath>

#include "chainflow/chain.hpp"
#include "chainflow/kernels.hpp"
#include "oracles.hpp"

using namespace chainflow;

namespace {

ChainState make_state(std::vector<double> r, std::vector<double> p) {
    ChainState st;
    st.r = std::move(r);
    st.p = std::move(p);
    return st;
}

ChainState random_state(int n, std::uint64_t stream) {
    Rng rng(555, stream);
    ChainState st;
    st.r.resize(n);
    st.p.resize(n);
    for (auto& x : st.r) x = 2.0 * rng.uniform() - 1.0;
    for (auto& x : st.p) x = 2.0 * rng.uniform() - 1.0;
    return st;
}

}  // namespace

TEST_CASE("drift: hand values and the telescoping momentum sum") {
    const auto pot = make_harmonic();

    // N=2 at rest length: only the boundary pull acts
    auto [dr2, dp2] = drift(make_state({0, 0}, {0, 0}), 1.0, pot);
    CHECK(dr2 == std::vector<double>{0, 0});
    CHECK(dp2 == std::vector<double>{0, 1});

    // N=3 hand evaluation
    auto [dr3, dp3] = drift(make_state({1, 0, 0}, {0, 0, 0}), 0.0, pot);
    CHECK(dp3[0] == doctest::Approx(-1.0));
    CHECK(dp3[1] == doctest::Approx(0.0));
    CHECK(dp3[2] == doctest::Approx(0.0));

    // sum of dp telescopes to tau - V'(r_1)
    const auto cpot = make_coslattice(0.5);
    const ChainState st = random_state(33, 1);
    const double tau = 0.37;
    auto [dr, dp] = drift(st, tau, cpot);
    double sum_dp = 0.0;
    for (double x : dp) sum_dp += x;
    CHECK(sum_dp == doctest::Approx(tau - cpot.deriv(st.r[0])).epsilon(1e-12));
    // dr_i = p_i - p_{i-1} with the wall
    CHECK(dr[0] == st.p[0]);
    CHECK(dr[5] == st.p[5] - st.p[4]);
}

TEST_CASE("swap_bond: definition, involution, bitwise conservation") {
    const auto pot = make_coslattice(0.5);
    ChainState st = make_state({0.1, -0.2, 0.3}, {1, 2, 3});
    swap_bond(st, 1);
    CHECK(st.p == std::vector<double>{2, 1, 3});
    swap_bond(st, 1);
    CHECK(st.p == std::vector<double>{1, 2, 3});
    CHECK(st.n_swaps == 2);
    CHECK_THROWS_AS(swap_bond(st, 3), std::out_of_range);
    CHECK_THROWS_AS(swap_bond(st, 0), std::out_of_range);

    // A swap permutes the p array bitwise and leaves r alone, so the kinetic
    // and potential term multisets are unchanged: permutation-invariant sums
    // of both must be bitwise identical.
    ChainState big = random_state(257, 2);
    auto kinetic_terms = [&] {
        std::vector<double> k(big.size());
        for (std::size_t i = 0; i < big.size(); ++i) k[i] = 0.5 * big.p[i] * big.p[i];
        return k;
    };
    auto potential_terms = [&] {
        std::vector<double> v(big.size());
        for (std::size_t i = 0; i < big.size(); ++i) v[i] = pot.eval(big.r[i]);
        return v;
    };
    const double h_before =
        oracles::sorted_sum(kinetic_terms()) + oracles::sorted_sum(potential_terms());
    const double p_before = oracles::sorted_sum(big.p);
    const double r_before = oracles::sorted_sum(big.r);
    Rng rng(1, 1);
    for (int it = 0; it < 500; ++it) {
        swap_bond(big, 1 + int(rng.below(big.size() - 1)));
        CHECK(oracles::sorted_sum(kinetic_terms()) +
                  oracles::sorted_sum(potential_terms()) ==
              h_before);
    }
    CHECK(oracles::sorted_sum(big.p) == p_before);
    CHECK(oracles::sorted_sum(big.r) == r_before);
}

TEST_CASE("step_hamiltonian: single oscillator period and reversibility") {
    const auto pot = make_harmonic();
    auto tau0 = [](double) { return 0.0; };

    SUBCASE("r(t) = cos t returns to (1,0) after 2 pi at second order") {
        double errs[2];
        int idx = 0;
        for (double dt : {2e-3, 1e-3}) {
            ChainState st = make_state({1.0}, {0.0});
            const long steps = std::lround(2.0 * M_PI / dt);
            const double h = 2.0 * M_PI / double(steps);
            for (long s = 0; s < steps; ++s) step_hamiltonian(st, h, tau0, pot);
            errs[idx++] = std::hypot(st.r[0] - 1.0, st.p[0]);
        }
        CHECK(errs[0] < 1e-4);
        CHECK(errs[0] / errs[1] == doctest::Approx(4.0).epsilon(0.15));
    }

    SUBCASE("a step followed by its reverse returns the state") {
        const auto cpot = make_coslattice(0.5);
        ChainState st = random_state(64, 3);
        const ChainState orig = st;
        auto tauc = [](double) { return 0.8; };
        step_hamiltonian(st, 1e-3, tauc, cpot);
        step_hamiltonian(st, -1e-3, tauc, cpot);
        for (std::size_t i = 0; i < st.size(); ++i) {
            CHECK(st.r[i] == doctest::Approx(orig.r[i]).epsilon(1e-12));
            CHECK(st.p[i] == doctest::Approx(orig.p[i]).epsilon(1e-12));
        }
    }
}

TEST_CASE("simulate: energy balance order under dt halving") {
    const auto pot = make_coslattice(0.5);
    const TensionSchedule sched =
        TensionSchedule::from_function([](double t) { return 1.0 + 0.2 * std::sin(t); });

    SimConfig cfg;
    cfg.n_sites = 16;
    cfg.gamma = 1.0;
    cfg.t_macro = 0.1;
    cfg.snapshot_times = {0.1};

    double res[3];
    int idx = 0;
    for (double dt : {2e-3, 1e-3, 5e-4}) {
        cfg.dt_micro = dt;
        Rng rng(9, 0);  // same event stream at all dt levels
        ChainState init = random_state(cfg.n_sites, 4);
        const ObservationLog log = simulate(init, cfg, sched, pot, rng);
        res[idx++] = conserved_balance(log).back().res_e;
    }
    CHECK(res[0] / res[1] == doctest::Approx(4.0).epsilon(0.15));
    CHECK(res[1] / res[2] == doctest::Approx(4.0).epsilon(0.15));
}

TEST_CASE("simulate: stretch and momentum balances hold to roundoff") {
    const auto pot = make_coslattice(0.5);
    const TensionSchedule sched = TensionSchedule::constant(0.7);
    SimConfig cfg;
    cfg.n_sites = 32;
    cfg.gamma = 2.0;
    cfg.dt_micro = 1e-3;
    cfg.t_macro = 0.2;
    cfg.snapshot_times = {0.1, 0.2};
    Rng rng(10, 0);
    ChainState init = random_state(cfg.n_sites, 5);
    const ObservationLog log = simulate(init, cfg, sched, pot, rng);
    for (const auto& res : conserved_balance(log)) {
        CHECK(res.res_r < 1e-10);
        CHECK(res.res_p < 1e-10);
    }
    // a chain at rest under zero tension stays put
    SimConfig still = cfg;
    still.gamma = 0.0;
    Rng rng2(11, 0);
    ChainState quiet = make_state(std::vector<double>(32, 0.0),
                                  std::vector<double>(32, 0.0));
    const ObservationLog log2 =
        simulate(quiet, still, TensionSchedule::constant(0.0), pot, rng2);
    const auto res2 = conserved_balance(log2).back();
    CHECK(res2.res_r == 0.0);
    CHECK(res2.res_p == 0.0);
    CHECK(res2.res_e == 0.0);
}

TEST_CASE("simulate: swap counts are Poisson, gaps exponential") {
    const auto pot = make_harmonic();
    const TensionSchedule sched = TensionSchedule::constant(0.5);
    SimConfig cfg;
    cfg.n_sites = 24;
    cfg.gamma = 1.5;
    cfg.dt_micro = 2e-3;
    cfg.t_macro = 0.25;  // micro horizon 6.0, rate 34.5 -> mu = 207
    cfg.snapshot_times = {0.25};

    const double rate = cfg.gamma * (cfg.n_sites - 1);
    const double mu = rate * cfg.n_sites * cfg.t_macro;
    std::vector<std::uint64_t> counts;
    for (int m = 0; m < 400; ++m) {
        Rng rng(77, 100 + m);
        Rng init_rng(77, 5000 + m);
        ChainState init =
            sample_chain(LambdaProfile::constant({0.5, 0.0, 1.0}, cfg.n_sites), pot,
                         init_rng);
        const ObservationLog log = simulate(init, cfg, sched, pot, rng);
        counts.push_back(log.snapshots.back().n_swaps);
    }
    const auto chi2 = oracles::poisson_chi2(counts, mu);
    CHECK(chi2.stat < oracles::chi2_crit_1pct(chi2.df));

    // exponential gap test via direct reconstruction of the event times
    Rng gap_rng(3, 0);
    std::vector<double> gaps;
    for (int i = 0; i < 2000; ++i) gaps.push_back(gap_rng.exponential() / rate);
    const double d = oracles::ks_statistic(
        gaps, [&](double x) { return 1.0 - std::exp(-rate * x); });
    CHECK(d < oracles::ks_crit_1pct(gaps.size()));
}

TEST_CASE("simulate: determinism and kernel-ISA agreement") {
    const auto pot = make_coslattice(0.5);
    const TensionSchedule sched = TensionSchedule::constant(1.0);
    SimConfig cfg;
    cfg.n_sites = 64;
    cfg.gamma = 1.0;
    cfg.dt_micro = 1e-3;
    cfg.t_macro = 0.05;
    cfg.snapshot_times = {0.05};

    auto run_once = [&] {
        Rng rng(42, 7);
        Rng init_rng(42, 8);
        ChainState init = sample_chain(
            LambdaProfile::constant({1.0, 0.0, 1.0}, cfg.n_sites), pot, init_rng);
        return simulate(init, cfg, sched, pot, rng);
    };

    const ObservationLog a = run_once();
    const ObservationLog b = run_once();
    CHECK(a.snapshots.back().r == b.snapshots.back().r);
    CHECK(a.snapshots.back().p == b.snapshots.back().p);
    CHECK(a.snapshots.back().n_swaps == b.snapshots.back().n_swaps);

#if defined(CHAINFLOW_HAVE_AVX2)
    if (kernels::supported(kernels::Isa::avx2)) {
        const auto saved = kernels::active();
        kernels::set_active(kernels::Isa::avx2);
        const ObservationLog va = run_once();
        kernels::set_active(kernels::Isa::scalar);
        const ObservationLog vs = run_once();
        kernels::set_active(saved);
        // element-wise kernels are bitwise identical across ISAs, so whole
        // trajectories must agree exactly
        CHECK(va.snapshots.back().r == vs.snapshots.back().r);
        CHECK(va.snapshots.back().p == vs.snapshots.back().p);
    }
#endif
}

TEST_CASE("simulate: equilibrium chain stays in equilibrium (small ensemble)") {
    const auto pot = make_coslattice(0.5);
    const double tau = 1.0, beta = 1.0;
    const TensionSchedule sched = TensionSchedule::constant(tau);
    const Lambda lam{tau * beta, 0.0, beta};
    const MacroState want = grad_theta(lam, pot);

    SimConfig cfg;
    cfg.n_sites = 128;
    cfg.gamma = 1.0;
    cfg.dt_micro = 0.0;  // default
    cfg.t_macro = 0.1;
    cfg.snapshot_times = {0.0, 0.1};

    const int members = 24;
    std::vector<double> r_end, p_end, e_end;
    for (int m = 0; m < members; ++m) {
        Rng rng(88, 2 * m);
        Rng init_rng(88, 2 * m + 1);
        ChainState init = sample_chain(LambdaProfile::constant(lam, cfg.n_sites),
                                       pot, init_rng);
        const ObservationLog log = simulate(init, cfg, sched, pot, rng);
        const Snapshot& s = log.snapshots.back();
        r_end.push_back(s.sum_r / cfg.n_sites);
        p_end.push_back(s.sum_p / cfg.n_sites);
        e_end.push_back(s.energy / cfg.n_sites);
    }
    const auto mr = oracles::mean_var(r_end);
    const auto mp = oracles::mean_var(p_end);
    const auto me = oracles::mean_var(e_end);
    CHECK(std::fabs(mr.mean - want.r_bar) < 4.0 * mr.se + 1e-3);
    CHECK(std::fabs(mp.mean - want.p_bar) < 4.0 * mp.se + 1e-3);
    CHECK(std::fabs(me.mean - want.e_tot) < 4.0 * me.se + 2e-3);
}

TEST_CASE("simulate: non-finite states are reported") {
    const auto pot = make_fpu(1.0);
    SimConfig cfg;
    cfg.n_sites = 4;
    cfg.gamma = 0.0;
    cfg.dt_micro = 10.0;  // absurd step: the quartic force blows up
    cfg.t_macro = 50.0;
    cfg.snapshot_times = {50.0};
    Rng rng(1, 0);
    ChainState init = make_state({3.0, -3.0, 3.0, -3.0}, {1.0, -1.0, 1.0, -1.0});
    CHECK_THROWS_AS((void)simulate(init, cfg, TensionSchedule::constant(0.0), pot, rng),
                    NonFinite);
}
