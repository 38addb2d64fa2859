#include "chainflow/chain.hpp"

#include <algorithm>
#include <cmath>

#include "chainflow/kernels.hpp"

namespace chainflow {

TensionSchedule TensionSchedule::constant(double tau0) {
    return TensionSchedule{[tau0](double) { return tau0; },
                           [](double) { return 0.0; },
                           [](double) { return 0.0; }};
}

TensionSchedule TensionSchedule::from_function(std::function<double(double)> tau0) {
    auto d1 = [tau0](double t) {
        const double h = 1e-4 * std::max(1.0, std::fabs(t));
        // 5-point stencil
        return (-tau0(t + 2 * h) + 8 * tau0(t + h) - 8 * tau0(t - h) + tau0(t - 2 * h)) /
               (12.0 * h);
    };
    auto d2 = [tau0](double t) {
        const double h = 2e-4 * std::max(1.0, std::fabs(t));
        return (-tau0(t + 2 * h) + 16 * tau0(t + h) - 30 * tau0(t) + 16 * tau0(t - h) -
                tau0(t - 2 * h)) /
               (12.0 * h * h);
    };
    return TensionSchedule{std::move(tau0), d1, d2};
}

std::pair<std::vector<double>, std::vector<double>> drift(const ChainState& state,
                                                          double tau_now,
                                                          const Potential& pot) {
    const std::size_t n = state.size();
    std::vector<double> dr(n), dp(n), f(n);
    kernels::force(pot, state.r.data(), f.data(), n);
    dr[0] = state.p[0];
    for (std::size_t i = 1; i < n; ++i) dr[i] = state.p[i] - state.p[i - 1];
    for (std::size_t i = 0; i + 1 < n; ++i) dp[i] = f[i + 1] - f[i];
    dp[n - 1] = tau_now - f[n - 1];
    return {std::move(dr), std::move(dp)};
}

namespace {

// Integrator with the force array cached across steps; momentum swaps leave
// r untouched so the cache survives events.
class Stepper {
public:
    Stepper(ChainState& st, const Potential& pot) : st_(st), pot_(pot), f_(st.size()) {
        kernels::force(pot_, st_.r.data(), f_.data(), st_.size());
    }

    // One Verlet step of length h with boundary tension evaluated at the
    // half-step time; accumulates the three balance integrals with the same
    // rule the integrator uses.
    void step(double h, double tau_half) {
        const std::size_t n = st_.size();
        double* r = st_.r.data();
        double* p = st_.p.data();
        const double half = 0.5 * h;

        const double f1_pre = f_[0];
        kernels::kick(p, f_.data(), tau_half, half, n);
        const double p_half_last = p[n - 1];
        st_.work_accum += h * tau_half * p_half_last;
        st_.boundary_flow_r += h * p_half_last;
        kernels::drift(r, p, h, n);
        kernels::force(pot_, r, f_.data(), n);
        kernels::kick(p, f_.data(), tau_half, half, n);
        st_.boundary_flow_p += half * ((tau_half - f1_pre) + (tau_half - f_[0]));
        st_.t_micro += h;
    }

    void check_finite() const {
        for (double x : st_.r)
            if (!std::isfinite(x)) throw NonFinite("chain stretch left the FP range");
        for (double x : st_.p)
            if (!std::isfinite(x)) throw NonFinite("chain momentum left the FP range");
    }

private:
    ChainState& st_;
    const Potential& pot_;
    std::vector<double> f_;
};

struct ChainAccum {
    double boundary_flow_r = 0.0;
    double boundary_flow_p = 0.0;
};

}  // namespace

void step_hamiltonian(ChainState& state, double dt,
                      const std::function<double(double)>& tau_of_t,
                      const Potential& pot) {
    Stepper stepper(state, pot);
    stepper.step(dt, tau_of_t(state.t_micro + 0.5 * dt));
    stepper.check_finite();
}

void swap_bond(ChainState& state, int bond) {
    const int n = static_cast<int>(state.size());
    if (bond < 1 || bond > n - 1)
        throw std::out_of_range("swap_bond: bond index outside 1..N-1");
    std::swap(state.p[bond - 1], state.p[bond]);
    ++state.n_swaps;
}

double default_dt(const Potential& pot) {
    return 1e-3 / std::sqrt(std::max(pot.curvature_sup(), 1e-12));
}

ObservationLog simulate(ChainState init, const SimConfig& cfg,
                        const TensionSchedule& sched, const Potential& pot, Rng& rng,
                        const std::function<void(const Snapshot&)>& observer) {
    const int n = cfg.n_sites;
    if (n <= 0 || init.size() != static_cast<std::size_t>(n))
        throw std::invalid_argument("simulate: state size does not match config");
    const double dt = cfg.dt_micro > 0.0 ? cfg.dt_micro : default_dt(pot);
    const double t_end = double(n) * cfg.t_macro;

    std::vector<double> snaps = cfg.snapshot_times;
    snaps.push_back(0.0);  // always record the baseline
    std::sort(snaps.begin(), snaps.end());
    snaps.erase(std::unique(snaps.begin(), snaps.end()), snaps.end());
    if (snaps.back() < cfg.t_macro) snaps.push_back(cfg.t_macro);

    ChainState& st = init;
    st.t_micro = 0.0;
    Stepper stepper(st, pot);

    ObservationLog log;
    auto record = [&](double t_macro) {
        Snapshot s;
        s.t_macro = t_macro;
        s.r = st.r;
        s.p = st.p;
        double sr = 0.0, sp = 0.0;
        for (double x : st.r) sr += x;
        for (double x : st.p) sp += x;
        s.sum_r = sr;
        s.sum_p = sp;
        s.energy = kernels::total_energy(pot, st.r.data(), st.p.data(), st.size());
        s.work_accum = st.work_accum;
        s.boundary_flow_r = st.boundary_flow_r;
        s.boundary_flow_p = st.boundary_flow_p;
        s.n_swaps = st.n_swaps;
        if (observer) observer(s);
        log.snapshots.push_back(std::move(s));
    };

    const double rate = cfg.gamma * double(n - 1);
    double next_event = rate > 0.0 ? rng.exponential() / rate : HUGE_VAL;

    auto tau_at = [&](double t_micro) { return sched.tau(t_micro / double(n)); };

    if (snaps.front() == 0.0) record(0.0);
    std::size_t snap_idx = (snaps.front() == 0.0) ? 1 : 0;

    long steps_since_check = 0;
    while (snap_idx < snaps.size()) {
        const double t_snap = std::min(double(n) * snaps[snap_idx], t_end);
        // Advance to the earlier of the next swap event and the snapshot,
        // splitting Verlet steps exactly at event times.
        while (true) {
            const double t_block = std::min(next_event, t_snap);
            while (st.t_micro < t_block) {
                const double h = std::min(dt, t_block - st.t_micro);
                stepper.step(h, tau_at(st.t_micro + 0.5 * h));
                if (++steps_since_check >= 4096) {
                    stepper.check_finite();
                    steps_since_check = 0;
                }
            }
            st.t_micro = t_block;
            if (t_block == t_snap && t_snap <= next_event) break;
            const int bond = 1 + static_cast<int>(rng.below(std::uint64_t(n - 1)));
            swap_bond(st, bond);
            next_event = st.t_micro + rng.exponential() / rate;
        }
        stepper.check_finite();
        record(snaps[snap_idx]);
        ++snap_idx;
    }
    return log;
}

std::vector<BalanceResidual> conserved_balance(const ObservationLog& log) {
    std::vector<BalanceResidual> out;
    if (log.snapshots.empty()) return out;
    const Snapshot& s0 = log.snapshots.front();
    for (const Snapshot& s : log.snapshots) {
        BalanceResidual r;
        r.t_macro = s.t_macro;
        r.res_r = std::fabs((s.sum_r - s0.sum_r) - (s.boundary_flow_r - s0.boundary_flow_r));
        r.res_p = std::fabs((s.sum_p - s0.sum_p) - (s.boundary_flow_p - s0.boundary_flow_p));
        r.res_e = std::fabs((s.energy - s0.energy) - (s.work_accum - s0.work_accum));
        out.push_back(r);
    }
    return out;
}

}  // namespace chainflow
