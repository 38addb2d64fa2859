#include "chainflow/ensemble.hpp"

#include <atomic>
#include <thread>

namespace chainflow {

bool EnsembleResult::all_ok() const {
    for (const auto& s : status)
        if (!s.ok) return false;
    return true;
}

EnsembleResult run_ensemble(const ExperimentConfig& cfg, int n_sites,
                            const Potential& pot, const TensionSchedule& sched,
                            const MacroProfile& profile) {
    const int members = cfg.ensemble_size;
    EnsembleResult result;
    result.antithetic = cfg.antithetic;
    result.n_sites = n_sites;
    result.logs.resize(members);
    result.status.resize(members);

    const LambdaProfile lam_profile = lambda_profile_from(profile, n_sites, pot);

    SimConfig sim;
    sim.n_sites = n_sites;
    sim.gamma = cfg.gamma;
    sim.dt_micro = cfg.dt_micro;
    sim.t_macro = cfg.t_macro;
    sim.snapshot_times = cfg.snapshot_times;

    auto run_member = [&](int m, ChainState init) {
        try {
            Rng dyn(cfg.seed, 4ull * (cfg.antithetic ? (m / 2) * 2 : m));
            ObservationLog log = simulate(std::move(init), sim, sched, pot, dyn);
            const auto residuals = conserved_balance(log);
            MemberStatus st;
            st.n_swaps = log.snapshots.back().n_swaps;
            if (!residuals.empty()) {
                st.res_r = residuals.back().res_r;
                st.res_p = residuals.back().res_p;
                st.res_e = residuals.back().res_e;
            }
            result.logs[m] = std::move(log);
            result.status[m] = std::move(st);
        } catch (const std::exception& e) {
            result.status[m].ok = false;
            result.status[m].error = e.what();
        }
    };

    // Work units: members, or antithetic pairs (which share streams).
    const int units = cfg.antithetic ? members / 2 : members;
    std::atomic<int> next_unit{0};
    int workers = cfg.workers > 0 ? cfg.workers
                                  : int(std::thread::hardware_concurrency());
    workers = std::max(1, std::min(workers, units));

    auto worker_loop = [&] {
        while (true) {
            const int u = next_unit.fetch_add(1);
            if (u >= units) return;
            if (cfg.antithetic) {
                Rng init_rng(cfg.seed, 4ull * (2 * u) + 1);
                auto pair = sample_chain_pair(lam_profile, pot, init_rng);
                run_member(2 * u, std::move(pair.first));
                run_member(2 * u + 1, std::move(pair.second));
            } else {
                Rng init_rng(cfg.seed, 4ull * u + 1);
                ChainState init = sample_chain(lam_profile, pot, init_rng);
                run_member(u, std::move(init));
            }
        }
    };

    if (workers == 1) {
        worker_loop();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker_loop);
        for (auto& t : pool) t.join();
    }
    return result;
}

}  // namespace chainflow
