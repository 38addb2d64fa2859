#pragma once

#include <string>
#include <vector>

#include "chainflow/chain.hpp"
#include "chainflow/config.hpp"

namespace chainflow {

struct MemberStatus {
    bool ok = true;
    std::string error;
    std::uint64_t n_swaps = 0;
    double res_r = 0.0, res_p = 0.0, res_e = 0.0;  // final balance residuals
};

struct EnsembleResult {
    std::vector<ObservationLog> logs;  // indexed by member
    std::vector<MemberStatus> status;
    bool antithetic = false;
    int n_sites = 0;

    bool all_ok() const;
};

// Runs cfg.ensemble_size trajectories of length N = n_sites across a worker
// pool.  Stream ids: member m uses dynamics stream 4m and sampling stream
// 4m+1; an antithetic pair (2j, 2j+1) shares the streams of member 2j, the
// odd member taking the mirrored initial draw.  Results are merged by
// member index, so the output is independent of the worker count.
EnsembleResult run_ensemble(const ExperimentConfig& cfg, int n_sites,
                            const Potential& pot, const TensionSchedule& sched,
                            const MacroProfile& profile);

}  // namespace chainflow
