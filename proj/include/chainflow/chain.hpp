#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "chainflow/gibbs.hpp"
#include "chainflow/potential.hpp"
#include "chainflow/rng.hpp"

namespace chainflow {

class NonFinite : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Boundary tension tau(t) with derivatives for the compatibility checks.
struct TensionSchedule {
    std::function<double(double)> tau;
    std::function<double(double)> dtau;
    std::function<double(double)> d2tau;

    static TensionSchedule constant(double tau0);
    // Derivatives by high-order centered differences of tau.
    static TensionSchedule from_function(std::function<double(double)> tau0);
};

struct SimConfig {
    int n_sites = 0;
    double gamma = 1.0;          // swap rate per bond in microscopic time
    double dt_micro = 0.0;       // 0 -> default 1e-3 / sqrt(sup V'')
    double t_macro = 0.0;        // horizon; microscopic time runs to N * t_macro
    std::vector<double> snapshot_times;  // macroscopic times (t_macro appended if absent)
};

struct Snapshot {
    double t_macro = 0.0;
    std::vector<double> r, p;
    double sum_r = 0.0, sum_p = 0.0, energy = 0.0;
    double work_accum = 0.0;        // integral of tau p_N dt (midpoint rule)
    double boundary_flow_r = 0.0;   // integral of p_N dt
    double boundary_flow_p = 0.0;   // integral of (tau - V'(r_1)) dt
    std::uint64_t n_swaps = 0;
};

struct ObservationLog {
    std::vector<Snapshot> snapshots;
};

// Generator right-hand side (r-dot, p-dot) of the Liouville part at tension
// tau_now; used by tests and the flux identity checks.
std::pair<std::vector<double>, std::vector<double>> drift(const ChainState& state,
                                                          double tau_now,
                                                          const Potential& pot);

// One velocity-Verlet step of length dt; the boundary force is evaluated at
// the half-step time.  tau_of_t takes microscopic time.
void step_hamiltonian(ChainState& state, double dt,
                      const std::function<double(double)>& tau_of_t,
                      const Potential& pot);

// Exchanges p_i and p_{i+1} (bond index 1..N-1), bitwise.
void swap_bond(ChainState& state, int bond);

double default_dt(const Potential& pot);

// Runs the process with generator N G_N from microscopic time 0 to
// N * t_macro.  Swap events form an exact Poisson process of total rate
// gamma (N-1); Verlet steps are split exactly at event times; tau is
// evaluated at macroscopic time t_micro / N.
ObservationLog simulate(ChainState init, const SimConfig& cfg,
                        const TensionSchedule& sched, const Potential& pot, Rng& rng,
                        const std::function<void(const Snapshot&)>& observer = {});

struct BalanceResidual {
    double t_macro = 0.0;
    double res_r = 0.0;  // |delta sum r - int p_N dt|
    double res_p = 0.0;  // |delta sum p - int (tau - V'(r_1)) dt|
    double res_e = 0.0;  // |delta H - int tau p_N dt|
};

std::vector<BalanceResidual> conserved_balance(const ObservationLog& log);

}  // namespace chainflow
