#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "chainflow/chain.hpp"
#include "chainflow/estimators.hpp"
#include "chainflow/gibbs.hpp"
#include "chainflow/pde.hpp"
#include "chainflow/potential.hpp"

namespace chainflow {

struct ConfigError : std::runtime_error {
    ConfigError(std::string field_, const std::string& message)
        : std::runtime_error(field_ + ": " + message), field(std::move(field_)) {}
    std::string field;
};

// One experiment, fully described by one JSON document.
struct ExperimentConfig {
    // potential
    std::string potential_kind = "coslattice";
    double potential_param = 0.5;

    // chain
    std::vector<int> n_list{512};
    double gamma = 1.0;
    double dt_micro = 0.0;  // 0 = default 1e-3 / sqrt(sup V'')
    double t_macro = 0.25;
    std::vector<double> snapshot_times{0.0, 0.125, 0.25};

    // ensemble
    int ensemble_size = 32;
    std::uint64_t seed = 1;
    bool antithetic = false;

    // initial profile: "equilibrium" (constant grad_theta state),
    // "expressions" (whitelisted analytic r/p/E of x), or "csv"
    std::string initial_mode = "equilibrium";
    double initial_tau = 1.0;
    double initial_beta = 1.0;
    double initial_velocity = 0.0;
    std::string initial_r_expr, initial_p_expr, initial_e_expr;
    std::string initial_csv;

    // tension schedule: expression in t, or a constant when expr is empty
    std::string tension_expr;
    double tension_constant = 1.0;

    // pde
    std::vector<int> m_list{128, 256, 512};
    double cfl = 0.4;
    double eos_spacing = 0.01;

    // block estimators
    std::vector<int> k_list{8, 32, 128};
    double b_factor = 20.0;  // cutoff b = b_factor * mean site energy

    // estimator test functions
    std::vector<std::string> j_names{"one", "sine", "parab", "bump"};

    // thermo tabulation grid: lambda = (tau*beta, pbar*beta, beta)
    std::vector<double> thermo_tau{0.0};
    std::vector<double> thermo_pbar{0.0};
    std::vector<double> thermo_beta{1.0};

    std::string out_dir = "out";
    int workers = 0;  // 0 = hardware concurrency
};

ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);
std::string serialize_config(const ExperimentConfig& cfg);

// Throws ConfigError naming the offending field on the first violation.
void validate_config(const ExperimentConfig& cfg);

// FNV-1a of the canonical serialized form.
std::uint64_t config_hash(const ExperimentConfig& cfg);

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b);

// Runtime objects.
Potential potential_from(const ExperimentConfig& cfg);
TensionSchedule schedule_from(const ExperimentConfig& cfg);
MacroProfile profile_from(const ExperimentConfig& cfg, const Potential& pot);
std::vector<TestFunction> test_functions_from(const ExperimentConfig& cfg);

// Lambda profile for sampling; caches the inversion per distinct state so
// constant profiles pay one Newton solve.
LambdaProfile lambda_profile_from(const MacroProfile& prof, int n_sites,
                                  const Potential& pot);

}  // namespace chainflow
