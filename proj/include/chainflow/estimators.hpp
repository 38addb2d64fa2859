#pragma once

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "chainflow/chain.hpp"
#include "chainflow/pde.hpp"
#include "chainflow/potential.hpp"
#include "chainflow/thermo.hpp"

namespace chainflow {

class BlockOutOfRange : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

class TimeMisalignment : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct TestFunction {
    std::string name;
    std::function<double(double)> eval;
    bool compact_support = false;
};

// {1, sin(pi x), x(1-x), normalized bump}
std::vector<TestFunction> default_test_functions();

struct BlockSpec {
    int k = 32;        // window is k+1 sites (k must be even)
    double b = 1e300;  // energy cutoff for the flux truncation
};

// (1/N) sum_i J(i/N) zeta_{alpha,i} with zeta = (r, p, -e).
double empirical_density(const ChainState& state, const Potential& pot,
                         const TestFunction& j, int alpha);

// Mean of zeta over the window |i - l| <= k/2 (site indices are 1-based;
// k even, k/2 < i <= N - k/2).
Vec3 block_average(const ChainState& state, const Potential& pot, int site, int k);

// Microscopic flux J_{b-1,b} for bond b in 1..N+1; b = N+1 is the boundary
// bond (-p_N, -tau, p_N tau).  Satisfies L zeta_i = J_{i-1,i} - J_{i,i+1}.
Vec3 micro_flux(const ChainState& state, const Potential& pot, int bond,
                const TensionSchedule& sched, double t_macro);

// Macroscopic flux in the microscopic orientation, i.e. the nu_lambda
// expectation of the bond flux: (-p, -P(r,e), p P(r,e)).  States at the
// zero-temperature floor (e -> V(r)) use the cold tension P = V'(r); states
// below the floor are not representable and yield nullopt.
std::optional<Vec3> block_flux_prediction(const Vec3& zeta_block, const Potential& pot);

struct OneBlockResult {
    double residual = 0.0;
    bool valid = true;
    Vec3 flux_avg{};        // cutoff block average of the bond fluxes
    Vec3 flux_predicted{};  // macroscopic flux at the cutoff block average
};

// | (1/(k+1)) sum_l J^b_{l-1,l} - Jtilde^b(zeta_i^{b,k}) |_2 with the cutoff
// indicator {|e_l| <= b} applied to both the fluxes and the block average.
OneBlockResult one_block_residual(const ChainState& state, const Potential& pot,
                                  int site, const BlockSpec& spec,
                                  const TensionSchedule& sched, double t_macro);

struct MomentResiduals {
    // Order: mean r, mean p, var p, mean V'(r), mean e.
    std::array<double, 5> z{};
    std::array<double, 5> observed{};
    std::array<double, 5> predicted{};
    std::array<double, 5> std_err{};
    static constexpr std::array<const char*, 5> names{"mean_r", "mean_p", "var_p",
                                                      "mean_dV", "mean_e"};
};

// Compares block-and-ensemble empirical moments with nu_{lam_ref}
// predictions.  Standard errors come from the spread across independent
// ensemble units (members, or antithetic pairs when pair_units is set).
MomentResiduals local_equilibrium_moments(const std::vector<const ChainState*>& ensemble,
                                          const Potential& pot, int site, int k,
                                          const Lambda& lam_ref, bool pair_units = false);

struct FieldError {
    double t = 0.0;
    int alpha = 0;
    std::string j_name;
    double weak_error = 0.0;
    double std_err = 0.0;
    double reference = 0.0;
    bool boundary_sensitive = false;
};

// Weak errors |ensemble mean of empirical_density - lattice quadrature of
// J u_alpha| per (time, field, J), with the PDE side interpolated to the
// lattice points so both sides share the same quadrature rule.
std::vector<FieldError> field_error(const std::vector<ObservationLog>& ensemble,
                                    const PdeRun& pde_run, const Potential& pot,
                                    const std::vector<TestFunction>& j_set,
                                    bool pair_units = false);

}  // namespace chainflow
