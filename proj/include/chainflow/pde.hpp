#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "chainflow/chain.hpp"
#include "chainflow/eos_table.hpp"
#include "chainflow/potential.hpp"
#include "chainflow/thermo.hpp"

namespace chainflow {

using Vec3 = std::array<double, 3>;

enum class PdeErrc {
    incompatible_corner,
    cfl_violation,
    not_admissible,
    shock_before_horizon,
};

class PdeError : public std::runtime_error {
public:
    PdeError(PdeErrc code, const std::string& what, double detail = 0.0)
        : std::runtime_error(what), code(code), detail(detail) {}
    PdeErrc code;
    double detail;  // shock time for shock_before_horizon
};

// Cell-centered fields of the conserved triple on [0,1].
struct PdeGrid {
    int m = 0;
    double t = 0.0;
    std::vector<double> r, p, E;
    std::vector<double> s0;  // initial entropy per cell (diagnostic)

    double dx() const { return 1.0 / m; }
    double x_center(int j) const { return (j + 0.5) / m; }
    MacroState cell(int j) const { return MacroState{r[j], p[j], E[j]}; }
};

// Initial data on [0,1] with derivative access by finite differences.
struct MacroProfile {
    std::function<double(double)> r0, p0, E0;

    MacroState at(double x) const { return MacroState{r0(x), p0(x), E0(x)}; }
    static MacroProfile constant(const MacroState& u);
};

// Residuals of the corner compatibility conditions (left column at x->0,
// right column at x->1).
struct CornerReport {
    double c1_left = 0.0, c1_right = 0.0;
    double c2_left = 0.0, c2_right = 0.0;
    double c3_left = 0.0, c3_right = 0.0;
};

enum class ShockStatus { smooth = 0, suspect = 1, shocked = 2 };

struct ShockMonitor {
    double grad_ref = 0.0;  // baseline max |dp/dx| (floored)
    double tv_prev = 0.0;
    double tv_allowance = 0.0;  // legitimate per-step TV inflow from the boundary
    ShockStatus status = ShockStatus::smooth;

    static ShockMonitor init(const PdeGrid& grid, double forcing_scale);
    // Inspects the grid after a step; the status only ratchets upward.
    ShockStatus update(const PdeGrid& grid);
};

// Macroscopic flux J(u) = (p, P, -pP) of the conserved triple (r, p, -E).
Vec3 flux(const MacroState& u, const Potential& pot);

// Jacobian of the flux with respect to (r, p, -E); eigenvalues {+c, -c, 0}.
Mat3 jacobian_flux(const MacroState& u, const Potential& pot);

// Samples cell centers and verifies the corner compatibility conditions
// (throws PdeError{incompatible_corner} naming the failing pair).
PdeGrid init_grid(const MacroProfile& profile, const TensionSchedule& sched, int m,
                  const Potential& pot, CornerReport* report = nullptr);

// One MacCormack predictor-corrector step; direction of the predictor
// difference alternates with step_index parity.  Boundary closure: mirror
// ghosts at the wall, characteristic extrapolation with P = tau(t) on the
// right.
void step_pde(PdeGrid& grid, double dt, const TensionSchedule& sched, EosTable& eos,
              long step_index);

struct PdeSnapshot {
    double t = 0.0;
    PdeGrid grid;
    std::vector<double> e_int, tension, entropy, lambda1, lambda2, lambda3;
    double boundary_id_left = 0.0;   // |lambda_2(0,t)|
    double boundary_id_right = 0.0;  // |tau(t) lambda_3(1,t) - lambda_1(1,t)|
};

struct PdeRun {
    std::vector<PdeSnapshot> snapshots;
    CornerReport corners;
    long total_steps = 0;
    double dt_min = 0.0, dt_max = 0.0;
    std::vector<std::pair<double, ShockStatus>> status_timeline;
    double max_entropy_drift = 0.0;  // max_j |s(x,t) - s0(x)| over the run
};

struct SolveOptions {
    double cfl = 0.4;
    std::vector<double> snapshot_times;
    double eos_spacing = 0.01;
    bool stop_on_shock = true;
};

PdeRun solve(const MacroProfile& profile, const TensionSchedule& sched, int m,
             double t_macro, const Potential& pot, const SolveOptions& opts = {});

// Interpolates a snapshot field at position x (piecewise linear through cell
// centers, clamped at the boundary).
double sample_field(const PdeGrid& grid, const std::vector<double>& field, double x);

}  // namespace chainflow
