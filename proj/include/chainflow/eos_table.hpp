#pragma once

#include <vector>

#include "chainflow/potential.hpp"
#include "chainflow/thermo.hpp"

namespace chainflow {

// Equation of state memoized on a uniform grid with bicubic (Catmull-Rom)
// interpolation.  The grid lives in (r, w) with w = e_int - V(r): the
// admissible region {e > V(r)} maps to the half-plane w > 0, so every node
// of a rectangular table is a valid state.  Node values come from one
// invert_to_lambda per node; the tension partials are assembled from the
// analytic covariance (D^2 Phi = (D^2 Theta)^-1), so no finite differences
// enter the table.  Requests outside the current box trigger a rebuild on an
// enlarged box.  Spacing is chosen so the interpolation error stays below
// ~1e-8, well under the truncation error of the PDE scheme.
class EosTable {
public:
    struct Entry {
        double tension = 0.0;
        double beta = 0.0;
        double entr = 0.0;
        double c2 = 0.0;
        double p_r = 0.0;  // dP/dr at fixed e
        double p_e = 0.0;  // dP/de at fixed r
    };

    // Bounds in w = e_int - V(r), the energy above the zero-temperature
    // floor; the grid is uniform in (r, log w).
    EosTable(const Potential& pot, double r_lo, double r_hi, double w_lo,
             double w_hi, double spacing = 0.01);

    Entry eval(double r, double e);  // grows the box on miss

    double tension(double r, double e) { return eval(r, e).tension; }
    double beta(double r, double e) { return eval(r, e).beta; }
    double entropy(double r, double e) { return eval(r, e).entr; }
    double sound_speed2(double r, double e) { return eval(r, e).c2; }

    const Potential& potential() const { return pot_; }
    int rebuild_count() const { return rebuilds_; }

private:
    void build(double r_lo, double r_hi, double w_lo, double w_hi);
    bool inside(double r, double w) const;

    Potential pot_;
    double spacing_;
    double r0_ = 0.0, w0_ = 0.0;  // grid origin (includes padding ring)
    int nr_ = 0, nw_ = 0;
    std::vector<Entry> nodes_;
    int rebuilds_ = 0;

    const Entry& node(int i, int j) const { return nodes_[std::size_t(j) * nr_ + i]; }
};

// Exact (quadrature-backed) node values; shared by the table builder and the
// accuracy tests.  A warm start accelerates sweeping builds.
EosTable::Entry eos_node_exact(double r, double e, const Potential& pot,
                               Lambda* lam_io = nullptr);

}  // namespace chainflow
