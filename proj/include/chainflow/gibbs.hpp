#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "chainflow/potential.hpp"
#include "chainflow/rng.hpp"
#include "chainflow/thermo.hpp"

namespace chainflow {

class EnvelopeFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Conjugate-parameter profile sampled at the lattice points x_i = i/N.
struct LambdaProfile {
    std::vector<Lambda> values;

    std::size_t size() const { return values.size(); }

    static LambdaProfile constant(const Lambda& lam, std::size_t n);
    static LambdaProfile from_function(const std::function<Lambda(double)>& lam_of_x,
                                       std::size_t n);
    // Pushes a macroscopic profile through invert_to_lambda site by site.
    static LambdaProfile from_macro(const std::function<MacroState(double)>& u_of_x,
                                    std::size_t n, const Potential& pot);
};

struct ChainState {
    std::vector<double> r, p;
    double t_micro = 0.0;
    std::uint64_t n_swaps = 0;
    double work_accum = 0.0;       // integral of tau p_N dt
    double boundary_flow_r = 0.0;  // integral of p_N dt
    double boundary_flow_p = 0.0;  // integral of (tau - V'(r_1)) dt

    std::size_t size() const { return r.size(); }
};

// One exact draw from nu_lambda.  p is Gaussian; r is rejection-sampled
// against a mode-matched Gaussian envelope (log-concave marginal), with a
// piecewise-exponential fallback when the curvature at the mode is tiny.
std::pair<double, double> sample_site(const Lambda& lam, const Potential& pot,
                                      Rng& rng);

// Independent sites, site i drawn from nu_{lambda(i/N)}.
ChainState sample_chain(const LambdaProfile& profile, const Potential& pot, Rng& rng);

// Antithetically coupled pair of chains: same law member-wise, but the
// second member reuses the first member's uniforms mirrored (u -> 1-u for
// the stretch quantile, z -> -z for the momentum), so smooth linear
// statistics of the pair mean have strongly reduced variance.  Uses
// inverse-CDF sampling for the stretch marginal.
std::pair<ChainState, ChainState> sample_chain_pair(const LambdaProfile& profile,
                                                    const Potential& pot, Rng& rng);

// log nu_lambda(r, p) = lambda . zeta(r,p) - Theta(lambda)
double log_density_site(const Lambda& lam, double r, double p, const Potential& pot);

// Tabulated quantile function of the r-marginal (used by the antithetic
// path and reusable in tests).
class RQuantile {
public:
    RQuantile(const Lambda& lam, const Potential& pot);
    double operator()(double u) const;  // u in [0,1]

private:
    std::vector<double> grid_;  // r values
    std::vector<double> cdf_;   // matching CDF values, strictly increasing
    std::vector<double> pdf_;   // normalized density at the grid nodes
};

}  // namespace chainflow
