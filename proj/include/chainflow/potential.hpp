#pragma once

#include <functional>
#include <string>
#include <vector>

#include "chainflow/vecmath.hpp"

namespace chainflow {

// Interaction potential of one spring.  The bundled kinds carry closed-form
// eval/deriv/deriv2 built on the kernel math (vm::ksin/kcos) so that the
// integrator, the sampler and the estimators all see exactly the same V.
// Custom potentials go through std::function and only run on the scalar path.
struct Potential {
    enum class Kind { harmonic, coslattice, fpu, custom };

    Kind kind = Kind::harmonic;
    double a = 0.0;  // coslattice amplitude
    double b = 0.0;  // fpu quartic coefficient
    std::string name = "harmonic";
    bool curvature_bound_ok = true;
    // Infimum of V'' (analytic for bundled kinds, probed for custom ones);
    // used by the rejection-envelope construction.
    double curvature_min = 1.0;

    std::function<double(double)> custom_v, custom_dv, custom_d2v;

    double eval(double r) const {
        switch (kind) {
            case Kind::harmonic: return 0.5 * r * r;
            case Kind::coslattice: return 0.5 * r * r + a * (1.0 - vm::kcos(r));
            case Kind::fpu: return 0.5 * r * r + 0.25 * b * (r * r) * (r * r);
            case Kind::custom: return custom_v(r);
        }
        return 0.0;
    }

    double deriv(double r) const {
        switch (kind) {
            case Kind::harmonic: return r;
            case Kind::coslattice: return r + a * vm::ksin(r);
            case Kind::fpu: return r + b * r * r * r;
            case Kind::custom: return custom_dv(r);
        }
        return 0.0;
    }

    double deriv2(double r) const {
        switch (kind) {
            case Kind::harmonic: return 1.0;
            case Kind::coslattice: return 1.0 + a * vm::kcos(r);
            case Kind::fpu: return 1.0 + 3.0 * b * r * r;
            case Kind::custom: return custom_d2v(r);
        }
        return 0.0;
    }

    // Largest V'' over the probe window, used for the default time step.
    double curvature_sup(double r_probe = 10.0) const;
};

Potential make_harmonic();
Potential make_coslattice(double a);  // a in (0,1)
Potential make_fpu(double b);         // quartic growth; violates the curvature bound
Potential make_custom(std::string name, std::function<double(double)> v,
                      std::function<double(double)> dv,
                      std::function<double(double)> d2v);
Potential make_potential(const std::string& kind, double param);

struct PotentialCheck {
    bool ok;
    std::vector<std::string> violations;
};

// Probes the spec invariants on a sample grid: positivity, superlinear
// growth, the curvature bound when claimed, and finite-difference consistency
// of deriv/deriv2 with eval.
PotentialCheck validate_potential(const Potential& pot, double r_probe = 10.0);

}  // namespace chainflow
