#include "chainflow/potential.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace chainflow {

double Potential::curvature_sup(double r_probe) const {
    switch (kind) {
        case Kind::harmonic: return 1.0;
        case Kind::coslattice: return 1.0 + a;
        case Kind::fpu: return 1.0 + 3.0 * b * r_probe * r_probe;
        case Kind::custom: break;
    }
    double sup = 0.0;
    for (int i = 0; i <= 400; ++i) {
        const double r = -r_probe + 2.0 * r_probe * i / 400.0;
        sup = std::max(sup, deriv2(r));
    }
    return sup;
}

Potential make_harmonic() {
    Potential p;
    p.kind = Potential::Kind::harmonic;
    p.name = "harmonic";
    p.curvature_bound_ok = true;
    p.curvature_min = 1.0;
    return p;
}

Potential make_coslattice(double a) {
    if (!(a > 0.0 && a < 1.0))
        throw std::invalid_argument("coslattice amplitude must lie in (0,1)");
    Potential p;
    p.kind = Potential::Kind::coslattice;
    p.a = a;
    p.name = "coslattice";
    p.curvature_bound_ok = true;
    p.curvature_min = 1.0 - a;
    return p;
}

Potential make_fpu(double b) {
    if (!(b > 0.0)) throw std::invalid_argument("fpu coefficient must be positive");
    Potential p;
    p.kind = Potential::Kind::fpu;
    p.b = b;
    p.name = "fpu";
    p.curvature_bound_ok = false;
    p.curvature_min = 1.0;
    std::fprintf(stderr,
                 "chainflow: warning: fpu potential has unbounded curvature "
                 "(V'' ~ 3*b*r^2); outside the class the limit theorem covers\n");
    return p;
}

Potential make_custom(std::string name, std::function<double(double)> v,
                      std::function<double(double)> dv,
                      std::function<double(double)> d2v) {
    Potential p;
    p.kind = Potential::Kind::custom;
    p.name = std::move(name);
    p.custom_v = std::move(v);
    p.custom_dv = std::move(dv);
    p.custom_d2v = std::move(d2v);
    p.curvature_bound_ok = true;
    double cmin = p.deriv2(0.0);
    for (int i = 0; i <= 800; ++i) {
        const double r = -20.0 + 40.0 * i / 800.0;
        cmin = std::min(cmin, p.deriv2(r));
    }
    p.curvature_min = cmin;
    return p;
}

Potential make_potential(const std::string& kind, double param) {
    if (kind == "harmonic") return make_harmonic();
    if (kind == "coslattice") return make_coslattice(param);
    if (kind == "fpu") return make_fpu(param);
    throw std::invalid_argument("unknown potential kind: " + kind);
}

PotentialCheck validate_potential(const Potential& pot, double r_probe) {
    PotentialCheck out{true, {}};
    auto fail = [&](std::string msg) {
        out.ok = false;
        out.violations.push_back(std::move(msg));
    };

    const int n = 257;
    for (int i = 0; i < n; ++i) {
        const double r = -2.0 * r_probe + 4.0 * r_probe * i / (n - 1);
        const double v = pot.eval(r);
        if (!(v >= 0.0)) {
            fail("V(" + std::to_string(r) + ") = " + std::to_string(v) + " < 0");
            break;
        }
    }

    // Superlinear growth: V(r)/|r| must be large at the probe radius.
    for (double r : {-2.0 * r_probe, 2.0 * r_probe}) {
        if (pot.eval(r) / std::fabs(r) < 10.0)
            fail("V grows sublinearly near r = " + std::to_string(r));
    }

    if (pot.curvature_bound_ok) {
        const double bound = 1.0 + std::fabs(pot.a) + 1e-9;
        double sup = 0.0;
        for (int i = 0; i < n; ++i) {
            const double r = -2.0 * r_probe + 4.0 * r_probe * i / (n - 1);
            sup = std::max(sup, pot.deriv2(r));
        }
        if (pot.kind != Potential::Kind::custom && sup > bound)
            fail("V'' exceeds the declared bound: sup = " + std::to_string(sup));
        if (pot.kind == Potential::Kind::custom && sup > 100.0)
            fail("custom potential V'' looks unbounded: sup = " + std::to_string(sup));
    }

    // deriv / deriv2 must match centered finite differences of eval.
    const double h = 1e-5;
    for (int i = 0; i < 33; ++i) {
        const double r = -r_probe + 2.0 * r_probe * i / 32.0;
        const double fd1 = (pot.eval(r + h) - pot.eval(r - h)) / (2.0 * h);
        const double fd2 =
            (pot.eval(r + h) - 2.0 * pot.eval(r) + pot.eval(r - h)) / (h * h);
        const double scale1 = std::max(1.0, std::fabs(pot.deriv(r)));
        const double scale2 = std::max(1.0, std::fabs(pot.deriv2(r)));
        if (std::fabs(fd1 - pot.deriv(r)) / scale1 > 1e-6)
            fail("deriv mismatch with finite differences at r = " + std::to_string(r));
        if (std::fabs(fd2 - pot.deriv2(r)) / scale2 > 1e-4)
            fail("deriv2 mismatch with finite differences at r = " + std::to_string(r));
    }
    return out;
}

}  // namespace chainflow
