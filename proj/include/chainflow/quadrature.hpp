#pragma once

#include <array>
#include <cstddef>
#include <functional>

namespace chainflow {

// Adaptive composite Gauss-Legendre quadrature with interval bisection.
// The integrand is vector-valued (all thermodynamic moments share one panel
// tree); a panel is accepted when the GL15 parent-vs-children discrepancy of
// every component is below its share of the absolute tolerance.
class AdaptiveGL {
public:
    static constexpr int kMaxComp = 8;

    struct Result {
        std::array<double, kMaxComp> value{};
        bool converged = true;
        int panels = 0;
    };

    using Integrand = std::function<void(double x, double* out)>;

    static Result integrate(const Integrand& f, int ncomp, double a, double b,
                            double abs_tol);
};

}  // namespace chainflow
