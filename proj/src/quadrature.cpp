#include "chainflow/quadrature.hpp"

#include <cmath>

namespace chainflow {

namespace {

constexpr int kGL = 15;

struct GLRule {
    double x[kGL];
    double w[kGL];
};

// Nodes and weights of the 15-point rule on [-1,1], built once by Newton
// iteration on the Legendre recurrence.
const GLRule& gl15() {
    static const GLRule rule = [] {
        GLRule r{};
        const int n = kGL;
        for (int k = 0; k < (n + 1) / 2; ++k) {
            double x = std::cos(M_PI * (k + 0.75) / (n + 0.5));
            double dp = 0.0;
            for (int it = 0; it < 100; ++it) {
                double p0 = 1.0, p1 = x;
                for (int j = 2; j <= n; ++j) {
                    const double p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n * (x * p1 - p0) / (x * x - 1.0);
                const double dx = p1 / dp;
                x -= dx;
                if (std::fabs(dx) < 1e-16) break;
            }
            const double w = 2.0 / ((1.0 - x * x) * dp * dp);
            r.x[k] = -x;
            r.w[k] = w;
            r.x[n - 1 - k] = x;
            r.w[n - 1 - k] = w;
        }
        return r;
    }();
    return rule;
}

using Values = std::array<double, AdaptiveGL::kMaxComp>;

void panel(const AdaptiveGL::Integrand& f, int ncomp, double a, double b,
           Values& out) {
    const GLRule& g = gl15();
    const double mid = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    out.fill(0.0);
    double fx[AdaptiveGL::kMaxComp];
    for (int i = 0; i < kGL; ++i) {
        f(mid + half * g.x[i], fx);
        for (int c = 0; c < ncomp; ++c) out[c] += g.w[i] * fx[c];
    }
    for (int c = 0; c < ncomp; ++c) out[c] *= half;
}

struct Worker {
    const AdaptiveGL::Integrand& f;
    int ncomp;
    double total_len;
    double tol;
    bool converged = true;
    int panels = 0;

    void refine(double a, double b, const Values& parent, Values& acc, int depth) {
        ++panels;
        Values left{}, right{};
        const double mid = 0.5 * (a + b);
        panel(f, ncomp, a, mid, left);
        panel(f, ncomp, mid, b, right);
        double err = 0.0;
        for (int c = 0; c < ncomp; ++c)
            err = std::max(err, std::fabs(parent[c] - left[c] - right[c]));
        const double share = tol * std::max((b - a) / total_len, 1e-6);
        if (err <= share || depth >= 48) {
            if (depth >= 48 && err > share) converged = false;
            for (int c = 0; c < ncomp; ++c) acc[c] += left[c] + right[c];
            return;
        }
        refine(a, mid, left, acc, depth + 1);
        refine(mid, b, right, acc, depth + 1);
    }
};

}  // namespace

AdaptiveGL::Result AdaptiveGL::integrate(const Integrand& f, int ncomp, double a,
                                         double b, double abs_tol) {
    Result res;
    if (!(b > a)) return res;
    Worker w{f, ncomp, b - a, abs_tol};
    Values root{}, acc{};
    panel(f, ncomp, a, b, root);
    w.refine(a, b, root, acc, 0);
    res.value = acc;
    res.converged = w.converged;
    res.panels = w.panels;
    return res;
}

}  // namespace chainflow
