#include "chainflow/kernels.hpp"

#include <cstdlib>
#include <stdexcept>

#include "chainflow/vecmath.hpp"

namespace chainflow::kernels {

namespace ref {

void force(const Potential& pot, const double* r, double* f, std::size_t n) {
    switch (pot.kind) {
        case Potential::Kind::harmonic:
            for (std::size_t i = 0; i < n; ++i) f[i] = r[i];
            break;
        case Potential::Kind::coslattice: {
            const double a = pot.a;
            for (std::size_t i = 0; i < n; ++i)
                f[i] = std::fma(a, vm::ksin(r[i]), r[i]);
            break;
        }
        case Potential::Kind::fpu: {
            const double b = pot.b;
            for (std::size_t i = 0; i < n; ++i)
                f[i] = std::fma(b * r[i], r[i] * r[i], r[i]);
            break;
        }
        default:
            for (std::size_t i = 0; i < n; ++i) f[i] = pot.deriv(r[i]);
    }
}

void kick(double* p, const double* f, double tau, double h, std::size_t n) {
    for (std::size_t i = 0; i + 1 < n; ++i) p[i] = std::fma(h, f[i + 1] - f[i], p[i]);
    p[n - 1] = std::fma(h, tau - f[n - 1], p[n - 1]);
}

void drift(double* r, const double* p, double h, std::size_t n) {
    r[0] = std::fma(h, p[0], r[0]);
    for (std::size_t i = 1; i < n; ++i) r[i] = std::fma(h, p[i] - p[i - 1], r[i]);
}

void site_energy(const Potential& pot, const double* r, const double* p,
                 double* e, std::size_t n) {
    switch (pot.kind) {
        case Potential::Kind::harmonic:
            for (std::size_t i = 0; i < n; ++i)
                e[i] = std::fma(0.5 * p[i], p[i], 0.5 * r[i] * r[i]);
            break;
        case Potential::Kind::coslattice: {
            const double a = pot.a;
            for (std::size_t i = 0; i < n; ++i) {
                const double v = std::fma(a, 1.0 - vm::kcos(r[i]), 0.5 * r[i] * r[i]);
                e[i] = std::fma(0.5 * p[i], p[i], v);
            }
            break;
        }
        case Potential::Kind::fpu: {
            const double b = pot.b;
            for (std::size_t i = 0; i < n; ++i) {
                const double r2 = r[i] * r[i];
                const double v = std::fma(0.25 * b * r2, r2, 0.5 * r2);
                e[i] = std::fma(0.5 * p[i], p[i], v);
            }
            break;
        }
        default:
            for (std::size_t i = 0; i < n; ++i)
                e[i] = 0.5 * p[i] * p[i] + pot.eval(r[i]);
    }
}

double total_energy(const Potential& pot, const double* r, const double* p,
                    std::size_t n) {
    double acc = 0.0;
    switch (pot.kind) {
        case Potential::Kind::harmonic:
            for (std::size_t i = 0; i < n; ++i)
                acc += std::fma(0.5 * p[i], p[i], 0.5 * r[i] * r[i]);
            break;
        case Potential::Kind::coslattice: {
            const double a = pot.a;
            for (std::size_t i = 0; i < n; ++i) {
                const double v = std::fma(a, 1.0 - vm::kcos(r[i]), 0.5 * r[i] * r[i]);
                acc += std::fma(0.5 * p[i], p[i], v);
            }
            break;
        }
        case Potential::Kind::fpu: {
            const double b = pot.b;
            for (std::size_t i = 0; i < n; ++i) {
                const double r2 = r[i] * r[i];
                const double v = std::fma(0.25 * b * r2, r2, 0.5 * r2);
                acc += std::fma(0.5 * p[i], p[i], v);
            }
            break;
        }
        default:
            for (std::size_t i = 0; i < n; ++i)
                acc += 0.5 * p[i] * p[i] + pot.eval(r[i]);
    }
    return acc;
}

}  // namespace ref

namespace {

Isa detect_preferred() {
#if defined(CHAINFLOW_HAVE_AVX2)
    if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma"))
        return Isa::avx2;
#endif
    return Isa::scalar;
}

Isa initial_isa() {
    if (const char* env = std::getenv("CHAINFLOW_KERNELS")) {
        std::string s(env);
        if (s == "scalar") return Isa::scalar;
        if (s == "avx2" && supported(Isa::avx2)) return Isa::avx2;
    }
    return detect_preferred();
}

Isa g_active = initial_isa();

}  // namespace

bool supported(Isa isa) {
    if (isa == Isa::scalar) return true;
#if defined(CHAINFLOW_HAVE_AVX2)
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

Isa active() { return g_active; }

void set_active(Isa isa) {
    if (!supported(isa)) throw std::runtime_error("requested kernel ISA not supported");
    g_active = isa;
}

bool set_active(const std::string& name) {
    if (name == "auto") {
        g_active = detect_preferred();
        return true;
    }
    if (name == "scalar") {
        g_active = Isa::scalar;
        return true;
    }
    if (name == "avx2") {
        if (!supported(Isa::avx2)) return false;
        g_active = Isa::avx2;
        return true;
    }
    return false;
}

std::string isa_name(Isa isa) { return isa == Isa::avx2 ? "avx2" : "scalar"; }

void force(const Potential& pot, const double* r, double* f, std::size_t n) {
#if defined(CHAINFLOW_HAVE_AVX2)
    if (g_active == Isa::avx2 && pot.kind != Potential::Kind::custom)
        return avx2::force(pot, r, f, n);
#endif
    ref::force(pot, r, f, n);
}

void kick(double* p, const double* f, double tau, double h, std::size_t n) {
#if defined(CHAINFLOW_HAVE_AVX2)
    if (g_active == Isa::avx2) return avx2::kick(p, f, tau, h, n);
#endif
    ref::kick(p, f, tau, h, n);
}

void drift(double* r, const double* p, double h, std::size_t n) {
#if defined(CHAINFLOW_HAVE_AVX2)
    if (g_active == Isa::avx2) return avx2::drift(r, p, h, n);
#endif
    ref::drift(r, p, h, n);
}

void site_energy(const Potential& pot, const double* r, const double* p,
                 double* e, std::size_t n) {
#if defined(CHAINFLOW_HAVE_AVX2)
    if (g_active == Isa::avx2 && pot.kind != Potential::Kind::custom)
        return avx2::site_energy(pot, r, p, e, n);
#endif
    ref::site_energy(pot, r, p, e, n);
}

double total_energy(const Potential& pot, const double* r, const double* p,
                    std::size_t n) {
#if defined(CHAINFLOW_HAVE_AVX2)
    if (g_active == Isa::avx2 && pot.kind != Potential::Kind::custom)
        return avx2::total_energy(pot, r, p, n);
#endif
    return ref::total_energy(pot, r, p, n);
}

}  // namespace chainflow::kernels
