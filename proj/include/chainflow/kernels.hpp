#pragma once

#include <cstddef>
#include <string>

#include "chainflow/potential.hpp"

// Inner loops of the chain integrator.  Scalar reference kernels plus AVX2
// variants selected at runtime; because both sides use only correctly
// rounded IEEE operations (see vecmath.hpp) the element-wise kernels are
// bitwise identical across ISAs, which the equivalence tests assert.
// Reductions keep fixed lane-partial order, so they are deterministic per
// ISA but only ULP-close across ISAs.

namespace chainflow::kernels {

enum class Isa { scalar, avx2 };

bool supported(Isa isa);
Isa active();
void set_active(Isa isa);          // throws if unsupported
bool set_active(const std::string& name);  // "auto" | "scalar" | "avx2"
std::string isa_name(Isa isa);

// f[i] = V'(r[i])
void force(const Potential& pot, const double* r, double* f, std::size_t n);

// p[i] += h * (f[i+1] - f[i]) for i < n-1;  p[n-1] += h * (tau - f[n-1])
void kick(double* p, const double* f, double tau, double h, std::size_t n);

// r[i] += h * (p[i] - p[i-1]) with the wall convention p[-1] = 0
void drift(double* r, const double* p, double h, std::size_t n);

// e[i] = p[i]^2/2 + V(r[i])
void site_energy(const Potential& pot, const double* r, const double* p,
                 double* e, std::size_t n);

// sum of p^2/2 + V(r); deterministic order within an ISA
double total_energy(const Potential& pot, const double* r, const double* p,
                    std::size_t n);

// Scalar reference entry points, callable regardless of dispatch state (the
// equivalence tests compare these against the active ISA).
namespace ref {
void force(const Potential& pot, const double* r, double* f, std::size_t n);
void kick(double* p, const double* f, double tau, double h, std::size_t n);
void drift(double* r, const double* p, double h, std::size_t n);
void site_energy(const Potential& pot, const double* r, const double* p,
                 double* e, std::size_t n);
double total_energy(const Potential& pot, const double* r, const double* p,
                    std::size_t n);
}  // namespace ref

#if defined(CHAINFLOW_HAVE_AVX2)
namespace avx2 {
void force(const Potential& pot, const double* r, double* f, std::size_t n);
void kick(double* p, const double* f, double tau, double h, std::size_t n);
void drift(double* r, const double* p, double h, std::size_t n);
void site_energy(const Potential& pot, const double* r, const double* p,
                 double* e, std::size_t n);
double total_energy(const Potential& pot, const double* r, const double* p,
                    std::size_t n);
}  // namespace avx2
#endif

}  // namespace chainflow::kernels
