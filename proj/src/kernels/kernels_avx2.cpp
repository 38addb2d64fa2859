#include <immintrin.h>

#include "chainflow/kernels.hpp"
#include "chainflow/vecmath.hpp"

// AVX2/FMA mirrors of the scalar reference kernels.  The arithmetic follows
// vecmath.hpp operation for operation, so element-wise results are bitwise
// equal to the scalar path; only total_energy (a reduction) differs by
// summation order.

namespace chainflow::kernels::avx2 {

namespace {

inline __m256d vsin_poly(__m256d r) {
    const __m256d z = _mm256_mul_pd(r, r);
    __m256d p = _mm256_set1_pd(vm::kSinC[0]);
    p = _mm256_fmadd_pd(p, z, _mm256_set1_pd(vm::kSinC[1]));
    p = _mm256_fmadd_pd(p, z, _mm256_set1_pd(vm::kSinC[2]));
    p = _mm256_fmadd_pd(p, z, _mm256_set1_pd(vm::kSinC[3]));
    p = _mm256_fmadd_pd(p, z, _mm256_set1_pd(vm::kSinC[4]));
    p = _mm256_fmadd_pd(p, z, _mm256_set1_pd(vm::kSinC[5]));
    return _mm256_fmadd_pd(_mm256_mul_pd(r, z), p, r);
}

inline __m256d vcos_poly(__m256d r) {
    const __m256d z = _mm256_mul_pd(r, r);
    __m256d p = _mm256_set1_pd(vm::kCosC[0]);
    p = _mm256_fmadd_pd(p, z, _mm256_set1_pd(vm::kCosC[1]));
    p = _mm256_fmadd_pd(p, z, _mm256_set1_pd(vm::kCosC[2]));
    p = _mm256_fmadd_pd(p, z, _mm256_set1_pd(vm::kCosC[3]));
    p = _mm256_fmadd_pd(p, z, _mm256_set1_pd(vm::kCosC[4]));
    p = _mm256_fmadd_pd(p, z, _mm256_set1_pd(vm::kCosC[5]));
    const __m256d base = _mm256_fmadd_pd(_mm256_set1_pd(-0.5), z, _mm256_set1_pd(1.0));
    return _mm256_fmadd_pd(_mm256_mul_pd(z, z), p, base);
}

struct SinCos {
    __m256d s, c;
};

inline bool needs_scalar_fallback(__m256d x) {
    const __m256d limit = _mm256_set1_pd(vm::kReduceLimit);
    const __m256d ax = _mm256_andnot_pd(_mm256_set1_pd(-0.0), x);
    const __m256d bad = _mm256_cmp_pd(ax, limit, _CMP_NLE_UQ);  // |x| > limit or NaN
    return _mm256_movemask_pd(bad) != 0;
}

inline SinCos vsincos(__m256d x) {
    if (needs_scalar_fallback(x)) {
        alignas(32) double xs[4], ss[4], cs[4];
        _mm256_store_pd(xs, x);
        for (int i = 0; i < 4; ++i) {
            ss[i] = vm::ksin(xs[i]);
            cs[i] = vm::kcos(xs[i]);
        }
        return {_mm256_load_pd(ss), _mm256_load_pd(cs)};
    }
    const __m256d n = _mm256_round_pd(_mm256_mul_pd(x, _mm256_set1_pd(vm::kTwoOverPi)),
                                      _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
    __m256d r = _mm256_fnmadd_pd(n, _mm256_set1_pd(vm::kPio2A), x);
    r = _mm256_fnmadd_pd(n, _mm256_set1_pd(vm::kPio2B), r);
    r = _mm256_fnmadd_pd(n, _mm256_set1_pd(vm::kPio2C), r);
    const __m256d q = _mm256_sub_pd(
        n, _mm256_mul_pd(_mm256_set1_pd(4.0),
                         _mm256_floor_pd(_mm256_mul_pd(n, _mm256_set1_pd(0.25)))));

    const __m256d sp = vsin_poly(r);
    const __m256d cp = vcos_poly(r);
    const __m256d msp = _mm256_xor_pd(sp, _mm256_set1_pd(-0.0));
    const __m256d mcp = _mm256_xor_pd(cp, _mm256_set1_pd(-0.0));

    const __m256d q1 = _mm256_cmp_pd(q, _mm256_set1_pd(1.0), _CMP_EQ_OQ);
    const __m256d q2 = _mm256_cmp_pd(q, _mm256_set1_pd(2.0), _CMP_EQ_OQ);
    const __m256d q3 = _mm256_cmp_pd(q, _mm256_set1_pd(3.0), _CMP_EQ_OQ);

    __m256d s = sp;  // q == 0
    s = _mm256_blendv_pd(s, cp, q1);
    s = _mm256_blendv_pd(s, msp, q2);
    s = _mm256_blendv_pd(s, mcp, q3);

    __m256d c = cp;
    c = _mm256_blendv_pd(c, msp, q1);
    c = _mm256_blendv_pd(c, mcp, q2);
    c = _mm256_blendv_pd(c, sp, q3);
    return {s, c};
}

}  // namespace

void force(const Potential& pot, const double* r, double* f, std::size_t n) {
    std::size_t i = 0;
    switch (pot.kind) {
        case Potential::Kind::harmonic:
            for (; i + 4 <= n; i += 4)
                _mm256_storeu_pd(f + i, _mm256_loadu_pd(r + i));
            break;
        case Potential::Kind::coslattice: {
            const __m256d a = _mm256_set1_pd(pot.a);
            for (; i + 4 <= n; i += 4) {
                const __m256d vr = _mm256_loadu_pd(r + i);
                _mm256_storeu_pd(f + i, _mm256_fmadd_pd(a, vsincos(vr).s, vr));
            }
            break;
        }
        case Potential::Kind::fpu: {
            const __m256d b = _mm256_set1_pd(pot.b);
            for (; i + 4 <= n; i += 4) {
                const __m256d vr = _mm256_loadu_pd(r + i);
                const __m256d br = _mm256_mul_pd(b, vr);
                const __m256d r2 = _mm256_mul_pd(vr, vr);
                _mm256_storeu_pd(f + i, _mm256_fmadd_pd(br, r2, vr));
            }
            break;
        }
        default:
            break;
    }
    if (i < n) ref::force(pot, r + i, f + i, n - i);
}

void kick(double* p, const double* f, double tau, double h, std::size_t n) {
    const __m256d vh = _mm256_set1_pd(h);
    std::size_t i = 0;
    for (; i + 5 <= n; i += 4) {
        const __m256d lo = _mm256_loadu_pd(f + i);
        const __m256d hi = _mm256_loadu_pd(f + i + 1);
        const __m256d vp = _mm256_loadu_pd(p + i);
        _mm256_storeu_pd(p + i, _mm256_fmadd_pd(vh, _mm256_sub_pd(hi, lo), vp));
    }
    for (; i + 1 < n; ++i) p[i] = std::fma(h, f[i + 1] - f[i], p[i]);
    p[n - 1] = std::fma(h, tau - f[n - 1], p[n - 1]);
}

void drift(double* r, const double* p, double h, std::size_t n) {
    const __m256d vh = _mm256_set1_pd(h);
    r[0] = std::fma(h, p[0], r[0]);
    std::size_t i = 1;
    for (; i + 4 <= n; i += 4) {
        const __m256d cur = _mm256_loadu_pd(p + i);
        const __m256d prev = _mm256_loadu_pd(p + i - 1);
        const __m256d vr = _mm256_loadu_pd(r + i);
        _mm256_storeu_pd(r + i, _mm256_fmadd_pd(vh, _mm256_sub_pd(cur, prev), vr));
    }
    for (; i < n; ++i) r[i] = std::fma(h, p[i] - p[i - 1], r[i]);
}

namespace {

inline __m256d site_energy_vec(const Potential& pot, __m256d vr, __m256d vp) {
    const __m256d half = _mm256_set1_pd(0.5);
    const __m256d halfp = _mm256_mul_pd(half, vp);
    __m256d v;
    switch (pot.kind) {
        case Potential::Kind::harmonic:
            v = _mm256_mul_pd(_mm256_mul_pd(half, vr), vr);
            break;
        case Potential::Kind::coslattice: {
            const __m256d t = _mm256_mul_pd(_mm256_mul_pd(half, vr), vr);
            const __m256d omc = _mm256_sub_pd(_mm256_set1_pd(1.0), vsincos(vr).c);
            v = _mm256_fmadd_pd(_mm256_set1_pd(pot.a), omc, t);
            break;
        }
        default: {  // fpu
            const __m256d r2 = _mm256_mul_pd(vr, vr);
            const __m256d qb = _mm256_mul_pd(_mm256_set1_pd(0.25 * pot.b), r2);
            v = _mm256_fmadd_pd(qb, r2, _mm256_mul_pd(half, r2));
            break;
        }
    }
    return _mm256_fmadd_pd(halfp, vp, v);
}

}  // namespace

void site_energy(const Potential& pot, const double* r, const double* p,
                 double* e, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(
            e + i, site_energy_vec(pot, _mm256_loadu_pd(r + i), _mm256_loadu_pd(p + i)));
    if (i < n) ref::site_energy(pot, r + i, p + i, e + i, n - i);
}

double total_energy(const Potential& pot, const double* r, const double* p,
                    std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        acc = _mm256_add_pd(
            acc, site_energy_vec(pot, _mm256_loadu_pd(r + i), _mm256_loadu_pd(p + i)));
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, acc);
    double total = ((lanes[0] + lanes[1]) + lanes[2]) + lanes[3];
    if (i < n) total += ref::total_energy(pot, r + i, p + i, n - i);
    return total;
}

}  // namespace chainflow::kernels::avx2
