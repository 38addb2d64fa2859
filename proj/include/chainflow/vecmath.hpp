#pragma once

#include <cmath>

// Shared sin/cos used by both the scalar reference kernels and the AVX2
// variants.  The algorithm is the classic Cody-Waite pi/2 reduction with the
// Cephes minimax polynomials; every operation is a correctly rounded IEEE
// add/mul/fma, so a lane of the AVX2 mirror is bitwise identical to the
// scalar path.  Valid for |x| <= 1e6 (larger arguments fall back to libm,
// which the AVX2 path mirrors lane-wise).

namespace chainflow::vm {

inline constexpr double kTwoOverPi = 6.36619772367581382433e-01;
inline constexpr double kPio2A = 1.57079632673412561417e+00;  // first 33 bits of pi/2
inline constexpr double kPio2B = 6.07710050630396597660e-11;  // next 33 bits
inline constexpr double kPio2C = 2.02226624879595063154e-21;  // tail
inline constexpr double kReduceLimit = 1.0e6;

inline constexpr double kSinC[6] = {
    1.58962301576546568060e-10, -2.50507477628578072866e-8,
    2.75573136213857245213e-6,  -1.98412698295895385996e-4,
    8.33333333332211858878e-3,  -1.66666666666666307295e-1,
};

inline constexpr double kCosC[6] = {
    -1.13585365213876817300e-11, 2.08757008419747316778e-9,
    -2.75573141792967388112e-7,  2.48015872888517179954e-5,
    -1.38888888888730564116e-3,  4.16666666666665929218e-2,
};

// sin on [-pi/4, pi/4]
inline double sin_poly(double r) {
    const double z = r * r;
    double p = kSinC[0];
    p = std::fma(p, z, kSinC[1]);
    p = std::fma(p, z, kSinC[2]);
    p = std::fma(p, z, kSinC[3]);
    p = std::fma(p, z, kSinC[4]);
    p = std::fma(p, z, kSinC[5]);
    return std::fma(r * z, p, r);
}

// cos on [-pi/4, pi/4]
inline double cos_poly(double r) {
    const double z = r * r;
    double p = kCosC[0];
    p = std::fma(p, z, kCosC[1]);
    p = std::fma(p, z, kCosC[2]);
    p = std::fma(p, z, kCosC[3]);
    p = std::fma(p, z, kCosC[4]);
    p = std::fma(p, z, kCosC[5]);
    return std::fma(z * z, p, std::fma(-0.5, z, 1.0));
}

// Reduced argument and quadrant q in {0,1,2,3}; q is returned as a double.
inline double reduce_pio2(double x, double& q) {
    const double n = std::nearbyint(x * kTwoOverPi);
    double r = std::fma(-n, kPio2A, x);
    r = std::fma(-n, kPio2B, r);
    r = std::fma(-n, kPio2C, r);
    q = n - 4.0 * std::floor(n * 0.25);
    return r;
}

inline double ksin(double x) {
    if (!(std::fabs(x) <= kReduceLimit)) return std::sin(x);
    double q;
    const double r = reduce_pio2(x, q);
    const double s = sin_poly(r);
    const double c = cos_poly(r);
    if (q == 0.0) return s;
    if (q == 1.0) return c;
    if (q == 2.0) return -s;
    return -c;
}

inline double kcos(double x) {
    if (!(std::fabs(x) <= kReduceLimit)) return std::cos(x);
    double q;
    const double r = reduce_pio2(x, q);
    const double s = sin_poly(r);
    const double c = cos_poly(r);
    if (q == 0.0) return c;
    if (q == 1.0) return -s;
    if (q == 2.0) return -c;
    return s;
}

}  // namespace chainflow::vm
