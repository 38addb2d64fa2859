#include <doctest.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "chainflow/kernels.hpp"
#include "chainflow/rng.hpp"
#include "chainflow/vecmath.hpp"

using namespace chainflow;

namespace {

std::vector<double> random_array(std::size_t n, double scale, std::uint64_t stream) {
    Rng rng(42, stream);
    std::vector<double> v(n);
    for (auto& x : v) x = scale * (2.0 * rng.uniform() - 1.0);
    return v;
}

}  // namespace

TEST_CASE("ksin/kcos match libm to a few ulp over the working range") {
    double max_err_s = 0.0, max_err_c = 0.0;
    for (int i = 0; i <= 200000; ++i) {
        const double x = -60.0 + 120.0 * i / 200000.0;
        max_err_s = std::max(max_err_s, std::fabs(vm::ksin(x) - std::sin(x)));
        max_err_c = std::max(max_err_c, std::fabs(vm::kcos(x) - std::cos(x)));
    }
    CHECK(max_err_s < 1e-15);
    CHECK(max_err_c < 1e-15);
    // large-argument fallback path
    CHECK(vm::ksin(3.0e7) == doctest::Approx(std::sin(3.0e7)).epsilon(1e-12));
}

TEST_CASE("scalar kernels: hand values") {
    const auto pot = make_harmonic();
    std::vector<double> r{1.0, 2.0, -1.0}, f(3);
    kernels::ref::force(pot, r.data(), f.data(), 3);
    CHECK(f[0] == 1.0);
    CHECK(f[2] == -1.0);

    std::vector<double> p{0.0, 0.0, 0.0};
    kernels::ref::kick(p.data(), f.data(), 0.5, 1.0, 3);
    CHECK(p[0] == doctest::Approx(1.0));    // f2 - f1 = 1
    CHECK(p[1] == doctest::Approx(-3.0));   // f3 - f2 = -3
    CHECK(p[2] == doctest::Approx(1.5));    // tau - f3 = 1.5

    std::vector<double> rr{0.0, 0.0, 0.0};
    kernels::ref::drift(rr.data(), p.data(), 1.0, 3);
    CHECK(rr[0] == doctest::Approx(1.0));   // p1 - wall
    CHECK(rr[1] == doctest::Approx(-4.0));  // p2 - p1
    CHECK(rr[2] == doctest::Approx(4.5));   // p3 - p2
}

#if defined(CHAINFLOW_HAVE_AVX2)
TEST_CASE("avx2 kernels are bitwise equal to the scalar reference") {
    if (!kernels::supported(kernels::Isa::avx2)) {
        MESSAGE("avx2 not supported on this host; skipping");
        return;
    }
    for (const Potential& pot :
         {make_harmonic(), make_coslattice(0.5), make_fpu(1.0)}) {
        for (std::size_t n : {1ul, 4ul, 7ul, 64ul, 1001ul}) {
            const auto r = random_array(n, 8.0, 1 + n);
            const auto p = random_array(n, 3.0, 100 + n);

            std::vector<double> f_ref(n), f_vec(n);
            kernels::ref::force(pot, r.data(), f_ref.data(), n);
            kernels::avx2::force(pot, r.data(), f_vec.data(), n);
            CHECK(std::memcmp(f_ref.data(), f_vec.data(), n * sizeof(double)) == 0);

            std::vector<double> p_ref = p, p_vec = p;
            kernels::ref::kick(p_ref.data(), f_ref.data(), 0.37, 1e-3, n);
            kernels::avx2::kick(p_vec.data(), f_ref.data(), 0.37, 1e-3, n);
            CHECK(std::memcmp(p_ref.data(), p_vec.data(), n * sizeof(double)) == 0);

            std::vector<double> r_ref = r, r_vec = r;
            kernels::ref::drift(r_ref.data(), p.data(), 1e-3, n);
            kernels::avx2::drift(r_vec.data(), p.data(), 1e-3, n);
            CHECK(std::memcmp(r_ref.data(), r_vec.data(), n * sizeof(double)) == 0);

            std::vector<double> e_ref(n), e_vec(n);
            kernels::ref::site_energy(pot, r.data(), p.data(), e_ref.data(), n);
            kernels::avx2::site_energy(pot, r.data(), p.data(), e_vec.data(), n);
            CHECK(std::memcmp(e_ref.data(), e_vec.data(), n * sizeof(double)) == 0);

            // total_energy is a reduction: lane-partial order differs, so
            // only ULP-level agreement is promised there.
            const double h_ref = kernels::ref::total_energy(pot, r.data(), p.data(), n);
            const double h_vec = kernels::avx2::total_energy(pot, r.data(), p.data(), n);
            CHECK(h_vec == doctest::Approx(h_ref).epsilon(1e-13));
        }
    }
}
#endif

TEST_CASE("kernel dispatch honors explicit selection") {
    const auto saved = kernels::active();
    CHECK(kernels::set_active("scalar"));
    CHECK(kernels::active() == kernels::Isa::scalar);
    CHECK(kernels::set_active("auto"));
    CHECK_FALSE(kernels::set_active("sse9"));
    kernels::set_active(saved);
}
