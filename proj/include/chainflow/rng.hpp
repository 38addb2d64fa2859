#pragma once

#include <cmath>
#include <cstdint>

namespace chainflow {

// splitmix64, used only to expand seeds into stream states.
inline std::uint64_t splitmix64(std::uint64_t& x) {
    x += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// xoshiro256++ with splitmix64-derived per-stream state.  A stream is
// addressed by (root seed, stream id); ensemble members own disjoint stream
// ids, so trajectories are reproducible independently of how many workers
// execute them.
class Rng {
public:
    Rng() : Rng(0, 0) {}

    Rng(std::uint64_t root_seed, std::uint64_t stream_id) {
        std::uint64_t x = root_seed ^ (0x9e3779b97f4a7c15ull * (stream_id + 1));
        for (auto& w : s_) w = splitmix64(x);
        if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 1;
        have_gauss_ = false;
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform on [0,1) with 53-bit resolution.  1.0 - uniform() is exactly
    // representable, which the antithetic sampling path relies on.
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

    // Standard normal via the Marsaglia polar method (second value cached).
    double gauss() {
        if (have_gauss_) {
            have_gauss_ = false;
            return cached_gauss_;
        }
        double v1, v2, s;
        do {
            v1 = 2.0 * uniform() - 1.0;
            v2 = 2.0 * uniform() - 1.0;
            s = v1 * v1 + v2 * v2;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        cached_gauss_ = v2 * f;
        have_gauss_ = true;
        return v1 * f;
    }

    // Exponential with unit rate, strictly positive.
    double exponential() {
        double u;
        do {
            u = uniform();
        } while (u == 0.0);
        return -std::log(u);
    }

    // Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        // Lemire-style rejection to avoid modulo bias.
        std::uint64_t x = next_u64();
        __uint128_t m = static_cast<__uint128_t>(x) * n;
        std::uint64_t l = static_cast<std::uint64_t>(m);
        if (l < n) {
            std::uint64_t t = -n % n;
            while (l < t) {
                x = next_u64();
                m = static_cast<__uint128_t>(x) * n;
                l = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    std::uint64_t s_[4];
    double cached_gauss_ = 0.0;
    bool have_gauss_ = false;
};

}  // namespace chainflow
