#pragma once

// Counter-keyed random streams. A stream is addressed by (master seed, object id,
// replica index); the same address always yields the same draws.

#include <cmath>
#include <cstdint>
#include <limits>

#include "error.hpp"

namespace gcp {

inline constexpr std::uint64_t splitmix64(std::uint64_t& x) {
    std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline constexpr std::uint64_t mix64(std::uint64_t x) { return splitmix64(x); }

struct StreamKey {
    std::uint64_t hi = 0;
    std::uint64_t lo = 0;
    friend bool operator==(const StreamKey&, const StreamKey&) = default;
    friend auto operator<=>(const StreamKey&, const StreamKey&) = default;
};

// Object ids are (kind << 28) | index; indices above 2^28 are rejected.
namespace obj {
inline constexpr std::uint32_t cure = 1;
inline constexpr std::uint32_t trans = 2;
inline constexpr std::uint32_t env = 3;
inline constexpr std::uint32_t aux = 4;
inline constexpr std::uint32_t perc = 5;

inline std::uint64_t id(std::uint32_t kind, std::uint64_t index) {
    require(index < (1ULL << 28), errc::too_large, "object index exceeds 2^28");
    return (std::uint64_t(kind) << 28) | index;
}
} // namespace obj

inline StreamKey stream_key(std::uint64_t master, std::uint64_t object, std::uint64_t replica) {
    require(object < (1ULL << 32) && replica < (1ULL << 32), errc::too_large,
            "object id and replica index must fit in 32 bits");
    return {master, (object << 32) | replica};
}

// xoshiro256** seeded from the stream key.
class Rng {
public:
    using result_type = std::uint64_t;

    Rng() : Rng(StreamKey{}) {}
    explicit Rng(StreamKey key) {
        std::uint64_t sm = key.hi ^ mix64(key.lo ^ 0x5851f42d4c957f2dULL);
        for (auto& w : s_) w = splitmix64(sm);
        if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 1;
    }

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() {
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // [0, 1) with 53 random bits.
    double uniform() { return double((*this)() >> 11) * 0x1.0p-53; }
    // (0, 1]
    double uniform_pos() { return 1.0 - uniform(); }
    double uniform(double a, double b) { return a + (b - a) * uniform(); }
    bool bernoulli(double p) { return uniform() < p; }
    double exponential(double rate) { return -std::log(uniform_pos()) / rate; }

    std::uint64_t below(std::uint64_t n) {
        // Lemire's nearly-divisionless method.
        __uint128_t m = __uint128_t((*this)()) * n;
        auto l = std::uint64_t(m);
        if (l < n) {
            std::uint64_t t = -n % n;
            while (l < t) {
                m = __uint128_t((*this)()) * n;
                l = std::uint64_t(m);
            }
        }
        return std::uint64_t(m >> 64);
    }

    double normal() {
        // Marsaglia polar method; one value per call keeps the stream stateless.
        for (;;) {
            double u = 2.0 * uniform() - 1.0, v = 2.0 * uniform() - 1.0;
            double s = u * u + v * v;
            if (s > 0.0 && s < 1.0) return u * std::sqrt(-2.0 * std::log(s) / s);
        }
    }

    // Marsaglia-Tsang.
    double gamma(double shape) {
        if (shape < 1.0) {
            double u = uniform_pos();
            return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
        }
        const double d = shape - 1.0 / 3.0, c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x, v;
            do {
                x = normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            double u = uniform_pos();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
            if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
        }
    }

    long poisson(double mean) {
        if (mean < 30.0) {
            double L = std::exp(-mean), p = 1.0;
            long k = 0;
            do {
                ++k;
                p *= uniform();
            } while (p > L);
            return k - 1;
        }
        // Count unit-rate arrivals in [0, mean].
        long k = 0;
        double t = 0.0;
        for (;;) {
            t += exponential(1.0);
            if (t > mean) return k;
            ++k;
        }
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    std::uint64_t s_[4];
};

inline Rng derive_stream(std::uint64_t master, std::uint64_t object, std::uint64_t replica) {
    return Rng(stream_key(master, object, replica));
}

// Sub-seed for a named sub-experiment (e.g. one point of a parameter sweep that
// must not share randomness with the others).
inline std::uint64_t sub_seed(std::uint64_t master, std::uint64_t tag) {
    std::uint64_t x = master ^ mix64(tag + 0x632be59bd9b4e019ULL);
    return splitmix64(x);
}

} // namespace gcp
