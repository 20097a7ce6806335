#pragma once

// Deterministic 64-bit generator: xoshiro256++ seeded through splitmix64,
// with cheap substreams keyed by (seed, stream id). All samplers are
// implemented here so draws are reproducible independent of the C++ standard
// library in use. Generator id: "xoshiro256++/v1".

#include <cstdint>
#include <cmath>

#include "latvar/types.hpp"

namespace latvar {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

class Rng {
public:
    explicit Rng(std::uint64_t seed = 0, std::uint64_t stream = 0) {
        std::uint64_t sm = seed ^ (0x632be59bd9b4e019ULL * (stream + 1));
        for (auto& s : s_) s = splitmix64(sm);
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

    // Uniform on (0,1); never returns 0 or 1.
    double uniform() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * (1.0 / 9007199254740992.0);
    }

    double uniform(double a, double b) { return a + (b - a) * uniform(); }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        // polar Box-Muller
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * f;
        has_spare_ = true;
        return u * f;
    }

    double exponential() { return -std::log(uniform()); }

    double gamma(double shape) {
        // Marsaglia-Tsang; shape > 0
        if (shape < 1.0) {
            double u = uniform();
            return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
        }
        double d = shape - 1.0 / 3.0;
        double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x, v;
            do {
                x = normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            double u = uniform();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
            if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
        }
    }

    double chisq(double df) { return 2.0 * gamma(df / 2.0); }

    int bernoulli(double p) { return uniform() < p ? 1 : 0; }

    long poisson(double lambda) {
        if (lambda <= 0.0) return 0;
        if (lambda < 60.0) {
            // multiplicative inversion
            double L = std::exp(-lambda), p = 1.0;
            long k = 0;
            do {
                ++k;
                p *= uniform();
            } while (p > L);
            return k - 1;
        }
        // split recursively: Poisson(a+b) = Poisson(a) + Poisson(b)
        long half = poisson(lambda / 2.0);
        return half + poisson(lambda - lambda / 2.0);
    }

    double weibull(double scale, double shape) {
        return scale * std::pow(-std::log(uniform()), 1.0 / shape);
    }

    Vec normal_vec(Index n) {
        Vec out(n);
        for (Index i = 0; i < n; ++i) out[i] = normal();
        return out;
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::uint64_t s_[4];
    bool has_spare_ = false;
    double spare_ = 0.0;
};

} // namespace latvar
