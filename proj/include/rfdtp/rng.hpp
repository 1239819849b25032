#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <string_view>

#include "rfdtp/common.hpp"

namespace rfdtp {

/// Seedable, portable pseudo-random generator (SplitMix64 core).
///
/// Every stochastic quantity in the toolkit is drawn from this generator so
/// that datasets and experiments regenerate identically from a seed,
/// independent of platform or standard-library version. std::mt19937 plus
/// the std distributions would not give that guarantee.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller (pairs cached).
    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log1p(-u1)); // log(1-u1), never log(0)
        const double a = two_pi * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    /// Circular complex normal with E[|z|^2] = 1.
    cxd cgaussian() {
        const double re = gaussian();
        const double im = gaussian();
        return cxd(re * 0.70710678118654752440, im * 0.70710678118654752440);
    }

    /// Documented seed-split: derives an independent stream seed from a
    /// master seed. Used for per-capture / per-stage seeds so parallel
    /// generation stays deterministic.
    static std::uint64_t derive(std::uint64_t master, std::uint64_t stream) {
        Rng g(master ^ (0x632be59bd9b4e019ULL + stream * 0x9e3779b97f4a7c15ULL));
        return g.next_u64();
    }

    /// Seed-split keyed by a label (FNV-1a of the label mixed with stream).
    static std::uint64_t derive(std::uint64_t master, std::string_view label,
                                std::uint64_t stream = 0) {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (const char ch : label) {
            h ^= static_cast<unsigned char>(ch);
            h *= 0x100000001b3ULL;
        }
        return derive(master ^ h, stream);
    }

private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

} // namespace rfdtp
