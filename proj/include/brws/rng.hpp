#ifndef BRWS_RNG_HPP
#define BRWS_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "brws/errors.hpp"

namespace brws {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Counter-derived RNG stream. A stream is identified by (seed, id_a, id_b);
/// replica streams therefore do not depend on how many replicas run or on
/// which worker executes them.
class RngStream {
  public:
    explicit RngStream(std::uint64_t seed, std::uint64_t id_a = 0, std::uint64_t id_b = 0) {
        std::uint64_t s = seed;
        std::uint64_t k = splitmix64(s);
        s ^= 0xd1b54a32d192ed03ULL * (id_a + 1);
        k ^= splitmix64(s);
        s ^= 0x8cb92ba72f3d8dd7ULL * (id_b + 1);
        k ^= splitmix64(s);
        eng_.seed(k);
    }

    std::uint64_t next_u64() { return eng_(); }

    /// Uniform double in (0,1).
    double u01() {
        // 53-bit mantissa; never returns 0 or 1
        return (static_cast<double>(eng_() >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Uniform integer in [0, n). n must be > 0.
    std::uint64_t below(std::uint64_t n) {
        // rejection to kill modulo bias
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = eng_();
        } while (x >= limit);
        return x % n;
    }

    /// Standard normal (Box-Muller, cached spare).
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u = u01(), v = u01();
        double r = std::sqrt(-2.0 * std::log(u));
        double a = 2.0 * M_PI * v;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    double normal(double mu, double sd) { return mu + sd * normal(); }

    /// Poisson via Knuth's product method; supported up to lambda = 64.
    std::uint64_t poisson(double lambda) {
        if (lambda < 0 || lambda > 64.0)
            throw NumericsError("poisson: lambda out of supported range [0,64]");
        double limit = std::exp(-lambda);
        std::uint64_t k = 0;
        double p = 1.0;
        for (;;) {
            p *= u01();
            if (p <= limit) return k;
            ++k;
        }
    }

    /// Exact binomial draw (delegates to the standard library sampler).
    std::uint64_t binomial(std::uint64_t n, double p) {
        if (n == 0 || p <= 0.0) return 0;
        if (p >= 1.0) return n;
        std::binomial_distribution<std::uint64_t> d(n, p);
        return d(eng_);
    }

    std::mt19937_64& engine() { return eng_; }

  private:
    std::mt19937_64 eng_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace brws

#endif
