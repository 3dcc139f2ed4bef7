#pragma once

#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>

#include "mcfvc/errors.hpp"

namespace mcfvc {

// splitmix64, used to derive independent stream seeds from (seed, tags).
inline uint64_t mix_seed(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline uint64_t derive_seed(uint64_t seed, uint64_t stream, uint64_t step = 0) {
    return mix_seed(mix_seed(seed ^ 0x5851f42d4c957f2dULL) + mix_seed(stream) + step);
}

// Named sub-streams so training, mask sampling, data generation etc. never
// share draws. Keeping them apart makes "mask disabled" runs consume the same
// training stream as plain fine-tuning.
enum class RngStream : uint64_t {
    Dataset = 1,
    ModelInit = 2,
    Training = 3,
    LinearMask = 4,
    GlossaryRows = 5,
    Split = 6,
};

// Deterministic generator with a pinned output mapping (xoshiro-free: plain
// splitmix64 state walk). All real-valued draws are defined here rather than
// through std::*_distribution so that generated files are stable across
// standard libraries.
class Rng {
  public:
    explicit Rng(uint64_t seed = 0) : state_(mix_seed(seed ^ 0x9e3779b97f4a7c15ULL)) {}

    static Rng for_stream(uint64_t seed, RngStream stream, uint64_t step = 0) {
        return Rng(derive_seed(seed, static_cast<uint64_t>(stream), step));
    }

    uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1). 53-bit mantissa.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Strictly inside (0, 1); safe to feed into log().
    double uniform_open() {
        return (static_cast<double>(next_u64() >> 12) + 0.5) * 0x1.0p-52;
    }

    // Box-Muller (one value per call; the pair's second half is discarded to
    // keep the draw count independent of call pattern).
    double normal(double mean = 0.0, double stddev = 1.0) {
        double u1 = uniform_open();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        return mean + stddev * r * std::cos(2.0 * M_PI * u2);
    }

    // Gumbel(0,1) via -log(-log(u)).
    double gumbel() { return -std::log(-std::log(uniform_open())); }

    bool bernoulli(double p) { return uniform() < p; }

    // Uniform integer in [0, n).
    uint64_t below(uint64_t n) {
        if (n == 0) throw DomainError("Rng::below: n must be positive");
        return next_u64() % n;
    }

    std::string serialize() const {
        std::ostringstream os;
        os << state_;
        return os.str();
    }

    static Rng deserialize(const std::string& s) {
        Rng r;
        std::istringstream is(s);
        is >> r.state_;
        if (!is) throw ConfigError("Rng::deserialize: malformed state '" + s + "'");
        return r;
    }

    uint64_t raw_state() const { return state_; }

  private:
    uint64_t state_;
};

// Fisher-Yates shuffle driven by Rng (std::shuffle's draw pattern is
// implementation-defined; this one is pinned).
template <typename Vec>
void shuffle(Vec& v, Rng& rng) {
    for (size_t i = v.size(); i > 1; --i) {
        size_t j = static_cast<size_t>(rng.below(i));
        std::swap(v[i - 1], v[j]);
    }
}

}  // namespace mcfvc
