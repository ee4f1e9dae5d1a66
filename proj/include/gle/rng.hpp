#pragma once

#include <array>
#include <cstdint>

namespace gle {

// Philox4x32-10 counter-based generator. Every random number in an ensemble
// is a pure function of (seed, stream, step, slot), so results do not depend
// on scheduling or worker count.
std::array<uint32_t, 4> philox4x32(std::array<uint32_t, 4> ctr,
                                   std::array<uint32_t, 2> key);

// Standard normal quantile (Wichura's AS241, double precision).
double normal_quantile(double p);

// Namespaced counter layout: c0 = stream, c1 = step, c2 = slot | purpose<<16,
// c3 = draw. "purpose" keeps independent uses (path noise, Gibbs sampling,
// bootstraps, ...) on disjoint counters under one master seed.
enum class RngPurpose : uint32_t {
    path_noise = 0,
    gibbs = 1,
    bootstrap = 2,
    stream = 3,
    em_noise = 4,
};

class CounterRng {
public:
    explicit CounterRng(uint64_t seed) : seed_(seed) {}

    uint64_t seed() const { return seed_; }

    // Uniform on the open interval (0, 1), 53 usable bits.
    double uniform(uint32_t stream, uint32_t step, RngPurpose purpose,
                   uint32_t slot, uint32_t draw = 0) const;

    double normal(uint32_t stream, uint32_t step, RngPurpose purpose,
                  uint32_t slot, uint32_t draw = 0) const;

private:
    uint64_t seed_;
};

// Sequential view of a CounterRng: a single (purpose, stream) lane consumed
// draw by draw. Deterministic given (seed, stream).
class RngStream {
public:
    RngStream(uint64_t seed, uint32_t stream, RngPurpose purpose = RngPurpose::stream)
        : rng_(seed), stream_(stream), purpose_(purpose) {}

    double next_uniform() {
        const uint64_t n = count_++;
        return rng_.uniform(stream_, static_cast<uint32_t>(n >> 32), purpose_, 0,
                            static_cast<uint32_t>(n));
    }
    double next_normal() { return normal_quantile(next_uniform()); }

private:
    CounterRng rng_;
    uint32_t stream_;
    RngPurpose purpose_;
    uint64_t count_ = 0;
};

}  // namespace gle
