#pragma once

#include <cstdint>

#include "loschmidt/phase_space.hpp"

namespace loschmidt {

// Counter-based pseudorandom stream: every output is a pure function of
// (seed, stream, counter), so trajectory i always sees the same numbers no
// matter which worker generates it or in what order.  The generator is the
// SplitMix64 finalizer over a Weyl sequence keyed per stream.
class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t stream) noexcept
        : state_(mix(seed ^ mix(stream + golden_)) + golden_) {}

    std::uint64_t next_u64() noexcept {
        const std::uint64_t z = mix(state_);
        state_ += golden_;
        return z;
    }

    // uniform in [0, 1) with 53-bit resolution
    double next_unit() noexcept {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // uniform in [0, 2pi)
    double next_angle() noexcept { return next_unit() * two_pi; }

private:
    static constexpr std::uint64_t golden_ = 0x9e3779b97f4a7c15ULL;

    static std::uint64_t mix(std::uint64_t z) noexcept {
        z ^= z >> 30;
        z *= 0xbf58476d1ce4e5b9ULL;
        z ^= z >> 27;
        z *= 0x94d049bb133111ebULL;
        z ^= z >> 31;
        return z;
    }

    std::uint64_t state_;
};

}  // namespace loschmidt
