#pragma once

#include <cmath>

namespace loschmidt {

inline constexpr double two_pi = 6.28318530717958647692528676655900577;
inline constexpr double pi = 3.14159265358979323846264338327950288;

// Wrap an angle-like coordinate to the canonical range [0, 2pi).
// Single floor plus branch corrections; deterministic for any finite input.
inline double wrap_angle(double x) noexcept {
    double r = x - two_pi * std::floor(x * (1.0 / two_pi));
    if (r >= two_pi) r -= two_pi;
    if (r < 0.0) r += two_pi;
    return r;
}

// A point (q, p) on the 2pi-periodic torus phase space.
struct PhasePoint {
    double q = 0.0;  // angle, canonical range [0, 2pi)
    double p = 0.0;  // momentum per step, canonical range [0, 2pi)

    bool operator==(const PhasePoint&) const = default;
};

// Parameters of the (perturbed) standard map.  The epsilon term enters the
// trajectory evolution only when with_perturbation is set; the action
// difference always scales with epsilon.
struct MapParams {
    double k = 0.0;                 // kick strength, k >= 0
    double epsilon = 0.0;           // perturbation strength
    bool with_perturbation = false; // evolve H^eps instead of H^0
};

}  // namespace loschmidt
