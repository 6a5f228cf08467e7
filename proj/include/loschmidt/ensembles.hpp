#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "loschmidt/phase_space.hpp"
#include "loschmidt/rng.hpp"

namespace loschmidt {

enum class EnsembleKind {
    UniformTorus,   // rho_W = Omega^-1: q, p i.i.d. uniform on [0, 2pi)
    PositionState,  // rho_W = Omega_p^-1 delta(q - Q): q = Q, p uniform
    ExplicitList,   // caller-provided points
};

// How the p marginal is laid out.  Random is the default; GridP places p on
// the stratified midpoints (j + 1/2) * 2pi / count (and, for UniformTorus,
// q on a golden-ratio sequence so the lattice does not alias the dynamics).
enum class Placement { Random, GridP };

struct EnsembleSpec {
    EnsembleKind kind = EnsembleKind::UniformTorus;
    double q0 = 0.0;  // PositionState only: the fixed position Q
    std::size_t count = 1000;
    std::uint64_t seed = 0;
    Placement placement = Placement::Random;
    std::vector<PhasePoint> points;  // ExplicitList only

    bool operator==(const EnsembleSpec&) const = default;
};

// Trajectory pairs (x', x'') with x'' = x' shifted by -p_minus in momentum
// (wrapped); q is never altered.
struct PairSpec {
    EnsembleSpec base;
    double p_minus = 0.0;

    bool operator==(const PairSpec&) const = default;
};

inline PhasePoint sample_point(const EnsembleSpec& spec, std::size_t index) {
    switch (spec.kind) {
        case EnsembleKind::ExplicitList:
            return spec.points.at(index);
        case EnsembleKind::PositionState: {
            if (spec.placement == Placement::GridP) {
                const double p = two_pi * (static_cast<double>(index) + 0.5) /
                                 static_cast<double>(spec.count);
                return {spec.q0, p};
            }
            CounterRng rng(spec.seed, index);
            return {spec.q0, rng.next_angle()};
        }
        case EnsembleKind::UniformTorus: {
            if (spec.placement == Placement::GridP) {
                // golden-ratio low-discrepancy angle paired with stratified p
                const double golden_frac = 0.61803398874989484820;
                const double q = wrap_angle(two_pi * std::fmod((static_cast<double>(index) + 0.5) * golden_frac, 1.0));
                const double p = two_pi * (static_cast<double>(index) + 0.5) /
                                 static_cast<double>(spec.count);
                return {q, p};
            }
            CounterRng rng(spec.seed, index);
            const double q = rng.next_angle();
            const double p = rng.next_angle();
            return {q, p};
        }
    }
    throw std::logic_error("sample_point: unknown ensemble kind");
}

inline void validate(const EnsembleSpec& spec) {
    if (spec.count < 1) throw std::invalid_argument("EnsembleSpec.count must be >= 1");
    if (spec.kind == EnsembleKind::ExplicitList) {
        if (spec.points.empty())
            throw std::invalid_argument("EnsembleSpec: explicit-list ensemble with empty point list");
        if (spec.points.size() < spec.count)
            throw std::invalid_argument("EnsembleSpec: explicit-list shorter than requested count");
    }
}

// Deterministic: the same spec always yields the same sequence.
inline std::vector<PhasePoint> sample(const EnsembleSpec& spec) {
    validate(spec);
    std::vector<PhasePoint> out(spec.count);
    for (std::size_t i = 0; i < spec.count; ++i) out[i] = sample_point(spec, i);
    return out;
}

inline std::pair<PhasePoint, PhasePoint> sample_pair(const PairSpec& spec, std::size_t index) {
    const PhasePoint a = sample_point(spec.base, index);
    const PhasePoint b{a.q, wrap_angle(a.p - spec.p_minus)};
    return {a, b};
}

inline std::vector<std::pair<PhasePoint, PhasePoint>> sample_pairs(const PairSpec& spec) {
    validate(spec.base);
    if (spec.p_minus < 0.0) throw std::invalid_argument("PairSpec.p_minus must be >= 0");
    std::vector<std::pair<PhasePoint, PhasePoint>> out(spec.base.count);
    for (std::size_t i = 0; i < spec.base.count; ++i) out[i] = sample_pair(spec, i);
    return out;
}

}  // namespace loschmidt
