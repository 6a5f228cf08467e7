#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

#include "loschmidt/phase_space.hpp"

namespace loschmidt {

// One period of the (perturbed) standard map:
//   p' = p + k sin q + eps sin 2q   (mod 2pi)
//   q' = q + p'                     (mod 2pi)
// The eps kick is applied only when params.with_perturbation is set.
inline PhasePoint step_map(PhasePoint x, const MapParams& params) noexcept {
    double kick = params.k * std::sin(x.q);
    if (params.with_perturbation) kick += params.epsilon * std::sin(2.0 * x.q);
    const double p1 = wrap_angle(x.p + kick);
    const double q1 = wrap_angle(x.q + p1);
    return {q1, p1};
}

// Inverse map: q = q' - p', then undo the kick at q.
inline PhasePoint step_map_inverse(PhasePoint x, const MapParams& params) noexcept {
    const double q0 = wrap_angle(x.q - x.p);
    double kick = params.k * std::sin(q0);
    if (params.with_perturbation) kick += params.epsilon * std::sin(2.0 * q0);
    const double p0 = wrap_angle(x.p - kick);
    return {q0, p0};
}

// Perturbation potential V(q) = (1/2) cos 2q.  The momentum kick eps sin 2q
// equals -eps dV/dq, and the branch with zero mean over the torus is used so
// correlators need no mean subtraction.
inline double perturbation_potential(double q) noexcept {
    return 0.5 * std::cos(2.0 * q);
}

// dV/dq = -sin 2q; enters the force-force correlator as (dV/dq)^2.
inline double perturbation_gradient(double q) noexcept {
    return -std::sin(2.0 * q);
}

// Cumulative action difference DeltaS(x0, t) along the unperturbed
// trajectory, for t = 0..T.
struct ActionSeries {
    PhasePoint initial{};
    std::vector<double> delta_s;  // delta_s[0] = 0; length T+1

    int steps() const noexcept { return static_cast<int>(delta_s.size()) - 1; }
};

// DeltaS(x0, t) = -eps * sum_{n=0}^{t-1} V(q_n), with q_n from the
// unperturbed trajectory.  The potential sum is accumulated independently of
// eps, so the series is exactly linear in eps.
inline ActionSeries propagate_with_action(PhasePoint x0, const MapParams& params, int steps) {
    if (steps < 0) throw std::invalid_argument("propagate_with_action: steps must be >= 0");
    MapParams base = params;
    base.with_perturbation = false;
    ActionSeries out;
    out.initial = x0;
    out.delta_s.resize(static_cast<std::size_t>(steps) + 1);
    out.delta_s[0] = 0.0;
    PhasePoint x = x0;
    double vsum = 0.0;
    for (int t = 1; t <= steps; ++t) {
        vsum += perturbation_potential(x.q);
        x = step_map(x, base);
        out.delta_s[static_cast<std::size_t>(t)] = -params.epsilon * vsum;
    }
    return out;
}

// Jacobian of one map step at q (unperturbed trajectory coordinates):
//   d(q',p')/d(q,p) = [[1 + c, 1], [c, 1]],  c = k cos q (+ 2 eps cos 2q).
struct StepJacobian {
    double dqq, dqp, dpq, dpp;
};

inline StepJacobian step_jacobian(double q, const MapParams& params) noexcept {
    double c = params.k * std::cos(q);
    if (params.with_perturbation) c += 2.0 * params.epsilon * std::cos(2.0 * q);
    return {1.0 + c, 1.0, c, 1.0};
}

// Accumulated tangent map along a trajectory, stored as
//   J = exp(log_scale) * [[a, b], [c, d]]
// with entries renormalized whenever they exceed 1e100.
struct TangentFrame {
    double a = 1.0, b = 0.0, c = 0.0, d = 1.0;
    double log_scale = 0.0;

    // log of the largest singular value of J; entries are rescaled first so
    // the Gram matrix cannot overflow even just below the renorm threshold
    double log_sv_max() const noexcept {
        const double s = std::max(std::max(std::fabs(a), std::fabs(b)),
                                  std::max(std::fabs(c), std::fabs(d)));
        if (s == 0.0) return -std::numeric_limits<double>::infinity();
        const double an = a / s, bn = b / s, cn = c / s, dn = d / s;
        const double g11 = an * an + cn * cn, g22 = bn * bn + dn * dn, g12 = an * bn + cn * dn;
        const double tr = g11 + g22;
        const double disc = std::sqrt(std::max(0.0, (g11 - g22) * (g11 - g22) + 4.0 * g12 * g12));
        return 0.5 * std::log(0.5 * (tr + disc)) + std::log(s) + log_scale;
    }

    // determinant of the scaled entries times exp(2 log_scale); loses meaning
    // once the frame is numerically rank-one (use TangentAccumulator for
    // long-time symplecticity checks)
    double det() const noexcept {
        return (a * d - b * c) * std::exp(2.0 * log_scale);
    }
};

// Per-step accumulated Jacobians J_t = DJ(x_{t-1}) ... DJ(x_0), t = 1..T.
inline std::vector<TangentFrame> propagate_tangent(PhasePoint x0, const MapParams& params, int steps) {
    if (steps < 1) throw std::invalid_argument("propagate_tangent: steps must be >= 1");
    std::vector<TangentFrame> frames;
    frames.reserve(static_cast<std::size_t>(steps));
    TangentFrame f;
    PhasePoint x = x0;
    for (int t = 0; t < steps; ++t) {
        const StepJacobian j = step_jacobian(x.q, params);
        const TangentFrame g = f;
        f.a = j.dqq * g.a + j.dqp * g.c;
        f.b = j.dqq * g.b + j.dqp * g.d;
        f.c = j.dpq * g.a + j.dpp * g.c;
        f.d = j.dpq * g.b + j.dpp * g.d;
        const double mx = std::max(std::max(std::fabs(f.a), std::fabs(f.b)),
                                   std::max(std::fabs(f.c), std::fabs(f.d)));
        if (mx > 1e100) {
            f.a /= mx; f.b /= mx; f.c /= mx; f.d /= mx;
            f.log_scale += std::log(mx);
        }
        x = step_map(x, params);
        frames.push_back(f);
    }
    return frames;
}

// QR-factored tangent propagation (Benettin).  Tracks both stretching
// exponents, so the determinant of the accumulated Jacobian is available in
// log space at any time without cancellation: log|det J| = log_r1 + log_r2.
struct TangentAccumulator {
    double e1q = 1.0, e1p = 0.0;  // orthonormal frame after last step
    double e2q = 0.0, e2p = 1.0;
    double log_r1 = 0.0;          // accumulated log stretching, leading
    double log_r2 = 0.0;          // and subleading direction
    int steps_done = 0;

    void step(double q, const MapParams& params) noexcept {
        const StepJacobian j = step_jacobian(q, params);
        double v1q = j.dqq * e1q + j.dqp * e1p;
        double v1p = j.dpq * e1q + j.dpp * e1p;
        double v2q = j.dqq * e2q + j.dqp * e2p;
        double v2p = j.dpq * e2q + j.dpp * e2p;
        const double r1 = std::hypot(v1q, v1p);
        v1q /= r1; v1p /= r1;
        const double proj = v1q * v2q + v1p * v2p;
        v2q -= proj * v1q; v2p -= proj * v1p;
        const double r2 = std::hypot(v2q, v2p);
        e1q = v1q; e1p = v1p;
        e2q = v2q / r2; e2p = v2p / r2;
        log_r1 += std::log(r1);
        log_r2 += std::log(r2);
        ++steps_done;
    }

    double log_det() const noexcept { return log_r1 + log_r2; }
    double lyapunov() const noexcept { return steps_done > 0 ? log_r1 / steps_done : 0.0; }
};

struct LyapunovEstimate {
    double lambda = 0.0;        // leading exponent, per map step
    double log_det_drift = 0.0; // max |log det J| seen (symplecticity residual)
    double unstable_q = 1.0;    // final-frame unstable direction (unit vector)
    double unstable_p = 0.0;
};

inline LyapunovEstimate estimate_lyapunov(PhasePoint x0, const MapParams& params, int steps) {
    if (steps < 1) throw std::invalid_argument("estimate_lyapunov: steps must be >= 1");
    TangentAccumulator acc;
    PhasePoint x = x0;
    double worst = 0.0;
    for (int t = 0; t < steps; ++t) {
        acc.step(x.q, params);
        worst = std::max(worst, std::fabs(acc.log_det()));
        x = step_map(x, params);
    }
    return {acc.lyapunov(), worst, acc.e1q, acc.e1p};
}

}  // namespace loschmidt
