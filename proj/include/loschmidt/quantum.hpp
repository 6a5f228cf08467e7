#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "loschmidt/dr_fidelity.hpp"
#include "loschmidt/fft.hpp"
#include "loschmidt/phase_space.hpp"

namespace loschmidt {

// State on the discrete position grid q_j = 2pi j / n.
struct QuantumState {
    std::vector<std::complex<double>> amplitudes;

    std::size_t dim() const noexcept { return amplitudes.size(); }

    double norm_sq() const noexcept {
        double s = 0.0;
        for (const auto& a : amplitudes) s += std::norm(a);
        return s;
    }
};

// Basis vector at the grid index nearest Q * n / (2pi).
inline QuantumState position_state(std::size_t n, double Q) {
    if (n == 0) throw std::invalid_argument("position_state: n must be positive");
    if (Q < 0.0 || Q >= two_pi) throw std::invalid_argument("position_state: Q must lie in [0, 2pi)");
    const auto idx = static_cast<std::size_t>(
        static_cast<std::uint64_t>(std::llround(Q * static_cast<double>(n) / two_pi)) % n);
    QuantumState psi;
    psi.amplitudes.assign(n, {0.0, 0.0});
    psi.amplitudes[idx] = {1.0, 0.0};
    return psi;
}

inline std::size_t position_grid_index(std::size_t n, double Q) {
    return static_cast<std::size_t>(
        static_cast<std::uint64_t>(std::llround(Q * static_cast<double>(n) / two_pi)) % n);
}

// One period of the quantized (perturbed) standard map on an n-state torus:
// kick phase exp(-i V_tot(q_j)/hbar) in position space, then kinetic phase
// exp(-i p_l^2 / (2 hbar)) on the Fourier modes, p_l = hbar * l with l the
// centered mode index.  V_tot(q) = k cos q + (eps/2) cos 2q reproduces the
// classical kicks.  Torus quantization fixes hbar = 2pi/n; other values are
// accepted but flagged as non-canonical.
class KickedPropagator {
public:
    KickedPropagator(std::size_t n, double k, double epsilon, double hbar = 0.0)
        : n_(n), k_(k), epsilon_(epsilon), dft_(n) {
        if (n == 0) throw std::invalid_argument("KickedPropagator: n must be positive");
        const double canonical = two_pi / static_cast<double>(n);
        hbar_ = hbar > 0.0 ? hbar : canonical;
        canonical_hbar_ = hbar_ == canonical;
        kick_.resize(n);
        kinetic_.resize(n);
        for (std::size_t j = 0; j < n; ++j) {
            const double q = two_pi * static_cast<double>(j) / static_cast<double>(n);
            const double v = k_ * std::cos(q) + 0.5 * epsilon_ * std::cos(2.0 * q);
            const double ang = -v / hbar_;
            kick_[j] = {std::cos(ang), std::sin(ang)};
        }
        for (std::size_t j = 0; j < n; ++j) {
            const std::int64_t l = centered_mode(j);
            double ang;
            if (canonical_hbar_) {
                // p_l^2/(2 hbar) = pi l^2 / n; reduce l^2 mod 2n exactly
                const std::uint64_t r =
                    (static_cast<std::uint64_t>(l * l)) % (2 * static_cast<std::uint64_t>(n));
                ang = -pi * static_cast<double>(r) / static_cast<double>(n);
            } else {
                const double p = hbar_ * static_cast<double>(l);
                ang = -p * p / (2.0 * hbar_);
            }
            kinetic_[j] = {std::cos(ang), std::sin(ang)};
        }
    }

    std::size_t dim() const noexcept { return n_; }
    double hbar() const noexcept { return hbar_; }
    double k() const noexcept { return k_; }
    double epsilon() const noexcept { return epsilon_; }
    bool power_of_two_grid() const noexcept { return dft_.power_of_two(); }
    bool canonical_hbar() const noexcept { return canonical_hbar_; }

    void apply(QuantumState& psi) const {
        if (psi.dim() != n_) throw std::invalid_argument("KickedPropagator: dimension mismatch");
        auto* a = psi.amplitudes.data();
        for (std::size_t j = 0; j < n_; ++j) a[j] *= kick_[j];
        dft_.forward(a);
        for (std::size_t j = 0; j < n_; ++j) a[j] *= kinetic_[j];
        dft_.inverse(a);
    }

    std::int64_t centered_mode(std::size_t j) const noexcept {
        const auto half = static_cast<std::int64_t>((n_ + 1) / 2);
        const auto jj = static_cast<std::int64_t>(j);
        return jj < half ? jj : jj - static_cast<std::int64_t>(n_);
    }

private:
    std::size_t n_;
    double k_, epsilon_, hbar_;
    bool canonical_hbar_ = true;
    Dft dft_;
    std::vector<std::complex<double>> kick_, kinetic_;
};

inline void apply_propagator(QuantumState& psi, const KickedPropagator& prop) { prop.apply(psi); }

// Exact quantum fidelity M(t) = |<psi_eps(t)|psi_0(t)>|^2, each branch
// propagated by its own split-operator map.
inline FidelityCurve quantum_fidelity(const QuantumState& psi0, std::size_t n, double k,
                                      double epsilon, double hbar, int T) {
    if (psi0.dim() != n) throw std::invalid_argument("quantum_fidelity: dimension mismatch");
    if (T < 0) throw std::invalid_argument("quantum_fidelity: T must be >= 0");
    const KickedPropagator u0(n, k, 0.0, hbar);
    const KickedPropagator ue(n, k, epsilon, hbar);
    QuantumState a = psi0, b = psi0;
    FidelityCurve out;
    out.method = FidelityMethod::QuantumExact;
    out.times.resize(static_cast<std::size_t>(T) + 1);
    out.m.resize(static_cast<std::size_t>(T) + 1);
    for (int t = 0; t <= T; ++t) {
        std::complex<double> overlap{0.0, 0.0};
        for (std::size_t j = 0; j < n; ++j)
            overlap += std::conj(b.amplitudes[j]) * a.amplitudes[j];
        out.times[static_cast<std::size_t>(t)] = t;
        out.m[static_cast<std::size_t>(t)] = std::norm(overlap);
        if (t < T) {
            u0.apply(a);
            ue.apply(b);
        }
    }
    return out;
}

}  // namespace loschmidt
