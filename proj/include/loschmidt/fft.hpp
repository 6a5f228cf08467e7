#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "loschmidt/phase_space.hpp"

namespace loschmidt {

// Complex DFT for arbitrary length: iterative radix-2 for powers of two,
// Bluestein's chirp-z embedding otherwise.  Chirp phases are built from the
// exact residue j^2 mod 2n so no large-argument trig is evaluated.
// Convention: forward X_k = sum_j x_j e^{-2pi i jk/n}; inverse carries 1/n.
class Dft {
public:
    explicit Dft(std::size_t n) : n_(n) {
        if (n == 0) throw std::invalid_argument("Dft: n must be positive");
        pow2_ = (n & (n - 1)) == 0;
        if (pow2_) {
            build_twiddles(n_, tw_);
        } else {
            m_ = 1;
            while (m_ < 2 * n_ - 1) m_ <<= 1;
            build_twiddles(m_, tw_);
            chirp_.resize(n_);
            for (std::size_t j = 0; j < n_; ++j) {
                const std::uint64_t r = (static_cast<std::uint64_t>(j) * j) % (2 * n_);
                const double ang = -pi * static_cast<double>(r) / static_cast<double>(n_);
                chirp_[j] = {std::cos(ang), std::sin(ang)};
            }
            bfft_.assign(m_, {0.0, 0.0});
            bfft_[0] = {1.0, 0.0};
            for (std::size_t j = 1; j < n_; ++j) {
                const std::complex<double> b = std::conj(chirp_[j]);
                bfft_[j] = b;
                bfft_[m_ - j] = b;
            }
            pow2_transform(bfft_.data(), m_, false);
            work_.resize(m_);
        }
    }

    std::size_t size() const noexcept { return n_; }
    bool power_of_two() const noexcept { return pow2_; }

    void forward(std::complex<double>* data) const {
        if (pow2_) {
            pow2_transform(data, n_, false);
        } else {
            bluestein(data);
        }
    }

    void inverse(std::complex<double>* data) const {
        for (std::size_t i = 0; i < n_; ++i) data[i] = std::conj(data[i]);
        forward(data);
        const double s = 1.0 / static_cast<double>(n_);
        for (std::size_t i = 0; i < n_; ++i) data[i] = std::conj(data[i]) * s;
    }

private:
    static void build_twiddles(std::size_t n, std::vector<std::complex<double>>& tw) {
        tw.resize(n / 2);
        for (std::size_t k = 0; k < n / 2; ++k) {
            const double ang = -two_pi * static_cast<double>(k) / static_cast<double>(n);
            tw[k] = {std::cos(ang), std::sin(ang)};
        }
    }

    // in-place radix-2, using the twiddle table built for length n
    void pow2_transform(std::complex<double>* a, std::size_t n, bool) const {
        for (std::size_t i = 1, j = 0; i < n; ++i) {
            std::size_t bit = n >> 1;
            for (; j & bit; bit >>= 1) j ^= bit;
            j ^= bit;
            if (i < j) std::swap(a[i], a[j]);
        }
        for (std::size_t len = 2; len <= n; len <<= 1) {
            const std::size_t step = n / len;
            for (std::size_t i = 0; i < n; i += len) {
                for (std::size_t k = 0; k < len / 2; ++k) {
                    const std::complex<double> w = tw_[k * step];
                    const std::complex<double> u = a[i + k];
                    const std::complex<double> v = a[i + k + len / 2] * w;
                    a[i + k] = u + v;
                    a[i + k + len / 2] = u - v;
                }
            }
        }
    }

    void bluestein(std::complex<double>* data) const {
        auto& work = work_;
        for (std::size_t j = 0; j < n_; ++j) work[j] = data[j] * chirp_[j];
        for (std::size_t j = n_; j < m_; ++j) work[j] = {0.0, 0.0};
        pow2_transform(work.data(), m_, false);
        for (std::size_t i = 0; i < m_; ++i) work[i] *= bfft_[i];
        // inverse of the length-m transform via conjugation
        for (std::size_t i = 0; i < m_; ++i) work[i] = std::conj(work[i]);
        pow2_transform(work.data(), m_, false);
        const double s = 1.0 / static_cast<double>(m_);
        for (std::size_t k = 0; k < n_; ++k)
            data[k] = std::conj(work[k]) * s * chirp_[k];
    }

    std::size_t n_;
    bool pow2_ = false;
    std::size_t m_ = 0;
    std::vector<std::complex<double>> tw_;
    std::vector<std::complex<double>> chirp_;
    std::vector<std::complex<double>> bfft_;
    mutable std::vector<std::complex<double>> work_;
};

}  // namespace loschmidt
