#pragma once
// Helpers shared by the unit tests: random inputs and brute-force oracles that
// do not go through the library's FFT or estimators.

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <vector>

#include "cmwf/audio.hpp"

namespace testing {

using cdouble = std::complex<double>;

inline std::mt19937_64 rng(std::uint64_t seed) { return std::mt19937_64(seed); }

inline cmwf::AudioBuffer white_noise(std::size_t channels, std::size_t n, std::uint64_t seed, double fs = 16000.0) {
    auto g = rng(seed);
    std::normal_distribution<double> nd;
    cmwf::AudioBuffer out(channels, n, fs);
    for (std::size_t c = 0; c < channels; ++c)
        for (auto& v : out.channel(c)) v = nd(g);
    return out;
}

inline Eigen::MatrixXcd random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& g) {
    std::normal_distribution<double> nd;
    Eigen::MatrixXcd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = {nd(g), nd(g)};
    return m;
}

// Well conditioned Hermitian positive definite matrix.
inline Eigen::MatrixXcd random_hpd(Eigen::Index n, std::mt19937_64& g, double floor = 0.1) {
    const Eigen::MatrixXcd a = random_matrix(n, 2 * n, g);
    Eigen::MatrixXcd s = a * a.adjoint() / static_cast<double>(2 * n);
    s.diagonal().array() += floor;
    return s;
}

// Direct O(K^2) DFT of one windowed frame with zero padding past the end of x.
inline std::vector<cdouble> direct_frame_dft(const std::vector<double>& x, std::size_t start,
                                             const std::vector<double>& w) {
    const std::size_t k = w.size();
    std::vector<cdouble> tw(k);
    for (std::size_t i = 0; i < k; ++i) {
        const double ph = -2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(k);
        tw[i] = {std::cos(ph), std::sin(ph)};
    }
    std::vector<cdouble> out(k / 2 + 1);
    for (std::size_t b = 0; b <= k / 2; ++b) {
        cdouble acc{};
        for (std::size_t n = 0; n < k; ++n) {
            const double v = start + n < x.size() ? x[start + n] * w[n] : 0.0;
            acc += v * tw[(b * n) % k];
        }
        out[b] = acc;
    }
    return out;
}

inline std::vector<double> sqrt_hann(std::size_t k) {
    std::vector<double> w(k);
    for (std::size_t n = 0; n < k; ++n)
        w[n] = std::sqrt(0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) / static_cast<double>(k)));
    return w;
}

// Welch average of |X_l(k)|^2 over frames l = 0..L-1 with L = ceil(1 + (N - K) / R).
inline std::vector<double> welch_psd(const std::vector<double>& x, std::size_t k, std::size_t r) {
    const auto w = sqrt_hann(k);
    const std::size_t frames = 1 + (x.size() - k + r - 1) / r;
    std::vector<double> psd(k / 2 + 1, 0.0);
    for (std::size_t l = 0; l < frames; ++l) {
        const auto f = direct_frame_dft(x, l * r, w);
        for (std::size_t b = 0; b < psd.size(); ++b) psd[b] += std::norm(f[b]);
    }
    for (auto& v : psd) v /= static_cast<double>(frames);
    return psd;
}

inline std::vector<double> to_vector(std::span<const double> s) { return {s.begin(), s.end()}; }

}  // namespace testing
