#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <filesystem>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include "cmwf/audio.hpp"
#include "cmwf/stft.hpp"

namespace cmwf {

using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

// Harmonic modulation set {0, alpha1, ..., (C-1) alpha1}, rad/sample.
struct CyclicSet {
    double alpha1 = 0.0;
    std::vector<double> shifts{0.0};

    std::size_t size() const noexcept { return shifts.size(); }
};

// The narrowband set {0}; used for unvoiced frames and MWF processing.
CyclicSet narrowband_set();

// C is clamped to the largest value with (C - 1) alpha1 < nyquist and to harmonic_cap.
CyclicSet build_cyclic_set(double alpha1, std::size_t requested, double nyquist = std::numbers::pi,
                           std::size_t harmonic_cap = std::numeric_limits<std::size_t>::max());

struct FrameRange {
    std::size_t first = 0;
    std::size_t count = std::numeric_limits<std::size_t>::max();
};

// Time-averaged cyclic periodogram for one channel pair:
//   S(alpha, w_k) = 1/L sum_l Y(w_k, l) X*(w_k - alpha, l)
// where x_shifted is the STFT of the alpha-modulated x. One value per bin of y.
std::vector<cdouble> acp_estimate(const StftTensor& y, std::size_t y_channel, const StftTensor& x_shifted,
                                  std::size_t x_channel, FrameRange frames = {});

// Cyclic spectrum of one channel on a list of cyclic frequencies, bins 0..K/2.
struct ScdEstimate {
    std::vector<double> alphas;
    std::size_t bins = 0;
    std::size_t frames = 0;
    std::vector<cdouble> values;  // [alpha][bin]

    cdouble operator()(std::size_t p, std::size_t k) const { return values[p * bins + k]; }
};

ScdEstimate cyclic_spectrum(const AudioBuffer& audio, std::size_t channel, std::span<const double> alphas,
                            const WindowSpec& win);

// CSV: header "alpha_hz,bin,freq_hz,re,im"; one row per (alpha, bin).
void write_scd_csv(const std::filesystem::path& path, const ScdEstimate& scd, double fs, std::size_t fft_size);

// Stacked multiband STFT vectors x(A, w_k, l) in C^{MC} for a subset of bins.
// Entry c*M + m holds channel m of the signal modulated by alpha_c.
class ModulatedStftStack {
   public:
    ModulatedStftStack() = default;
    ModulatedStftStack(std::size_t channels, std::size_t shifts, std::size_t frames, std::vector<std::size_t> bins);

    std::size_t channels() const noexcept { return channels_; }
    std::size_t shifts() const noexcept { return shifts_; }
    std::size_t dim() const noexcept { return channels_ * shifts_; }
    std::size_t frames() const noexcept { return frames_; }
    const std::vector<std::size_t>& bins() const noexcept { return bins_; }
    // Index into bins() for an absolute bin, or npos.
    std::size_t bin_index(std::size_t bin) const;

    std::span<cdouble> vec(std::size_t bin_index, std::size_t frame) {
        return {data_.data() + (bin_index * frames_ + frame) * dim(), dim()};
    }
    std::span<const cdouble> vec(std::size_t bin_index, std::size_t frame) const {
        return {data_.data() + (bin_index * frames_ + frame) * dim(), dim()};
    }

    static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

   private:
    std::size_t channels_ = 0;
    std::size_t shifts_ = 0;
    std::size_t frames_ = 0;
    std::vector<std::size_t> bins_;
    std::vector<std::size_t> lookup_;
    std::vector<cdouble> data_;
};

// Block 0 is copied from stft(audio) bit for bit; block c is stft(modulate(audio, alpha_c)).
// An empty bin list selects every bin 0..K/2.
ModulatedStftStack build_stack(const AudioBuffer& audio, const CyclicSet& set, const WindowSpec& win,
                               std::span<const std::size_t> bins = {});
// Variant reusing an already computed plain STFT of audio for block 0.
ModulatedStftStack build_stack(const AudioBuffer& audio, const StftTensor& base, const CyclicSet& set,
                               const WindowSpec& win, std::span<const std::size_t> bins = {});

enum class CovRole { noisy, noise, target };

// Per-bin MC x MC spectral-spatial covariance matrices (same bin order as the stack).
struct SpectralSpatialCov {
    CovRole role = CovRole::noisy;
    std::size_t dim = 0;
    std::vector<std::size_t> bins;
    std::vector<CMatrix> mats;
};

// 1/|frames| sum_l x(l) x(l)^H per bin. Hermitian by construction.
SpectralSpatialCov assemble_cov(const ModulatedStftStack& stack, FrameRange frames = {},
                                CovRole role = CovRole::noisy);

// 1/|frames| sum_l x(l) conj(ref(bin, l)) per stack bin; ref is a single-channel (or selected channel)
// half-spectrum STFT.
std::vector<CVector> assemble_cross(const ModulatedStftStack& stack, const StftTensor& ref, std::size_t ref_channel,
                                    FrameRange frames = {});

// Keeps the M x M diagonal blocks, zeroes everything else.
CMatrix blkdiag(const CMatrix& s, std::size_t block_size);
SpectralSpatialCov blkdiag_project(const SpectralSpatialCov& cov, std::size_t block_size);

}  // namespace cmwf
