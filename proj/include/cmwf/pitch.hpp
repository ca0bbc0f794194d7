#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "cmwf/audio.hpp"
#include "cmwf/stft.hpp"

namespace cmwf {

struct PitchGrid {
    double f_lo = 60.0;   // Hz
    double f_hi = 500.0;  // Hz
    double step = 0.5;    // Hz
};

struct PitchConfig {
    PitchGrid grid{};
    // Upper bound on the harmonic order; the Nyquist limit applies as well.
    std::size_t max_order = 160;
    // Frame is voiced when the fitted harmonic energy is at least this fraction of the frame energy.
    double voicing_threshold = 0.5;
    // Weight of the BIC-style order penalty (2h+1) ln N.
    double order_penalty = 1.0;
    // Analysis frame length in samples; 0 picks the next power of two >= 2 fs / f_lo.
    std::size_t frame_length = 0;
    // Coarse-grid maxima refined with the exact evaluation.
    std::size_t refine_candidates = 3;
    // Bits of precision for the final continuous search around the best grid point; 0 disables it.
    int refine_bits = 32;
    // Coarse grid oversampling, only used together with refinement; 0 picks it from the frame length.
    std::size_t coarse_oversample = 0;
    // An estimate is replaced by its double when that keeps this fraction of the explained energy.
    double octave_tolerance = 0.02;
};

struct PitchEstimate {
    double f0_hz = 0.0;  // 0 when unvoiced
    std::size_t order = 0;
    bool voiced = false;
    double harmonic_ratio = 0.0;  // fitted harmonic energy / frame energy
};

// Grid-search harmonic NLS fit of one frame.
PitchEstimate estimate_f0_nls(std::span<const double> frame, double fs, const PitchConfig& config = {});

std::size_t pitch_frame_length(double fs, const PitchConfig& config);

// |curr - prev| / (prev + eps)
double delta_alpha(double prev, double curr, double eps_guard = 1e-6);

struct SmoothingParams {
    double d0 = 0.005;
    double d1 = 0.2;
    double eps_guard = 1e-6;
    // Re-anchor the smoothed value when the raw track has been steady (delta < d0) for this many
    // voiced frames but sits at least d0 (relative) away from it. 0 disables re-anchoring.
    std::size_t reanchor_frames = 5;

    void validate() const;
};

// Per-frame fundamental frequency track. Frequencies share the unit of the raw input
// (the pipeline uses rad/sample).
struct PitchTrack {
    std::vector<double> raw;       // 0 when unvoiced
    std::vector<double> smoothed;  // alpha-bar
    std::vector<double> delta;     // relative variation of raw
    std::vector<std::uint8_t> voiced;
    std::vector<std::uint8_t> reanchored;

    std::size_t size() const noexcept { return raw.size(); }
};

PitchTrack smooth_f0(std::span<const double> raw, const SmoothingParams& params = {});

// One raw estimate (rad/sample, 0 if unvoiced) per STFT frame of `mono`, using a pitch
// frame centred on each STFT frame.
std::vector<double> track_raw_f0(const AudioBuffer& mono, const WindowSpec& win, const PitchConfig& config = {});

// CSV: frame,raw_f0_hz,voiced,smoothed_f0_hz,delta_alpha
void write_pitch_csv(const std::filesystem::path& path, const PitchTrack& track, double fs);

}  // namespace cmwf
