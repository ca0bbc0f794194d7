#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cmwf/audio.hpp"

namespace cmwf {

struct HarmonicSourceParams {
    double f0_min_hz = 60.0;
    double f0_max_hz = 250.0;
    std::optional<double> f0_hz;  // fixed f0 instead of drawing one
    double amp_min = 1.0;
    double amp_max = 10.0;
    double envelope_mean = 0.5;
    double envelope_variance = 10.0;
    std::size_t envelope_order = 4;
    double envelope_cutoff_hz = 5.0;
    double envelope_warmup_s = 2.0;  // filter settling, discarded
    double duration_s = 5.0;

    void validate() const;
};

struct HarmonicTarget {
    AudioBuffer audio;  // 1 channel
    double f0_hz = 0.0;
    double omega0 = 0.0;  // rad/sample
    std::size_t harmonics = 0;
    std::vector<double> amplitudes;
    std::vector<double> phases;
    std::vector<double> envelope;
};

// Largest H with H * f0 < fs / 2.
std::size_t harmonic_count(double f0_hz, double fs);

// Y(n) = B(n) sum_h D_h cos(omega0 n h + phi_h). n_samples = 0 uses params.duration_s.
HarmonicTarget gen_harmonic_target(const HarmonicSourceParams& params, double fs, std::size_t n_samples,
                                   std::uint64_t seed);

// Consecutive notes with their own f0, amplitudes and phases, sharing one envelope.
struct NoteSequence {
    AudioBuffer audio;
    std::vector<HarmonicTarget> notes;  // audio fields hold the individual segments
    std::vector<std::size_t> onsets;
};
NoteSequence gen_note_sequence(const HarmonicSourceParams& params, double fs, const std::vector<double>& f0s_hz,
                               double note_seconds, std::uint64_t seed);

struct Biquad {
    double b0 = 1, b1 = 0, b2 = 0, a1 = 0, a2 = 0;
};

// Digital Butterworth lowpass as cascaded sections (bilinear transform, prewarped at fc).
// Odd orders end with a first-order section (b2 = a2 = 0).
std::vector<Biquad> butterworth_design(std::size_t order, double fc_hz, double fs);
// |H(e^{jw})| of a cascade at f_hz.
double cascade_magnitude(const std::vector<Biquad>& sections, double f_hz, double fs);
AudioBuffer butterworth_lowpass(const AudioBuffer& x, std::size_t order, double fc_hz);
void filter_cascade(const std::vector<Biquad>& sections, std::span<double> x);

struct RirSpec {
    enum class Kind { synthetic, file } kind = Kind::synthetic;
    double rt60 = 0.61;
    double mic_spacing_m = 0.08;
    double speed_of_sound = 343.0;
    double doa_deg = std::numeric_limits<double>::quiet_NaN();  // NaN draws uniformly in [0, 180)
    double bulk_delay = 32.0;                                    // samples before the earliest arrival
    double direct_to_tail_db = 10.0;
    bool fractional_delay = true;  // windowed-sinc direct path; false rounds delays to whole samples
    std::filesystem::path file;    // multichannel WAV for Kind::file

    void validate() const;
};

struct RirSet {
    AudioBuffer h;               // M channels
    std::vector<double> delays;  // direct-path delay per mic, samples
    double doa_deg = 0.0;
};

RirSet gen_rir(const RirSpec& spec, std::size_t mics, double fs, std::uint64_t seed);

// Linear convolution of a mono signal with each RIR channel, truncated to `length` samples
// starting at `offset` of the full convolution.
AudioBuffer convolve(std::span<const double> x, const AudioBuffer& rirs, std::size_t offset, std::size_t length);

struct SceneConfig {
    std::size_t mics = 2;
    double isnr_db = -10.0;
    double sensor_snr_db = 30.0;
    double fs = kDefaultSampleRate;
    std::size_t reference_mic = 0;

    void validate() const;
};

struct SceneGains {
    double interferer = 0.0;          // applied to the reverberant unit-variance interferer
    std::vector<double> sensor;       // per mic, applied to unit-variance WGN
};

struct Scene {
    AudioBuffer x;  // noisy
    AudioBuffer d;  // reverberant target
    AudioBuffer v;  // interferer + sensor noise
    AudioBuffer interferer;
    AudioBuffer sensor;
    SceneGains gains;
};

Scene mix_scene(const AudioBuffer& target, const SceneConfig& config, const AudioBuffer& rirs_target,
                const AudioBuffer& rirs_interferer, std::uint64_t seed);

// Fresh noise with the levels of an existing scene (noise-only segment).
AudioBuffer render_noise(const SceneConfig& config, const AudioBuffer& rirs_interferer, const SceneGains& gains,
                         std::size_t length, std::uint64_t seed);

// Everything a synthetic Monte Carlo run needs.
struct SyntheticScene {
    HarmonicTarget truth;
    RirSet rir_target;
    RirSet rir_interferer;
    Scene mix;
    AudioBuffer noise_only;
    std::uint64_t seed = 0;
};

SyntheticScene make_synthetic_scene(const SceneConfig& config, const HarmonicSourceParams& source,
                                    const RirSpec& rir, double noise_only_s, std::uint64_t seed);

// noisy.wav, target.wav, noise.wav, noise_only.wav and scene.txt under dir.
void export_scene(const std::filesystem::path& dir, const SyntheticScene& scene, const SceneConfig& config);

}  // namespace cmwf
