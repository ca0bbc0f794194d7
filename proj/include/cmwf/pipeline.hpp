#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cmwf/audio.hpp"
#include "cmwf/beamformer.hpp"
#include "cmwf/pitch.hpp"

namespace cmwf {

struct EnhanceConfig {
    WindowSpec window{512, 128};
    std::size_t shifts = 5;  // C
    double eps_bin = 1.5;
    RoutingScope routing = RoutingScope::harmonics;
    LoadingBounds loading{};
    std::size_t reference_mic = 0;
    double min_noise_seconds = 2.0;

    // Recursive mode.
    double beta = 0.05;
    SmoothingParams smoothing{};
    std::size_t burn_in_frames = 10;
    // Reset the running stacked covariances on every alpha-bar update instead of only on
    // large (>= D1) jumps.
    bool reset_on_update = false;

    void validate() const;
};

struct EnhanceInputs {
    const AudioBuffer& noisy;
    const AudioBuffer& noise_only;
    // Reverberant clean target, same channels as noisy. Only the oracle variants read it.
    const AudioBuffer* clean_target = nullptr;
};

struct EnhanceOutputs {
    std::vector<std::pair<Variant, AudioBuffer>> outputs;  // single-channel estimates of the target at the reference mic
    std::vector<std::string> notes;

    const AudioBuffer& output(Variant v) const;
};

struct BatchDiagnostics {
    CyclicSet set;
    BinRouting routing;
    std::size_t fallback_bins = 0;
};

struct BatchResult : EnhanceOutputs {
    BatchDiagnostics diagnostics;
};

// Whole-signal statistics with a fixed fundamental alpha1 (rad/sample); alpha1 <= 0 means
// unvoiced and makes every cyclic variant identical to its MWF counterpart.
BatchResult batch_enhance(const EnhanceInputs& in, double alpha1, std::span<const Variant> variants,
                          const EnhanceConfig& config = {});

enum class Gate : std::uint8_t { burn_in, mwf_unvoiced, mwf_delta, mwf_stale, mwf_warmup, cyclic };
std::string_view gate_name(Gate g);

struct FrameDiagnostics {
    std::size_t frame = 0;
    double alpha_bar = 0.0;
    double delta_alpha = 0.0;
    bool voiced = false;
    Gate gate = Gate::burn_in;
    bool remodulated = false;
    std::size_t cyclic_bins = 0;
    double lambda_min = 0.0;
    double lambda_mean = 0.0;
    double lambda_max = 0.0;
};

struct RecursiveResult : EnhanceOutputs {
    std::vector<FrameDiagnostics> frames;
};

// Frame-by-frame operation with exponentially weighted statistics and a pitch track whose
// entries are in rad/sample and align with the STFT frames of `noisy`.
RecursiveResult recursive_enhance(const EnhanceInputs& in, const PitchTrack& track, std::span<const Variant> variants,
                                  const EnhanceConfig& config = {});

// CSV: frame,alpha_bar_hz,delta_alpha,voiced,gate,remodulated,cyclic_bins,lambda_min,lambda_mean,lambda_max
void write_diagnostics_csv(const std::filesystem::path& path, std::span<const FrameDiagnostics> frames, double fs);

}  // namespace cmwf
