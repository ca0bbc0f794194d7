#pragma once

#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

#include "cmwf/audio.hpp"

namespace cmwf {

// Square-root periodic Hann analysis/synthesis window of length K with hop R.
struct WindowSpec {
    std::size_t length = 512;
    std::size_t hop = 128;

    // Throws unless K is a power of two and 1 <= R <= K.
    static WindowSpec make(std::size_t length, std::size_t hop);
    void validate() const;

    std::vector<double> window() const;
    // Sum over frames of w^2(n - lR); constant when is_cola().
    double overlap_gain() const;
    bool is_cola() const;
};

// frames-by-bins STFT for every channel, stored [channel][frame][bin].
// Real inputs keep bins 0..K/2; complex inputs keep all K bins.
class StftTensor {
   public:
    StftTensor() = default;
    StftTensor(std::size_t channels, std::size_t frames, const WindowSpec& win, std::size_t signal_length, double fs,
               bool full_spectrum);

    std::size_t channels() const noexcept { return channels_; }
    std::size_t bins() const noexcept { return bins_; }
    std::size_t frames() const noexcept { return frames_; }
    std::size_t fft_size() const noexcept { return win_.length; }
    std::size_t hop() const noexcept { return win_.hop; }
    const WindowSpec& window_spec() const noexcept { return win_; }
    std::size_t signal_length() const noexcept { return signal_length_; }
    double fs() const noexcept { return fs_; }
    bool full_spectrum() const noexcept { return full_; }

    double bin_freq(std::size_t k) const noexcept {
        return 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(win_.length);
    }

    cdouble& operator()(std::size_t ch, std::size_t bin, std::size_t frame) {
        return data_[(ch * frames_ + frame) * bins_ + bin];
    }
    cdouble operator()(std::size_t ch, std::size_t bin, std::size_t frame) const {
        return data_[(ch * frames_ + frame) * bins_ + bin];
    }
    std::span<cdouble> frame(std::size_t ch, std::size_t l) { return {data_.data() + (ch * frames_ + l) * bins_, bins_}; }
    std::span<const cdouble> frame(std::size_t ch, std::size_t l) const {
        return {data_.data() + (ch * frames_ + l) * bins_, bins_};
    }

   private:
    std::size_t channels_ = 0;
    std::size_t bins_ = 0;
    std::size_t frames_ = 0;
    WindowSpec win_{};
    std::size_t signal_length_ = 0;
    double fs_ = kDefaultSampleRate;
    bool full_ = false;
    std::vector<cdouble> data_;
};

// L = ceil(1 + (N - K) / R); throws when N < K.
std::size_t frame_count(std::size_t n, std::size_t k, std::size_t r);

StftTensor stft(const AudioBuffer& audio, const WindowSpec& win);
StftTensor stft(const ComplexAudioBuffer& audio, const WindowSpec& win);

// Weighted overlap-add synthesis for half-spectrum tensors.
AudioBuffer istft(const StftTensor& spec, const WindowSpec& win);
// Same for full-spectrum tensors of complex signals.
ComplexAudioBuffer istft_complex(const StftTensor& spec, const WindowSpec& win);

// output(n) = input(n) * exp(j alpha n), alpha in rad/sample, 0 <= alpha < 2 pi.
ComplexAudioBuffer modulate(const AudioBuffer& audio, double alpha);

// e^{j alpha n} for n in [0, count).
std::vector<cdouble> phasor(double alpha, std::size_t count);

}  // namespace cmwf
