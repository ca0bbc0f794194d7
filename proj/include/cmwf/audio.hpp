#pragma once

#include <complex>
#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace cmwf {

using cdouble = std::complex<double>;

inline constexpr double kDefaultSampleRate = 16000.0;

// Real multichannel time-domain signal, stored channel-major.
class AudioBuffer {
   public:
    AudioBuffer() = default;
    AudioBuffer(std::size_t channels, std::size_t length, double fs = kDefaultSampleRate);
    AudioBuffer(std::vector<std::vector<double>> channels, double fs = kDefaultSampleRate);

    std::size_t channels() const noexcept { return channels_; }
    std::size_t length() const noexcept { return length_; }
    double fs() const noexcept { return fs_; }
    bool empty() const noexcept { return length_ == 0 || channels_ == 0; }

    double& operator()(std::size_t ch, std::size_t n) { return data_[ch * length_ + n]; }
    double operator()(std::size_t ch, std::size_t n) const { return data_[ch * length_ + n]; }

    std::span<double> channel(std::size_t ch) { return {data_.data() + ch * length_, length_}; }
    std::span<const double> channel(std::size_t ch) const { return {data_.data() + ch * length_, length_}; }

    std::span<const double> raw() const noexcept { return data_; }

    AudioBuffer select_channel(std::size_t ch) const;
    AudioBuffer select_channels(std::size_t count) const;
    AudioBuffer slice(std::size_t begin, std::size_t count) const;

    // Throws cmwf::Error unless M >= 1, N >= 1, fs > 0 and every sample is finite.
    void validate() const;

   private:
    std::size_t channels_ = 0;
    std::size_t length_ = 0;
    double fs_ = kDefaultSampleRate;
    std::vector<double> data_;
};

// Complex multichannel signal; modulation_freq records the applied shift in rad/sample.
class ComplexAudioBuffer {
   public:
    ComplexAudioBuffer() = default;
    ComplexAudioBuffer(std::size_t channels, std::size_t length, double fs, double modulation_freq = 0.0);

    std::size_t channels() const noexcept { return channels_; }
    std::size_t length() const noexcept { return length_; }
    double fs() const noexcept { return fs_; }
    double modulation_freq() const noexcept { return modulation_freq_; }

    cdouble& operator()(std::size_t ch, std::size_t n) { return data_[ch * length_ + n]; }
    cdouble operator()(std::size_t ch, std::size_t n) const { return data_[ch * length_ + n]; }
    std::span<cdouble> channel(std::size_t ch) { return {data_.data() + ch * length_, length_}; }
    std::span<const cdouble> channel(std::size_t ch) const { return {data_.data() + ch * length_, length_}; }

   private:
    std::size_t channels_ = 0;
    std::size_t length_ = 0;
    double fs_ = kDefaultSampleRate;
    double modulation_freq_ = 0.0;
    std::vector<cdouble> data_;
};

enum class WavFormat { pcm16, pcm24, float32 };

AudioBuffer read_wav(const std::filesystem::path& path);
void write_wav(const std::filesystem::path& path, const AudioBuffer& audio, WavFormat format = WavFormat::float32);

}  // namespace cmwf
