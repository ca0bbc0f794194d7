#include "cmwf/audio.hpp"

#include <cmath>
#include <string>

#include "cmwf/error.hpp"

namespace cmwf {

AudioBuffer::AudioBuffer(std::size_t channels, std::size_t length, double fs)
    : channels_(channels), length_(length), fs_(fs), data_(channels * length, 0.0) {}

AudioBuffer::AudioBuffer(std::vector<std::vector<double>> channels, double fs) : fs_(fs) {
    channels_ = channels.size();
    length_ = channels_ ? channels.front().size() : 0;
    data_.reserve(channels_ * length_);
    for (const auto& ch : channels) {
        if (ch.size() != length_) throw Error("AudioBuffer: channels have different lengths");
        data_.insert(data_.end(), ch.begin(), ch.end());
    }
}

AudioBuffer AudioBuffer::select_channel(std::size_t ch) const {
    if (ch >= channels_) throw Error("AudioBuffer: channel " + std::to_string(ch) + " out of range");
    AudioBuffer out(1, length_, fs_);
    auto src = channel(ch);
    std::copy(src.begin(), src.end(), out.channel(0).begin());
    return out;
}

AudioBuffer AudioBuffer::select_channels(std::size_t count) const {
    if (count == 0 || count > channels_) throw Error("AudioBuffer: cannot select " + std::to_string(count) + " channels");
    AudioBuffer out(count, length_, fs_);
    std::copy(data_.begin(), data_.begin() + static_cast<std::ptrdiff_t>(count * length_), out.data_.begin());
    return out;
}

AudioBuffer AudioBuffer::slice(std::size_t begin, std::size_t count) const {
    if (begin + count > length_) throw Error("AudioBuffer: slice out of range");
    AudioBuffer out(channels_, count, fs_);
    for (std::size_t c = 0; c < channels_; ++c) {
        auto src = channel(c).subspan(begin, count);
        std::copy(src.begin(), src.end(), out.channel(c).begin());
    }
    return out;
}

void AudioBuffer::validate() const {
    if (channels_ < 1) throw Error("AudioBuffer: needs at least one channel");
    if (length_ < 1) throw Error("AudioBuffer: empty signal");
    if (!(fs_ > 0.0) || !std::isfinite(fs_)) throw Error("AudioBuffer: sampling rate must be positive");
    for (double v : data_)
        if (!std::isfinite(v)) throw Error("AudioBuffer: non-finite sample");
}

ComplexAudioBuffer::ComplexAudioBuffer(std::size_t channels, std::size_t length, double fs, double modulation_freq)
    : channels_(channels), length_(length), fs_(fs), modulation_freq_(modulation_freq), data_(channels * length) {}

}  // namespace cmwf
