// Minimal RIFF/WAVE reader and writer: 16/24/32-bit PCM and 32-bit float.
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include "cmwf/audio.hpp"
#include "cmwf/error.hpp"

namespace cmwf {
namespace {

std::uint32_t le32(const unsigned char* p) {
    return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) | (std::uint32_t(p[3]) << 24);
}
std::uint16_t le16(const unsigned char* p) { return std::uint16_t(p[0] | (p[1] << 8)); }

void put32(std::vector<unsigned char>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xff));
}
void put16(std::vector<unsigned char>& out, std::uint16_t v) {
    out.push_back(static_cast<unsigned char>(v & 0xff));
    out.push_back(static_cast<unsigned char>(v >> 8));
}

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xfffe;

}  // namespace

AudioBuffer read_wav(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open WAV file: " + path.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const auto bad = [&](const char* why) { return Error("invalid WAV file " + path.string() + ": " + why); };
    if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 || std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
        throw bad("missing RIFF/WAVE header");

    std::uint16_t format = 0, channels = 0, bits = 0;
    std::uint32_t rate = 0;
    const unsigned char* data = nullptr;
    std::size_t data_size = 0;
    std::size_t pos = 12;
    while (pos + 8 <= bytes.size()) {
        const unsigned char* chunk = bytes.data() + pos;
        const std::uint32_t size = le32(chunk + 4);
        const std::size_t body = pos + 8;
        if (body + size > bytes.size() && std::memcmp(chunk, "data", 4) != 0) throw bad("truncated chunk");
        if (std::memcmp(chunk, "fmt ", 4) == 0) {
            if (size < 16) throw bad("short fmt chunk");
            format = le16(bytes.data() + body);
            channels = le16(bytes.data() + body + 2);
            rate = le32(bytes.data() + body + 4);
            bits = le16(bytes.data() + body + 14);
            if (format == kFormatExtensible) {
                if (size < 26) throw bad("short extensible fmt chunk");
                format = le16(bytes.data() + body + 24);
            }
        } else if (std::memcmp(chunk, "data", 4) == 0) {
            data = bytes.data() + body;
            data_size = std::min<std::size_t>(size, bytes.size() - body);
        }
        pos = body + size + (size & 1u);
    }
    if (channels == 0 || rate == 0) throw bad("missing fmt chunk");
    if (!data) throw bad("missing data chunk");

    const bool pcm = format == kFormatPcm && (bits == 16 || bits == 24 || bits == 32);
    const bool flt = format == kFormatFloat && bits == 32;
    if (!pcm && !flt) throw bad("unsupported sample format");

    const std::size_t bytes_per_sample = bits / 8;
    const std::size_t frames = data_size / (bytes_per_sample * channels);
    AudioBuffer audio(channels, frames, static_cast<double>(rate));
    for (std::size_t n = 0; n < frames; ++n) {
        for (std::size_t c = 0; c < channels; ++c) {
            const unsigned char* p = data + (n * channels + c) * bytes_per_sample;
            double v = 0.0;
            if (flt) {
                const std::uint32_t u = le32(p);
                float f;
                std::memcpy(&f, &u, sizeof f);
                v = f;
            } else if (bits == 16) {
                v = static_cast<std::int16_t>(le16(p)) / 32768.0;
            } else if (bits == 24) {
                std::int32_t s = std::int32_t(p[0]) | (std::int32_t(p[1]) << 8) | (std::int32_t(p[2]) << 16);
                if (s & 0x800000) s -= 0x1000000;
                v = s / 8388608.0;
            } else {
                v = static_cast<std::int32_t>(le32(p)) / 2147483648.0;
            }
            audio(c, n) = v;
        }
    }
    return audio;
}

void write_wav(const std::filesystem::path& path, const AudioBuffer& audio, WavFormat format) {
    audio.validate();
    const std::uint16_t bits = format == WavFormat::pcm16 ? 16 : format == WavFormat::pcm24 ? 24 : 32;
    const std::uint16_t tag = format == WavFormat::float32 ? kFormatFloat : kFormatPcm;
    const auto channels = static_cast<std::uint16_t>(audio.channels());
    const auto rate = static_cast<std::uint32_t>(std::lround(audio.fs()));
    const std::uint32_t block = channels * (bits / 8u);
    const auto data_size = static_cast<std::uint32_t>(audio.length() * block);

    std::vector<unsigned char> out;
    out.reserve(44 + data_size);
    out.insert(out.end(), {'R', 'I', 'F', 'F'});
    put32(out, 36 + data_size);
    out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
    put32(out, 16);
    put16(out, tag);
    put16(out, channels);
    put32(out, rate);
    put32(out, rate * block);
    put16(out, static_cast<std::uint16_t>(block));
    put16(out, bits);
    out.insert(out.end(), {'d', 'a', 't', 'a'});
    put32(out, data_size);

    for (std::size_t n = 0; n < audio.length(); ++n) {
        for (std::size_t c = 0; c < audio.channels(); ++c) {
            const double v = audio(c, n);
            if (format == WavFormat::float32) {
                const float f = static_cast<float>(v);
                std::uint32_t u;
                std::memcpy(&u, &f, sizeof u);
                put32(out, u);
            } else if (format == WavFormat::pcm16) {
                const auto s = static_cast<std::int16_t>(std::clamp(std::lround(v * 32768.0), -32768L, 32767L));
                put16(out, static_cast<std::uint16_t>(s));
            } else {
                const auto s = static_cast<std::int32_t>(std::clamp(std::lround(v * 8388608.0), -8388608L, 8388607L));
                out.push_back(static_cast<unsigned char>(s & 0xff));
                out.push_back(static_cast<unsigned char>((s >> 8) & 0xff));
                out.push_back(static_cast<unsigned char>((s >> 16) & 0xff));
            }
        }
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot write WAV file: " + path.string());
    f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
    if (!f) throw Error("failed writing WAV file: " + path.string());
}

}  // namespace cmwf
