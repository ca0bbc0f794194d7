#include "cmwf/stft.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>

#include "cmwf/error.hpp"
#include "cmwf/kernels.hpp"
#include "fft.hpp"

namespace cmwf {

WindowSpec WindowSpec::make(std::size_t length, std::size_t hop) {
    WindowSpec w{length, hop};
    w.validate();
    return w;
}

void WindowSpec::validate() const {
    if (length == 0 || !std::has_single_bit(length))
        throw Error("window length must be a power of two, got " + std::to_string(length));
    if (hop < 1 || hop > length) throw Error("hop must satisfy 1 <= R <= K");
}

std::vector<double> WindowSpec::window() const {
    std::vector<double> w(length);
    const double k = static_cast<double>(length);
    for (std::size_t n = 0; n < length; ++n)
        w[n] = std::sqrt(0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) / k));
    return w;
}

namespace {
// Overlap sum of w^2 at every phase n in [0, R).
std::vector<double> overlap_profile(const WindowSpec& spec) {
    const auto w = spec.window();
    std::vector<double> g(spec.hop, 0.0);
    for (std::size_t n = 0; n < spec.hop; ++n)
        for (std::size_t m = n; m < spec.length; m += spec.hop) g[n] += w[m] * w[m];
    return g;
}
}  // namespace

double WindowSpec::overlap_gain() const {
    const auto g = overlap_profile(*this);
    double sum = 0.0;
    for (double v : g) sum += v;
    return sum / static_cast<double>(g.size());
}

bool WindowSpec::is_cola() const {
    const auto g = overlap_profile(*this);
    const auto [lo, hi] = std::minmax_element(g.begin(), g.end());
    return *lo > 0.0 && (*hi - *lo) <= 1e-12 * *hi;
}

StftTensor::StftTensor(std::size_t channels, std::size_t frames, const WindowSpec& win, std::size_t signal_length,
                       double fs, bool full_spectrum)
    : channels_(channels),
      bins_(full_spectrum ? win.length : win.length / 2 + 1),
      frames_(frames),
      win_(win),
      signal_length_(signal_length),
      fs_(fs),
      full_(full_spectrum),
      data_(channels * frames * bins_) {}

std::size_t frame_count(std::size_t n, std::size_t k, std::size_t r) {
    if (r == 0) throw Error("hop must be positive");
    if (n < k) throw Error("signal of " + std::to_string(n) + " samples is shorter than one window (" +
                           std::to_string(k) + ")");
    return 1 + (n - k + r - 1) / r;
}

StftTensor stft(const AudioBuffer& audio, const WindowSpec& win) {
    win.validate();
    const std::size_t n = audio.length(), k = win.length, r = win.hop;
    const std::size_t frames = frame_count(n, k, r);
    StftTensor out(audio.channels(), frames, win, n, audio.fs(), false);
    const auto w = win.window();
    detail::Fft fft(k, detail::Fft::Kind::forward_r2c);
    std::vector<double> buf(k);
    for (std::size_t c = 0; c < audio.channels(); ++c) {
        const auto x = audio.channel(c);
        for (std::size_t l = 0; l < frames; ++l) {
            const std::size_t start = l * r;
            for (std::size_t i = 0; i < k; ++i) buf[i] = start + i < n ? x[start + i] * w[i] : 0.0;
            fft.forward_real(buf, out.frame(c, l));
        }
    }
    return out;
}

StftTensor stft(const ComplexAudioBuffer& audio, const WindowSpec& win) {
    win.validate();
    const std::size_t n = audio.length(), k = win.length, r = win.hop;
    const std::size_t frames = frame_count(n, k, r);
    StftTensor out(audio.channels(), frames, win, n, audio.fs(), true);
    const auto w = win.window();
    detail::Fft fft(k, detail::Fft::Kind::forward_c2c);
    std::vector<cdouble> buf(k);
    std::vector<double> wtail(k);
    for (std::size_t c = 0; c < audio.channels(); ++c) {
        const auto x = audio.channel(c);
        for (std::size_t l = 0; l < frames; ++l) {
            const std::size_t start = l * r;
            const std::size_t avail = std::min(k, n - start);
            kernels::scale_complex(buf.data(), w.data(), x.data() + start, avail);
            std::fill(buf.begin() + static_cast<std::ptrdiff_t>(avail), buf.end(), cdouble{});
            fft.forward(buf, out.frame(c, l));
        }
    }
    return out;
}

namespace {
void check_synthesis(const StftTensor& spec, const WindowSpec& win) {
    win.validate();
    if (!win.is_cola())
        throw Error("window K=" + std::to_string(win.length) + ", R=" + std::to_string(win.hop) +
                    " does not overlap-add to a constant");
    if (spec.fft_size() != win.length || spec.hop() != win.hop) throw Error("istft: window does not match tensor");
}
}  // namespace

AudioBuffer istft(const StftTensor& spec, const WindowSpec& win) {
    check_synthesis(spec, win);
    if (spec.full_spectrum()) throw Error("istft: full-spectrum tensor, use istft_complex");
    const std::size_t k = win.length, r = win.hop, n = spec.signal_length();
    const auto w = win.window();
    const double scale = 1.0 / (static_cast<double>(k) * win.overlap_gain());
    AudioBuffer out(spec.channels(), n, spec.fs());
    detail::Fft ifft(k, detail::Fft::Kind::inverse_c2r);
    std::vector<double> buf(k);
    for (std::size_t c = 0; c < spec.channels(); ++c) {
        auto y = out.channel(c);
        for (std::size_t l = 0; l < spec.frames(); ++l) {
            ifft.inverse_real(spec.frame(c, l), buf);
            const std::size_t start = l * r;
            for (std::size_t i = 0; i < k && start + i < n; ++i) y[start + i] += buf[i] * w[i] * scale;
        }
    }
    return out;
}

ComplexAudioBuffer istft_complex(const StftTensor& spec, const WindowSpec& win) {
    check_synthesis(spec, win);
    if (!spec.full_spectrum()) throw Error("istft_complex: half-spectrum tensor, use istft");
    const std::size_t k = win.length, r = win.hop, n = spec.signal_length();
    const auto w = win.window();
    const double scale = 1.0 / (static_cast<double>(k) * win.overlap_gain());
    ComplexAudioBuffer out(spec.channels(), n, spec.fs());
    detail::Fft ifft(k, detail::Fft::Kind::inverse_c2c);
    std::vector<cdouble> buf(k);
    for (std::size_t c = 0; c < spec.channels(); ++c) {
        auto y = out.channel(c);
        for (std::size_t l = 0; l < spec.frames(); ++l) {
            ifft.inverse(spec.frame(c, l), buf);
            const std::size_t start = l * r;
            for (std::size_t i = 0; i < k && start + i < n; ++i) y[start + i] += buf[i] * (w[i] * scale);
        }
    }
    return out;
}

std::vector<cdouble> phasor(double alpha, std::size_t count) {
    std::vector<cdouble> p(count);
    for (std::size_t n = 0; n < count; ++n) {
        // Reduce the phase before evaluating sin/cos to keep full precision at large n.
        const double phase = std::remainder(alpha * static_cast<double>(n), 2.0 * std::numbers::pi);
        p[n] = {std::cos(phase), std::sin(phase)};
    }
    return p;
}

ComplexAudioBuffer modulate(const AudioBuffer& audio, double alpha) {
    if (!(alpha >= 0.0 && alpha < 2.0 * std::numbers::pi))
        throw Error("modulation frequency must lie in [0, 2 pi) rad/sample");
    const std::size_t n = audio.length();
    ComplexAudioBuffer out(audio.channels(), n, audio.fs(), alpha);
    const auto ph = phasor(alpha, n);
    for (std::size_t c = 0; c < audio.channels(); ++c)
        kernels::scale_complex(out.channel(c).data(), audio.channel(c).data(), ph.data(), n);
    return out;
}

}  // namespace cmwf
