#include "cmwf/scene.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <numeric>

#include "cmwf/error.hpp"
#include "cmwf/random.hpp"
#include "fft.hpp"

namespace cmwf {

namespace {

constexpr double kPi = std::numbers::pi;

double energy(std::span<const double> x) { return std::inner_product(x.begin(), x.end(), x.begin(), 0.0); }

std::vector<double> white_noise(std::mt19937_64& rng, std::size_t n, double mean = 0.0, double stddev = 1.0) {
    std::normal_distribution<double> dist(mean, stddev);
    std::vector<double> out(n);
    for (auto& v : out) v = dist(rng);
    return out;
}

}  // namespace

void HarmonicSourceParams::validate() const {
    if (!(f0_min_hz > 0.0 && f0_min_hz <= f0_max_hz)) throw Error("f0 range must satisfy 0 < f0_min <= f0_max");
    if (f0_hz && !(*f0_hz > 0.0)) throw Error("fixed f0 must be positive");
    if (!(amp_min <= amp_max)) throw Error("amplitude range must satisfy amp_min <= amp_max");
    if (!(envelope_variance >= 0.0)) throw Error("envelope variance must be non-negative");
    if (envelope_order == 0) throw Error("envelope filter order must be positive");
    if (!(duration_s > 0.0)) throw Error("duration must be positive");
    if (!(envelope_warmup_s >= 0.0)) throw Error("envelope warm-up must be non-negative");
}

std::size_t harmonic_count(double f0_hz, double fs) {
    if (!(f0_hz > 0.0) || !(f0_hz < fs / 2.0)) throw Error("f0 must lie in (0, fs/2)");
    auto h = static_cast<std::size_t>(std::floor(fs / 2.0 / f0_hz));
    while (h > 1 && static_cast<double>(h) * f0_hz >= fs / 2.0) --h;
    return h;
}

namespace {

std::vector<double> gen_envelope(const HarmonicSourceParams& p, double fs, std::size_t n, std::mt19937_64& rng) {
    const auto warm = static_cast<std::size_t>(std::llround(p.envelope_warmup_s * fs));
    auto b = white_noise(rng, n + warm, p.envelope_mean, std::sqrt(p.envelope_variance));
    filter_cascade(butterworth_design(p.envelope_order, p.envelope_cutoff_hz, fs), b);
    return {b.begin() + static_cast<std::ptrdiff_t>(warm), b.end()};
}

HarmonicTarget draw_note(const HarmonicSourceParams& p, double fs, std::optional<double> f0, std::span<const double> env,
                         std::mt19937_64& rng) {
    HarmonicTarget t;
    t.f0_hz = f0 ? *f0 : std::uniform_real_distribution<double>(p.f0_min_hz, p.f0_max_hz)(rng);
    t.omega0 = 2.0 * kPi * t.f0_hz / fs;
    t.harmonics = harmonic_count(t.f0_hz, fs);
    std::uniform_real_distribution<double> amp(p.amp_min, p.amp_max), ph(-kPi, kPi);
    t.amplitudes.resize(t.harmonics);
    t.phases.resize(t.harmonics);
    for (std::size_t h = 0; h < t.harmonics; ++h) {
        t.amplitudes[h] = amp(rng);
        t.phases[h] = ph(rng);
    }
    t.envelope.assign(env.begin(), env.end());
    t.audio = AudioBuffer(1, env.size(), fs);
    auto y = t.audio.channel(0);
    for (std::size_t n = 0; n < env.size(); ++n) {
        double s = 0.0;
        for (std::size_t h = 0; h < t.harmonics; ++h) {
            const double arg = std::fmod(t.omega0 * static_cast<double>(n) * static_cast<double>(h + 1), 2.0 * kPi);
            s += t.amplitudes[h] * std::cos(arg + t.phases[h]);
        }
        y[n] = env[n] * s;
    }
    return t;
}

}  // namespace

HarmonicTarget gen_harmonic_target(const HarmonicSourceParams& params, double fs, std::size_t n_samples,
                                   std::uint64_t seed) {
    params.validate();
    if (!(fs > 0.0)) throw Error("sampling rate must be positive");
    const std::size_t n = n_samples ? n_samples : static_cast<std::size_t>(std::llround(params.duration_s * fs));
    auto rng = make_rng(seed);
    const auto env = gen_envelope(params, fs, n, rng);
    return draw_note(params, fs, params.f0_hz, env, rng);
}

NoteSequence gen_note_sequence(const HarmonicSourceParams& params, double fs, const std::vector<double>& f0s_hz,
                               double note_seconds, std::uint64_t seed) {
    params.validate();
    if (f0s_hz.empty()) throw Error("note sequence needs at least one f0");
    const auto per = static_cast<std::size_t>(std::llround(note_seconds * fs));
    if (per == 0) throw Error("note duration must be positive");
    auto rng = make_rng(seed);
    const auto env = gen_envelope(params, fs, per * f0s_hz.size(), rng);
    NoteSequence seq;
    seq.audio = AudioBuffer(1, env.size(), fs);
    for (std::size_t i = 0; i < f0s_hz.size(); ++i) {
        const std::span<const double> part(env.data() + i * per, per);
        auto note = draw_note(params, fs, f0s_hz[i], part, rng);
        std::copy(note.audio.channel(0).begin(), note.audio.channel(0).end(),
                  seq.audio.channel(0).begin() + static_cast<std::ptrdiff_t>(i * per));
        seq.onsets.push_back(i * per);
        seq.notes.push_back(std::move(note));
    }
    return seq;
}

std::vector<Biquad> butterworth_design(std::size_t order, double fc_hz, double fs) {
    if (order == 0) throw Error("filter order must be positive");
    if (!(fc_hz > 0.0 && fc_hz < fs / 2.0)) throw Error("cutoff must lie in (0, fs/2), got " + std::to_string(fc_hz));
    const double k = std::tan(kPi * fc_hz / fs);
    const double k2 = k * k;
    std::vector<Biquad> out;
    for (std::size_t i = 0; i < order / 2; ++i) {
        const double theta = kPi * static_cast<double>(2 * i + 1) / static_cast<double>(2 * order);
        const double two_zeta = 2.0 * std::sin(theta);  // 1/Q
        const double norm = 1.0 / (1.0 + two_zeta * k + k2);
        Biquad s;
        s.b0 = k2 * norm;
        s.b1 = 2.0 * s.b0;
        s.b2 = s.b0;
        s.a1 = 2.0 * (k2 - 1.0) * norm;
        s.a2 = (1.0 - two_zeta * k + k2) * norm;
        out.push_back(s);
    }
    if (order % 2) {
        Biquad s;
        s.b0 = k / (1.0 + k);
        s.b1 = s.b0;
        s.a1 = (k - 1.0) / (k + 1.0);
        out.push_back(s);
    }
    return out;
}

double cascade_magnitude(const std::vector<Biquad>& sections, double f_hz, double fs) {
    const double w = 2.0 * kPi * f_hz / fs;
    const cdouble z1 = std::polar(1.0, -w), z2 = z1 * z1;
    cdouble h = 1.0;
    for (const auto& s : sections) h *= (s.b0 + s.b1 * z1 + s.b2 * z2) / (1.0 + s.a1 * z1 + s.a2 * z2);
    return std::abs(h);
}

void filter_cascade(const std::vector<Biquad>& sections, std::span<double> x) {
    for (const auto& s : sections) {
        double z1 = 0.0, z2 = 0.0;  // transposed direct form II
        for (auto& v : x) {
            const double in = v;
            const double out = s.b0 * in + z1;
            z1 = s.b1 * in - s.a1 * out + z2;
            z2 = s.b2 * in - s.a2 * out;
            v = out;
        }
    }
}

AudioBuffer butterworth_lowpass(const AudioBuffer& x, std::size_t order, double fc_hz) {
    const auto sections = butterworth_design(order, fc_hz, x.fs());
    AudioBuffer y = x;
    for (std::size_t c = 0; c < y.channels(); ++c) filter_cascade(sections, y.channel(c));
    return y;
}

void RirSpec::validate() const {
    if (kind == Kind::file) {
        if (file.empty()) throw Error("file RIR needs a path");
        return;
    }
    if (!(rt60 >= 0.0)) throw Error("rt60 must be non-negative");
    if (!(mic_spacing_m >= 0.0) || !(speed_of_sound > 0.0)) throw Error("invalid array geometry");
    if (!(bulk_delay >= 0.0)) throw Error("bulk delay must be non-negative");
}

namespace {

constexpr int kSincHalfWidth = 16;

void add_fractional_impulse(std::span<double> h, double delay) {
    const double r = std::round(delay);
    if (std::abs(delay - r) < 1e-12) {
        h[static_cast<std::size_t>(r)] += 1.0;
        return;
    }
    const auto lo = static_cast<long>(std::floor(delay)) - kSincHalfWidth + 1;
    for (long n = std::max(0L, lo); n <= lo + 2 * kSincHalfWidth - 1 && n < static_cast<long>(h.size()); ++n) {
        const double t = static_cast<double>(n) - delay;
        const double sinc = std::sin(kPi * t) / (kPi * t);
        const double win = 0.5 * (1.0 + std::cos(kPi * t / kSincHalfWidth));
        h[static_cast<std::size_t>(n)] += sinc * win;
    }
}

}  // namespace

RirSet gen_rir(const RirSpec& spec, std::size_t mics, double fs, std::uint64_t seed) {
    spec.validate();
    if (mics == 0) throw Error("need at least one microphone");
    RirSet out;
    if (spec.kind == RirSpec::Kind::file) {
        if (!std::filesystem::exists(spec.file)) throw Error("RIR file not found: " + spec.file.string());
        AudioBuffer h = read_wav(spec.file);
        if (h.channels() < mics)
            throw Error("RIR file " + spec.file.string() + " has " + std::to_string(h.channels()) + " channels, need " +
                        std::to_string(mics));
        if (h.fs() != fs) throw Error("RIR file sampling rate does not match the scene");
        out.h = h.select_channels(mics);
        for (std::size_t m = 0; m < mics; ++m) {
            const auto ch = out.h.channel(m);
            const auto it = std::max_element(ch.begin(), ch.end(), [](double a, double b) { return std::abs(a) < std::abs(b); });
            out.delays.push_back(static_cast<double>(it - ch.begin()));
        }
        out.doa_deg = spec.doa_deg;
        return out;
    }

    auto rng = make_rng(seed);
    out.doa_deg = std::isnan(spec.doa_deg) ? std::uniform_real_distribution<double>(0.0, 180.0)(rng) : spec.doa_deg;
    // Far-field uniform linear array; mic 0 at the origin.
    const double step = spec.mic_spacing_m * std::cos(out.doa_deg * kPi / 180.0) * fs / spec.speed_of_sound;
    std::vector<double> rel(mics);
    for (std::size_t m = 0; m < mics; ++m) rel[m] = static_cast<double>(m) * step;
    const double lo = *std::min_element(rel.begin(), rel.end());
    for (double r : rel) {
        double d = spec.bulk_delay + r - lo;
        if (!spec.fractional_delay) d = std::round(d);
        out.delays.push_back(d);
    }
    const double max_delay = *std::max_element(out.delays.begin(), out.delays.end());
    const auto tail_len = static_cast<std::size_t>(std::ceil(spec.rt60 * fs));
    const std::size_t length = static_cast<std::size_t>(std::ceil(max_delay)) + kSincHalfWidth + tail_len + 1;
    out.h = AudioBuffer(mics, length, fs);
    for (std::size_t m = 0; m < mics; ++m) {
        auto h = out.h.channel(m);
        add_fractional_impulse(h, out.delays[m]);
        if (tail_len == 0) continue;
        const double direct = energy(h);
        const auto start = static_cast<std::size_t>(std::floor(out.delays[m])) + 1;
        std::vector<double> tail(length - start, 0.0);
        const auto noise = white_noise(rng, tail.size());
        for (std::size_t i = 0; i < tail.size(); ++i) {
            const double t = (static_cast<double>(start + i) - out.delays[m]) / fs;
            tail[i] = noise[i] * std::exp(-3.0 * std::log(10.0) * t / spec.rt60);
        }
        const double scale = std::sqrt(direct * std::pow(10.0, -spec.direct_to_tail_db / 10.0) / energy(tail));
        for (std::size_t i = 0; i < tail.size(); ++i) h[start + i] += scale * tail[i];
    }
    return out;
}

AudioBuffer convolve(std::span<const double> x, const AudioBuffer& rirs, std::size_t offset, std::size_t length) {
    if (x.empty() || rirs.length() == 0) throw Error("convolution of an empty signal");
    const std::size_t full = x.size() + rirs.length() - 1;
    const std::size_t n = std::bit_ceil(full);
    detail::Fft fwd(n, detail::Fft::Kind::forward_r2c), inv(n, detail::Fft::Kind::inverse_c2r);
    std::vector<double> buf(n, 0.0), res(n);
    std::vector<cdouble> xs(n / 2 + 1), hs(n / 2 + 1);
    std::copy(x.begin(), x.end(), buf.begin());
    fwd.forward_real(buf, xs);
    AudioBuffer out(rirs.channels(), length, rirs.fs());
    for (std::size_t c = 0; c < rirs.channels(); ++c) {
        std::fill(buf.begin(), buf.end(), 0.0);
        std::copy(rirs.channel(c).begin(), rirs.channel(c).end(), buf.begin());
        fwd.forward_real(buf, hs);
        for (std::size_t k = 0; k < hs.size(); ++k) hs[k] *= xs[k];
        inv.inverse_real(hs, res);
        auto o = out.channel(c);
        for (std::size_t i = 0; i < length && offset + i < full; ++i) o[i] = res[offset + i] / static_cast<double>(n);
    }
    return out;
}

void SceneConfig::validate() const {
    if (mics == 0) throw Error("scene needs at least one microphone");
    if (!(fs > 0.0)) throw Error("sampling rate must be positive");
    if (reference_mic >= mics) throw Error("reference microphone out of range");
}

namespace {

AudioBuffer raw_interferer(const AudioBuffer& rirs, std::size_t length, std::mt19937_64& rng) {
    const auto w = white_noise(rng, length + rirs.length() - 1);
    return convolve(w, rirs, rirs.length() - 1, length);
}

}  // namespace

Scene mix_scene(const AudioBuffer& target, const SceneConfig& config, const AudioBuffer& rirs_target,
                const AudioBuffer& rirs_interferer, std::uint64_t seed) {
    config.validate();
    if (target.channels() != 1) throw Error("target must be a single channel");
    if (rirs_target.channels() != config.mics || rirs_interferer.channels() != config.mics)
        throw Error("RIR channel count does not match the number of microphones");
    if (target.fs() != config.fs || rirs_target.fs() != config.fs || rirs_interferer.fs() != config.fs)
        throw Error("sampling rates of target, RIRs and scene differ");
    const std::size_t n = target.length();
    if (energy(target.channel(0)) == 0.0) throw Error("target has zero energy");

    Scene s;
    s.d = convolve(target.channel(0), rirs_target, 0, n);
    const double d_ref = energy(s.d.channel(config.reference_mic));
    if (d_ref == 0.0) throw Error("reverberant target has zero energy at the reference microphone");

    auto rng = make_rng(seed);
    s.interferer = raw_interferer(rirs_interferer, n, rng);
    s.gains.interferer =
        std::sqrt(d_ref / (energy(s.interferer.channel(config.reference_mic)) * std::pow(10.0, config.isnr_db / 10.0)));
    s.sensor = AudioBuffer(config.mics, n, config.fs);
    for (std::size_t m = 0; m < config.mics; ++m) {
        auto ch = s.sensor.channel(m);
        const auto w = white_noise(rng, n);
        const double g = std::sqrt(energy(s.d.channel(m)) / (energy(w) * std::pow(10.0, config.sensor_snr_db / 10.0)));
        s.gains.sensor.push_back(g);
        for (std::size_t i = 0; i < n; ++i) ch[i] = g * w[i];
        for (auto& v : s.interferer.channel(m)) v *= s.gains.interferer;
    }
    s.v = AudioBuffer(config.mics, n, config.fs);
    s.x = AudioBuffer(config.mics, n, config.fs);
    for (std::size_t m = 0; m < config.mics; ++m)
        for (std::size_t i = 0; i < n; ++i) {
            s.v(m, i) = s.interferer(m, i) + s.sensor(m, i);
            s.x(m, i) = s.d(m, i) + s.v(m, i);
        }
    return s;
}

AudioBuffer render_noise(const SceneConfig& config, const AudioBuffer& rirs_interferer, const SceneGains& gains,
                         std::size_t length, std::uint64_t seed) {
    config.validate();
    if (gains.sensor.size() != config.mics) throw Error("scene gains do not match the number of microphones");
    auto rng = make_rng(seed);
    AudioBuffer v = raw_interferer(rirs_interferer, length, rng);
    for (std::size_t m = 0; m < config.mics; ++m) {
        const auto w = white_noise(rng, length);
        auto ch = v.channel(m);
        for (std::size_t i = 0; i < length; ++i) ch[i] = gains.interferer * ch[i] + gains.sensor[m] * w[i];
    }
    return v;
}

SyntheticScene make_synthetic_scene(const SceneConfig& config, const HarmonicSourceParams& source, const RirSpec& rir,
                                    double noise_only_s, std::uint64_t seed) {
    config.validate();
    SyntheticScene s;
    s.seed = seed;
    s.truth = gen_harmonic_target(source, config.fs, 0, derive_seed(seed, 0));
    s.rir_target = gen_rir(rir, config.mics, config.fs, derive_seed(seed, 1));
    s.rir_interferer = gen_rir(rir, config.mics, config.fs, derive_seed(seed, 2));
    s.mix = mix_scene(s.truth.audio, config, s.rir_target.h, s.rir_interferer.h, derive_seed(seed, 3));
    s.noise_only = render_noise(config, s.rir_interferer.h, s.mix.gains,
                                static_cast<std::size_t>(std::llround(noise_only_s * config.fs)), derive_seed(seed, 4));
    return s;
}

void export_scene(const std::filesystem::path& dir, const SyntheticScene& scene, const SceneConfig& config) {
    std::filesystem::create_directories(dir);
    write_wav(dir / "noisy.wav", scene.mix.x);
    write_wav(dir / "target.wav", scene.mix.d);
    write_wav(dir / "noise.wav", scene.mix.v);
    write_wav(dir / "noise_only.wav", scene.noise_only);
    std::ofstream meta(dir / "scene.txt");
    if (!meta) throw Error("cannot write " + (dir / "scene.txt").string());
    meta << std::setprecision(12) << "seed = " << scene.seed << "\nfs = " << config.fs << "\nmics = " << config.mics
         << "\nf0_hz = " << scene.truth.f0_hz << "\nomega0 = " << scene.truth.omega0
         << "\nharmonics = " << scene.truth.harmonics << "\nisnr_db = " << config.isnr_db
         << "\nsensor_snr_db = " << config.sensor_snr_db << "\ntarget_doa_deg = " << scene.rir_target.doa_deg
         << "\ninterferer_doa_deg = " << scene.rir_interferer.doa_deg << '\n';
}

}  // namespace cmwf
