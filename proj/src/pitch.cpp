#include "cmwf/pitch.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <numeric>
#include <tuple>

#include <boost/math/tools/minima.hpp>

#include "cmwf/error.hpp"
#include "fft.hpp"

namespace cmwf {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Harmonics used while refining f0; enough for sub-0.01% precision on clean frames.
constexpr std::size_t kRefineOrder = 40;

struct Scored {
    double score = -std::numeric_limits<double>::infinity();
    std::size_t order = 0;
    double explained = 0.0;
};

// Penalized log-likelihood of the best order given cumulative explained energies.
Scored best_order(std::span<const double> cumulative, double total, double n, double penalty) {
    Scored best;
    const double floor = 1e-12 * total;
    const double log_n = std::log(n);
    for (std::size_t h = 1; h <= cumulative.size(); ++h) {
        const double residual = std::max(total - cumulative[h - 1], floor);
        const double s = -n * std::log(residual) - penalty * static_cast<double>(2 * h + 1) * log_n;
        if (s > best.score) best = {s, h, cumulative[h - 1]};
    }
    return best;
}

std::size_t harmonic_limit(double f0, double fs, std::size_t max_order) {
    const double nyq = 0.5 * fs;
    auto h = static_cast<std::size_t>(std::floor(nyq / f0));
    if (static_cast<double>(h) * f0 >= nyq) --h;
    return std::min(h, max_order);
}

}  // namespace

std::size_t pitch_frame_length(double fs, const PitchConfig& config) {
    if (config.frame_length) return config.frame_length;
    const auto min_len = static_cast<std::size_t>(std::ceil(2.0 * fs / config.grid.f_lo));
    return std::bit_ceil(min_len);
}

PitchEstimate estimate_f0_nls(std::span<const double> frame, double fs, const PitchConfig& config) {
    const PitchGrid& g = config.grid;
    if (!(g.f_lo > 0.0) || !(g.f_lo < g.f_hi) || !(g.step > 0.0))
        throw Error("pitch grid must satisfy 0 < f_lo < f_hi and step > 0");
    if (g.f_hi >= 0.5 * fs) throw Error("pitch grid upper bound must lie below Nyquist");
    const std::size_t n = frame.size();
    if (static_cast<double>(n) < 2.0 * fs / g.f_lo)
        throw Error("pitch frame of " + std::to_string(n) + " samples is shorter than two periods of f_lo");

    // Hann taper; harmonic energies are scaled so a windowed sinusoid keeps its share of the total.
    const double dn = static_cast<double>(n);
    std::vector<double> xw(n);
    double wsum = 0.0, wsq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double w = 0.5 - 0.5 * std::cos(kTwoPi * (static_cast<double>(i) + 0.5) / dn);
        xw[i] = frame[i] * w;
        wsum += w;
        wsq += w * w;
    }
    const double gain = 2.0 * wsq / (wsum * wsum);
    const double total = std::inner_product(xw.begin(), xw.end(), xw.begin(), 0.0);
    PitchEstimate none;
    if (!(total > 0.0) || !std::isfinite(total)) return none;

    // Coarse stage: harmonic summation on a zero-padded periodogram.
    const std::size_t pad = std::max<std::size_t>(16384, std::bit_ceil(16 * n));
    std::vector<double> buf(pad, 0.0);
    std::copy(xw.begin(), xw.end(), buf.begin());
    std::vector<cdouble> spec(pad / 2 + 1);
    {
        detail::Fft fft(pad, detail::Fft::Kind::forward_r2c);
        fft.forward_real(buf, spec);
    }
    std::vector<double> power(spec.size());
    for (std::size_t k = 0; k < spec.size(); ++k) power[k] = std::norm(spec[k]);
    const double bins_per_hz = static_cast<double>(pad) / fs;
    const auto power_at = [&](double f) {
        const double pos = f * bins_per_hz;
        const auto k = static_cast<std::size_t>(pos);
        if (k + 1 >= power.size()) return power.back();
        const double t = pos - static_cast<double>(k);
        return (1.0 - t) * power[k] + t * power[k + 1];
    };

    // With refinement enabled the coarse search runs on an oversampled grid.
    std::size_t oversample = 1;
    if (config.refine_bits > 0) {
        // Automatic: the offset of the highest harmonic at f_lo stays within half a DFT bin.
        const double hmax_lo = static_cast<double>(harmonic_limit(g.f_lo, fs, config.max_order));
        oversample = config.coarse_oversample
                         ? config.coarse_oversample
                         : static_cast<std::size_t>(std::ceil(g.step * hmax_lo / (fs / dn)));
    }
    const double step = g.step / static_cast<double>(std::max<std::size_t>(oversample, 1));
    const auto steps = static_cast<std::size_t>(std::floor((g.f_hi - g.f_lo) / step + 1e-9)) + 1;
    std::vector<double> coarse(steps);
    std::vector<double> cumulative;
    for (std::size_t i = 0; i < steps; ++i) {
        const double f0 = g.f_lo + static_cast<double>(i) * step;
        const std::size_t hmax = harmonic_limit(f0, fs, config.max_order);
        cumulative.assign(hmax, 0.0);
        double acc = 0.0;
        for (std::size_t h = 1; h <= hmax; ++h) {
            acc += gain * power_at(static_cast<double>(h) * f0);
            cumulative[h - 1] = acc;
        }
        coarse[i] = hmax ? best_order(cumulative, total, dn, config.order_penalty).score
                         : -std::numeric_limits<double>::infinity();
    }

    // Strongest local maxima of the coarse score.
    std::vector<std::size_t> peaks;
    for (std::size_t i = 0; i < steps; ++i) {
        const bool left = i == 0 || coarse[i] >= coarse[i - 1];
        const bool right = i + 1 == steps || coarse[i] > coarse[i + 1];
        if (left && right) peaks.push_back(i);
    }
    std::sort(peaks.begin(), peaks.end(), [&](auto a, auto b) { return coarse[a] > coarse[b]; });
    if (peaks.size() > config.refine_candidates) peaks.resize(std::max<std::size_t>(config.refine_candidates, 1));

    // Fine stage: exact DTFT of the frame at the harmonics of a candidate.
    std::vector<double> br(n), bi(n), pr(n), pi(n);
    // Cumulative explained energy of harmonics 1..hmax at f0.
    const auto harmonic_energies = [&](double f0, std::size_t hmax) {
        const double theta = kTwoPi * f0 / fs;
        for (std::size_t i = 0; i < n; ++i) {
            const double ph = std::remainder(theta * static_cast<double>(i), kTwoPi);
            br[i] = pr[i] = std::cos(ph);
            bi[i] = pi[i] = -std::sin(ph);
        }
        cumulative.assign(hmax, 0.0);
        double acc = 0.0;
        for (std::size_t h = 1; h <= hmax; ++h) {
            if (h > 1)
                for (std::size_t i = 0; i < n; ++i) {
                    const double r = pr[i] * br[i] - pi[i] * bi[i];
                    pi[i] = pr[i] * bi[i] + pi[i] * br[i];
                    pr[i] = r;
                }
            double xr = 0.0, xi = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                xr += xw[i] * pr[i];
                xi += xw[i] * pi[i];
            }
            acc += gain * (xr * xr + xi * xi);
            cumulative[h - 1] = acc;
        }
        return acc;
    };
    const auto exact = [&](double f0) {
        const std::size_t hmax = harmonic_limit(f0, fs, config.max_order);
        if (hmax == 0) return Scored{};
        harmonic_energies(f0, hmax);
        return best_order(cumulative, total, dn, config.order_penalty);
    };

    // Refinement: continuous search at the selected order, then a re-scored order.
    const auto refine = [&](double f0, Scored s) {
        double width = step;
        for (int round = 0; round < 2; ++round) {
            const std::size_t order = std::min(s.order, kRefineOrder);
            const auto cost = [&](double f) {
                return -harmonic_energies(f, std::min(order, harmonic_limit(f, fs, config.max_order)));
            };
            const double lo = std::max(g.f_lo, f0 - width), hi = std::min(g.f_hi, f0 + width);
            const double f = boost::math::tools::brent_find_minima(cost, lo, hi, config.refine_bits).first;
            const Scored r = exact(f);
            if (r.order == 0) break;
            s = r;
            f0 = f;
            width = step / 4.0;
        }
        return std::make_pair(f0, s);
    };

    // Each coarse peak: best neighbouring grid point, refined when enabled.
    Scored best;
    double best_f0 = 0.0;
    for (std::size_t p : peaks) {
        Scored local;
        double local_f0 = 0.0;
        const std::size_t lo = p >= 2 ? p - 2 : 0;
        const std::size_t hi = std::min(steps - 1, p + 2);
        for (std::size_t i = lo; i <= hi; ++i) {
            const double f0 = g.f_lo + static_cast<double>(i) * step;
            const Scored s = exact(f0);
            if (s.score > local.score) {
                local = s;
                local_f0 = f0;
            }
        }
        if (local.order == 0) continue;
        if (config.refine_bits > 0) std::tie(local_f0, local) = refine(local_f0, local);
        if (local.score > best.score) {
            best = local;
            best_f0 = local_f0;
        }
    }
    if (best.order == 0) return none;

    if (config.refine_bits > 0) {
        // Octave errors: sub-multiples must explain clearly more, multiples almost as much.
        for (double div : {2.0, 3.0}) {
            const double f = best_f0 / div;
            if (f < g.f_lo) continue;
            const Scored s = exact(f);
            if (s.score > best.score && s.explained > (1.0 + config.octave_tolerance) * best.explained) {
                best = s;
                best_f0 = f;
            }
        }
        for (bool moved = true; moved;) {
            moved = false;
            for (double mult : {2.0, 3.0}) {
                const double f = best_f0 * mult;
                if (f > g.f_hi) continue;
                const Scored s = exact(f);
                if (s.order > 0 && s.explained >= (1.0 - config.octave_tolerance) * best.explained) {
                    best = s;
                    best_f0 = f;
                    moved = true;
                    break;
                }
            }
        }
    }

    PitchEstimate est;
    est.harmonic_ratio = std::min(best.explained / total, 1.0);
    est.voiced = est.harmonic_ratio >= config.voicing_threshold;
    if (est.voiced) {
        est.f0_hz = best_f0;
        est.order = best.order;
    }
    return est;
}

double delta_alpha(double prev, double curr, double eps_guard) { return std::abs(curr - prev) / (prev + eps_guard); }

void SmoothingParams::validate() const {
    if (!(0.0 < d0 && d0 < d1)) throw Error("smoothing thresholds must satisfy 0 < D0 < D1");
    if (!(eps_guard > 0.0)) throw Error("smoothing guard must be positive");
}

PitchTrack smooth_f0(std::span<const double> raw, const SmoothingParams& params) {
    params.validate();
    PitchTrack t;
    const std::size_t n = raw.size();
    t.raw.assign(raw.begin(), raw.end());
    t.smoothed.assign(n, 0.0);
    t.delta.assign(n, 0.0);
    t.voiced.assign(n, 0);
    t.reanchored.assign(n, 0);
    double prev_raw = 0.0;
    double smooth = 0.0;
    std::size_t steady = 0;
    for (std::size_t l = 0; l < n; ++l) {
        const double curr = std::max(raw[l], 0.0);
        t.raw[l] = curr;
        const bool voiced = curr > 0.0;
        t.voiced[l] = voiced;
        const double d = delta_alpha(prev_raw, curr, params.eps_guard);
        t.delta[l] = d;
        steady = voiced && d < params.d0 ? steady + 1 : 0;

        if (l == 0) {
            smooth = 0.0;  // alpha-bar(0) = 0
        } else if (smooth == 0.0 && voiced) {
            smooth = curr;  // first voiced frame seeds the track
        } else if (d >= params.d0 && d < params.d1) {
            smooth = curr;
        } else if (params.reanchor_frames && voiced && steady >= params.reanchor_frames &&
                   delta_alpha(smooth, curr, params.eps_guard) >= params.d0) {
            smooth = curr;
            t.reanchored[l] = 1;
        }
        t.smoothed[l] = smooth;
        prev_raw = curr;
    }
    return t;
}

std::vector<double> track_raw_f0(const AudioBuffer& mono, const WindowSpec& win, const PitchConfig& config) {
    if (mono.channels() != 1) throw Error("pitch tracking expects a single channel");
    const std::size_t frames = frame_count(mono.length(), win.length, win.hop);
    const std::size_t len = pitch_frame_length(mono.fs(), config);
    const auto x = mono.channel(0);
    std::vector<double> out(frames, 0.0), buf(len);
    for (std::size_t l = 0; l < frames; ++l) {
        const auto centre = static_cast<std::ptrdiff_t>(l * win.hop + win.length / 2);
        const std::ptrdiff_t start = centre - static_cast<std::ptrdiff_t>(len / 2);
        for (std::size_t i = 0; i < len; ++i) {
            const std::ptrdiff_t idx = start + static_cast<std::ptrdiff_t>(i);
            buf[i] = idx >= 0 && idx < static_cast<std::ptrdiff_t>(x.size()) ? x[static_cast<std::size_t>(idx)] : 0.0;
        }
        const PitchEstimate e = estimate_f0_nls(buf, mono.fs(), config);
        out[l] = e.voiced ? kTwoPi * e.f0_hz / mono.fs() : 0.0;
    }
    return out;
}

void write_pitch_csv(const std::filesystem::path& path, const PitchTrack& track, double fs) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    const double to_hz = fs / kTwoPi;
    out << "frame,raw_f0_hz,voiced,smoothed_f0_hz,delta_alpha\n" << std::setprecision(12);
    for (std::size_t l = 0; l < track.size(); ++l)
        out << l << ',' << track.raw[l] * to_hz << ',' << int(track.voiced[l]) << ',' << track.smoothed[l] * to_hz << ','
            << track.delta[l] << '\n';
}

}  // namespace cmwf
