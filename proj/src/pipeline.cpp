#include "cmwf/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>

#include "cmwf/error.hpp"
#include "cmwf/kernels.hpp"
#include "fft.hpp"

namespace cmwf {

void EnhanceConfig::validate() const {
    window.validate();
    if (!window.is_cola()) throw Error("window/hop pair is not overlap-add consistent");
    if (shifts < 1) throw Error("number of shifts C must be at least 1");
    if (!(eps_bin >= 0.0)) throw Error("eps_bin must be non-negative");
    if (!(loading.min <= loading.max)) throw Error("loading bounds must satisfy lambda_min <= lambda_max");
    if (!(beta > 0.0 && beta <= 1.0)) throw Error("beta must lie in (0, 1]");
    smoothing.validate();
}

const AudioBuffer& EnhanceOutputs::output(Variant v) const {
    for (const auto& [var, audio] : outputs)
        if (var == v) return audio;
    throw Error("no output for variant " + std::string(variant_name(v)));
}

namespace {

// Moves the reference microphone to channel 0 so e_0 selects it.
AudioBuffer with_reference_first(const AudioBuffer& a, std::size_t ref) {
    if (ref == 0) return a;
    if (ref >= a.channels()) throw Error("reference microphone out of range");
    AudioBuffer out(a.channels(), a.length(), a.fs());
    std::size_t dst = 1;
    for (std::size_t c = 0; c < a.channels(); ++c) {
        const std::size_t to = c == ref ? 0 : dst++;
        std::copy(a.channel(c).begin(), a.channel(c).end(), out.channel(to).begin());
    }
    return out;
}

struct Prepared {
    AudioBuffer noisy, noise, target;
    bool has_target = false;
};

Prepared prepare(const EnhanceInputs& in, std::span<const Variant> variants, const EnhanceConfig& cfg) {
    cfg.validate();
    in.noisy.validate();
    in.noise_only.validate();
    if (variants.empty()) throw Error("no variants requested");
    if (in.noisy.channels() != in.noise_only.channels())
        throw Error("noisy input and noise-only segment have different channel counts");
    if (in.noisy.fs() != in.noise_only.fs()) throw Error("noisy input and noise-only segment have different rates");
    if (static_cast<double>(in.noise_only.length()) < cfg.min_noise_seconds * in.noise_only.fs() - 0.5)
        throw Error("noise-only segment must last at least " + std::to_string(cfg.min_noise_seconds) + " s");
    const bool need_target = std::any_of(variants.begin(), variants.end(), needs_clean_target);
    Prepared p;
    p.noisy = with_reference_first(in.noisy, cfg.reference_mic);
    p.noise = with_reference_first(in.noise_only, cfg.reference_mic);
    if (need_target) {
        if (!in.clean_target) throw Error("oracle variants need the clean reverberant target");
        in.clean_target->validate();
        if (in.clean_target->channels() != in.noisy.channels() || in.clean_target->length() != in.noisy.length())
            throw Error("clean target must match the noisy input in channels and length");
        p.target = with_reference_first(*in.clean_target, cfg.reference_mic);
        p.has_target = true;
    }
    return p;
}

CMatrix row_major_to_matrix(const std::vector<cdouble>& buf, std::size_t n) {
    std::vector<cdouble> tmp(buf);
    kernels::mirror_lower(tmp.data(), n);
    return Eigen::Map<const Eigen::Matrix<cdouble, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        tmp.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
}

CVector unit_vector(std::size_t n) {
    CVector e = CVector::Zero(static_cast<Eigen::Index>(n));
    e(0) = 1.0;
    return e;
}

// Statistics for one set of bins, shared by narrowband and cyclic processing.
struct BinStats {
    const CMatrix* sx = nullptr;
    const CMatrix* sv = nullptr;  // block-diagonal
    const CMatrix* sd = nullptr;
    const CVector* sxs = nullptr;
};

WeightSolution solve_bin(Estimator est, const BinStats& s, std::size_t rank, LoadingBounds bounds, long bin) {
    switch (est) {
        case Estimator::blind: return cmwf_weights_blind(*s.sx, *s.sv, rank, bounds, bin);
        case Estimator::oracle_plus: return cmwf_weights_oracle_plus(*s.sd, *s.sv, bounds, bin);
        case Estimator::oracle_pp: {
            const double lambda = diag_loading_lambda(*s.sd, bounds);
            return {cmwf_weights_oracle_pp(*s.sx, *s.sxs, lambda, bin), lambda};
        }
        case Estimator::identity: break;
    }
    return {unit_vector(static_cast<std::size_t>(s.sx->rows())), 0.0};
}

}  // namespace

BatchResult batch_enhance(const EnhanceInputs& in, double alpha1, std::span<const Variant> variants,
                          const EnhanceConfig& cfg) {
    const Prepared p = prepare(in, variants, cfg);
    const WindowSpec& win = cfg.window;
    const std::size_t m = p.noisy.channels();
    const std::size_t bins = win.length / 2 + 1;

    const StftTensor x_plain = stft(p.noisy, win);
    const StftTensor v_plain = stft(p.noise, win);
    std::optional<StftTensor> d_plain;
    if (p.has_target) d_plain = stft(p.target, win);

    std::vector<Estimator> estimators;
    bool any_cyclic = false;
    for (Variant v : variants) {
        const Estimator e = estimator_of(v);
        if (e != Estimator::identity && std::find(estimators.begin(), estimators.end(), e) == estimators.end())
            estimators.push_back(e);
        any_cyclic = any_cyclic || is_cyclic(v);
    }
    const bool need_sd = std::any_of(estimators.begin(), estimators.end(), [](Estimator e) { return e != Estimator::blind; });
    const bool need_sxs = std::find(estimators.begin(), estimators.end(), Estimator::oracle_pp) != estimators.end();

    struct Stats {
        SpectralSpatialCov sx, sv, sd;
        std::vector<CVector> sxs;
    };
    const auto gather = [&](const CyclicSet& set, std::span<const std::size_t> sel) {
        Stats s;
        const ModulatedStftStack xs = build_stack(p.noisy, x_plain, set, win, sel);
        s.sx = assemble_cov(xs, {}, CovRole::noisy);
        s.sv = blkdiag_project(assemble_cov(build_stack(p.noise, v_plain, set, win, sel), {}, CovRole::noise), m);
        if (need_sd) s.sd = assemble_cov(build_stack(p.target, *d_plain, set, win, sel), {}, CovRole::target);
        if (need_sxs) s.sxs = assemble_cross(xs, *d_plain, 0);
        return std::make_pair(std::move(s), xs);
    };
    const auto stats_at = [&](const Stats& s, std::size_t i) {
        BinStats b{&s.sx.mats[i], &s.sv.mats[i], nullptr, nullptr};
        if (need_sd) b.sd = &s.sd.mats[i];
        if (need_sxs) b.sxs = &s.sxs[i];
        return b;
    };

    BatchResult result;
    const CyclicSet nb_set = narrowband_set();
    const auto [nb, nb_stack] = gather(nb_set, {});
    std::map<Estimator, std::vector<WeightSolution>> narrow;
    for (Estimator e : estimators) {
        auto& ws = narrow[e];
        ws.reserve(bins);
        for (std::size_t k = 0; k < bins; ++k) ws.push_back(solve_bin(e, stats_at(nb, k), 1, cfg.loading, static_cast<long>(k)));
    }

    BinRouting routing = route_bins(win.length, nb_set, cfg.eps_bin);
    CyclicSet set = nb_set;
    std::map<Estimator, std::vector<WeightSolution>> cyclic;
    std::optional<ModulatedStftStack> cyc_stack;
    if (any_cyclic && alpha1 > 0.0) {
        set = build_cyclic_set(alpha1, cfg.shifts);
        routing = route_bins(win.length, set, cfg.eps_bin, cfg.routing);
        const auto sel = routing.cyclic_bins();
        if (!sel.empty()) {
            auto [cs, stack] = gather(set, sel);
            for (Estimator e : estimators) {
                if (std::none_of(variants.begin(), variants.end(),
                                 [&](Variant v) { return is_cyclic(v) && estimator_of(v) == e; }))
                    continue;
                auto& ws = cyclic[e];
                for (std::size_t i = 0; i < sel.size(); ++i) {
                    try {
                        ws.push_back(solve_bin(e, stats_at(cs, i), set.size(), cfg.loading, static_cast<long>(sel[i])));
                    } catch (const LinalgError& err) {
                        ws.push_back({});  // empty: falls back to narrowband below
                        ++result.diagnostics.fallback_bins;
                        result.notes.push_back(std::string("cyclic weights failed, using MWF: ") + err.what());
                    }
                }
            }
            cyc_stack = std::move(stack);
        }
    } else if (any_cyclic) {
        result.notes.emplace_back("signal treated as unvoiced: cyclic variants reduce to MWF");
    }

    const auto sel = routing.cyclic_bins();
    for (Variant v : variants) {
        BeamformerWeights w;
        w.variant = v;
        w.routing = is_cyclic(v) ? routing : route_bins(win.length, nb_set, cfg.eps_bin);
        w.per_bin.resize(bins);
        w.lambdas.assign(bins, 0.0);
        const Estimator e = estimator_of(v);
        for (std::size_t k = 0; k < bins; ++k) {
            if (e == Estimator::identity) {
                w.per_bin[k] = unit_vector(m);
            } else {
                w.per_bin[k] = narrow[e][k].w;
                w.lambdas[k] = narrow[e][k].lambda;
            }
        }
        if (is_cyclic(v) && cyc_stack) {
            const auto& ws = cyclic[e];
            for (std::size_t i = 0; i < sel.size(); ++i) {
                if (ws[i].w.size() == 0) {
                    w.routing.routes[sel[i]] = Route::narrowband;
                    continue;
                }
                w.per_bin[sel[i]] = ws[i].w;
                w.lambdas[sel[i]] = ws[i].lambda;
            }
        }
        const StftTensor out = apply_weights(w, x_plain, cyc_stack ? &*cyc_stack : nullptr);
        result.outputs.emplace_back(v, istft(out, win));
    }
    result.diagnostics.set = set;
    result.diagnostics.routing = routing;
    return result;
}

std::string_view gate_name(Gate g) {
    switch (g) {
        case Gate::burn_in: return "burn_in";
        case Gate::mwf_unvoiced: return "mwf_unvoiced";
        case Gate::mwf_delta: return "mwf_delta";
        case Gate::mwf_stale: return "mwf_stale";
        case Gate::mwf_warmup: return "mwf_warmup";
        case Gate::cyclic: return "cyclic";
    }
    return "?";
}

namespace {

// Exponentially weighted per-bin statistics of a stacked signal. The first updates use
// weight 1/n so the estimate starts as a plain average.
class RunningStats {
   public:
    RunningStats(std::size_t bins, std::size_t dim, bool target, bool cross)
        : bins_(bins), dim_(dim), sx_(bins * dim * dim), sd_(target ? bins * dim * dim : 0), sxs_(cross ? bins * dim : 0) {}

    std::size_t count() const noexcept { return count_; }
    std::size_t dim() const noexcept { return dim_; }

    // x, d: [bin][dim] vectors for this frame; dref: clean reference STFT per bin.
    void update(std::span<const cdouble> x, std::span<const cdouble> d, std::span<const cdouble> dref, double beta) {
        const double w = std::max(beta, 1.0 / static_cast<double>(count_ + 1));
        const std::size_t nn = dim_ * dim_;
        for (std::size_t k = 0; k < bins_; ++k) {
            kernels::herk_update(sx_.data() + k * nn, x.data() + k * dim_, dim_, 1.0 - w, w);
            if (!sd_.empty()) kernels::herk_update(sd_.data() + k * nn, d.data() + k * dim_, dim_, 1.0 - w, w);
            if (!sxs_.empty()) kernels::axpy(sxs_.data() + k * dim_, x.data() + k * dim_, dim_, 1.0 - w, w * std::conj(dref[k]));
        }
        ++count_;
    }

    CMatrix sx(std::size_t k) const { return slice(sx_, k); }
    CMatrix sd(std::size_t k) const { return slice(sd_, k); }
    CVector sxs(std::size_t k) const {
        return Eigen::Map<const CVector>(sxs_.data() + k * dim_, static_cast<Eigen::Index>(dim_));
    }

   private:
    CMatrix slice(const std::vector<cdouble>& buf, std::size_t k) const {
        std::vector<cdouble> tmp(buf.begin() + static_cast<std::ptrdiff_t>(k * dim_ * dim_),
                                 buf.begin() + static_cast<std::ptrdiff_t>((k + 1) * dim_ * dim_));
        return row_major_to_matrix(tmp, dim_);
    }

    std::size_t bins_, dim_;
    std::size_t count_ = 0;
    std::vector<cdouble> sx_, sd_, sxs_;
};

// Frame l of the alpha-modulated signal for every channel; bins 0..K/2 written to
// out[bin * stride + block_offset + ch].
class ModulatedFrames {
   public:
    explicit ModulatedFrames(const WindowSpec& win)
        : win_(win), w_(win.window()), fft_(win.length, detail::Fft::Kind::forward_c2c), buf_(win.length), spec_(win.length) {}

    void compute(const AudioBuffer& a, std::size_t frame, double alpha, std::span<cdouble> out, std::size_t stride,
                 std::size_t block_offset) {
        const std::size_t k = win_.length, start = frame * win_.hop, n = a.length();
        for (std::size_t ch = 0; ch < a.channels(); ++ch) {
            const auto x = a.channel(ch);
            for (std::size_t i = 0; i < k; ++i) {
                const std::size_t idx = start + i;
                if (idx >= n) {
                    buf_[i] = 0.0;
                    continue;
                }
                const double ph = std::remainder(alpha * static_cast<double>(idx), 2.0 * std::numbers::pi);
                buf_[i] = x[idx] * w_[i] * cdouble(std::cos(ph), std::sin(ph));
            }
            fft_.forward(buf_, spec_);
            for (std::size_t b = 0; b <= k / 2; ++b) out[b * stride + block_offset + ch] = spec_[b];
        }
    }

   private:
    WindowSpec win_;
    std::vector<double> w_;
    detail::Fft fft_;
    std::vector<cdouble> buf_, spec_;
};

}  // namespace

RecursiveResult recursive_enhance(const EnhanceInputs& in, const PitchTrack& track, std::span<const Variant> variants,
                                  const EnhanceConfig& cfg) {
    const Prepared p = prepare(in, variants, cfg);
    const WindowSpec& win = cfg.window;
    const std::size_t m = p.noisy.channels();
    const std::size_t bins = win.length / 2 + 1;
    const StftTensor x_plain = stft(p.noisy, win);
    const std::size_t frames = x_plain.frames();
    if (track.size() != frames)
        throw Error("pitch track has " + std::to_string(track.size()) + " frames, STFT has " + std::to_string(frames));
    std::optional<StftTensor> d_plain;
    if (p.has_target) d_plain = stft(p.target, win);
    const StftTensor v_plain = stft(p.noise, win);

    std::vector<Estimator> estimators;
    bool any_cyclic = false;
    for (Variant v : variants) {
        const Estimator e = estimator_of(v);
        if (e != Estimator::identity && std::find(estimators.begin(), estimators.end(), e) == estimators.end())
            estimators.push_back(e);
        any_cyclic = any_cyclic || is_cyclic(v);
    }
    const bool need_sd = std::any_of(estimators.begin(), estimators.end(), [](Estimator e) { return e != Estimator::blind; });
    const bool need_sxs = std::find(estimators.begin(), estimators.end(), Estimator::oracle_pp) != estimators.end();

    // Narrowband noise statistics come from the noise-only segment once.
    const SpectralSpatialCov rv = assemble_cov(build_stack(p.noise, v_plain, narrowband_set(), win), {}, CovRole::noise);

    RunningStats nb(bins, m, need_sd, need_sxs);
    std::optional<RunningStats> cyc;
    CyclicSet set = narrowband_set();
    BinRouting routing = route_bins(win.length, set, cfg.eps_bin, cfg.routing);
    SpectralSpatialCov sv_cyc;
    ModulatedFrames modx(win), modd(win);

    std::vector<StftTensor> out;
    for (std::size_t i = 0; i < variants.size(); ++i) out.emplace_back(1, frames, win, p.noisy.length(), p.noisy.fs(), false);

    RecursiveResult result;
    result.frames.reserve(frames);
    std::vector<cdouble> xnb(bins * m), dnb(bins * m), dref(bins);
    std::vector<cdouble> xst, dst;

    for (std::size_t l = 0; l < frames; ++l) {
        FrameDiagnostics diag;
        diag.frame = l;
        diag.alpha_bar = track.smoothed[l];
        diag.delta_alpha = track.delta[l];
        diag.voiced = track.voiced[l] != 0;

        // Cyclic set follows alpha-bar; statistics are rebuilt only when it changes.
        const double abar = track.smoothed[l];
        if (any_cyclic && abar > 0.0 && abar != set.alpha1) {
            const bool first = !(set.alpha1 > 0.0);
            const double change = first ? 1.0 : delta_alpha(set.alpha1, abar, cfg.smoothing.eps_guard);
            const CyclicSet next = build_cyclic_set(abar, cfg.shifts);
            const bool reset = first || cfg.reset_on_update || change >= cfg.smoothing.d1 || next.size() != set.size();
            set = next;
            routing = route_bins(win.length, set, cfg.eps_bin, cfg.routing);
            sv_cyc = blkdiag_project(assemble_cov(build_stack(p.noise, v_plain, set, win), {}, CovRole::noise), m);
            if (reset) cyc.emplace(bins, m * set.size(), need_sd, need_sxs);
            diag.remodulated = true;
        }

        for (std::size_t k = 0; k < bins; ++k)
            for (std::size_t c = 0; c < m; ++c) {
                xnb[k * m + c] = x_plain(c, k, l);
                if (d_plain) dnb[k * m + c] = (*d_plain)(c, k, l);
            }
        if (d_plain)
            for (std::size_t k = 0; k < bins; ++k) dref[k] = (*d_plain)(0, k, l);
        nb.update(xnb, dnb, dref, cfg.beta);

        if (cyc) {
            const std::size_t dim = m * set.size();
            xst.assign(bins * dim, cdouble{});
            if (d_plain) dst.assign(bins * dim, cdouble{});
            for (std::size_t k = 0; k < bins; ++k)
                for (std::size_t c = 0; c < m; ++c) {
                    xst[k * dim + c] = xnb[k * m + c];
                    if (d_plain) dst[k * dim + c] = dnb[k * m + c];
                }
            for (std::size_t c = 1; c < set.size(); ++c) {
                modx.compute(p.noisy, l, set.shifts[c], xst, dim, c * m);
                if (d_plain && need_sd) modd.compute(p.target, l, set.shifts[c], dst, dim, c * m);
            }
            cyc->update(xst, dst, dref, cfg.beta);
        }

        if (nb.count() < cfg.burn_in_frames) diag.gate = Gate::burn_in;
        else if (!(set.alpha1 > 0.0) || !diag.voiced) diag.gate = Gate::mwf_unvoiced;
        else if (track.delta[l] >= cfg.smoothing.d1) diag.gate = Gate::mwf_delta;
        else if (delta_alpha(set.alpha1, track.raw[l], cfg.smoothing.eps_guard) >= cfg.smoothing.d1) diag.gate = Gate::mwf_stale;
        else if (!cyc || cyc->count() < cfg.burn_in_frames) diag.gate = Gate::mwf_warmup;
        else diag.gate = Gate::cyclic;

        if (diag.gate == Gate::burn_in) {
            for (std::size_t i = 0; i < variants.size(); ++i)
                for (std::size_t k = 0; k < bins; ++k) out[i](0, k, l) = xnb[k * m];
            result.frames.push_back(diag);
            continue;
        }

        // Narrowband weights for every bin, shared by all variants of the same estimator.
        std::map<Estimator, std::vector<CVector>> narrow;
        for (Estimator e : estimators) {
            auto& ws = narrow[e];
            ws.resize(bins);
            for (std::size_t k = 0; k < bins; ++k) {
                const CMatrix sx = nb.sx(k);
                CMatrix sd;
                CVector sxs;
                if (need_sd) sd = nb.sd(k);
                if (need_sxs) sxs = nb.sxs(k);
                const BinStats s{&sx, &rv.mats[k], need_sd ? &sd : nullptr, need_sxs ? &sxs : nullptr};
                ws[k] = solve_bin(e, s, 1, cfg.loading, static_cast<long>(k)).w;
            }
        }

        // With a single shift the stack is the narrowband vector, so the running narrowband weights are used.
        const auto sel = diag.gate == Gate::cyclic && set.size() > 1 ? routing.cyclic_bins() : std::vector<std::size_t>{};
        diag.cyclic_bins = sel.size();
        std::map<Estimator, std::vector<std::optional<CVector>>> cyclic;
        std::vector<double> lambdas;
        for (Estimator e : estimators) {
            if (sel.empty() || std::none_of(variants.begin(), variants.end(),
                                            [&](Variant v) { return is_cyclic(v) && estimator_of(v) == e; }))
                continue;
            auto& ws = cyclic[e];
            ws.resize(sel.size());
            for (std::size_t i = 0; i < sel.size(); ++i) {
                const std::size_t k = sel[i];
                const CMatrix sx = cyc->sx(k);
                CMatrix sd;
                CVector sxs;
                if (need_sd) sd = cyc->sd(k);
                if (need_sxs) sxs = cyc->sxs(k);
                const BinStats s{&sx, &sv_cyc.mats[k], need_sd ? &sd : nullptr, need_sxs ? &sxs : nullptr};
                try {
                    const WeightSolution sol = solve_bin(e, s, set.size(), cfg.loading, static_cast<long>(k));
                    ws[i] = sol.w;
                    if (e == estimators.front()) lambdas.push_back(sol.lambda);
                } catch (const LinalgError&) {
                    // narrowband fallback for this bin and frame
                }
            }
        }
        if (!lambdas.empty()) {
            const auto [lo, hi] = std::minmax_element(lambdas.begin(), lambdas.end());
            diag.lambda_min = *lo;
            diag.lambda_max = *hi;
            double sum = 0.0;
            for (double v : lambdas) sum += v;
            diag.lambda_mean = sum / static_cast<double>(lambdas.size());
        }

        for (std::size_t i = 0; i < variants.size(); ++i) {
            const Variant v = variants[i];
            const Estimator e = estimator_of(v);
            for (std::size_t k = 0; k < bins; ++k) {
                if (e == Estimator::identity) {
                    out[i](0, k, l) = xnb[k * m];
                    continue;
                }
                out[i](0, k, l) = kernels::dotc(narrow[e][k].data(), xnb.data() + k * m, m);
            }
            if (is_cyclic(v) && cyclic.count(e)) {
                const std::size_t dim = m * set.size();
                const auto& ws = cyclic[e];
                for (std::size_t j = 0; j < sel.size(); ++j)
                    if (ws[j]) out[i](0, sel[j], l) = kernels::dotc(ws[j]->data(), xst.data() + sel[j] * dim, dim);
            }
            out[i](0, 0, l) = out[i](0, 0, l).real();
            out[i](0, bins - 1, l) = out[i](0, bins - 1, l).real();
        }
        result.frames.push_back(diag);
    }

    for (std::size_t i = 0; i < variants.size(); ++i) result.outputs.emplace_back(variants[i], istft(out[i], win));
    return result;
}

void write_diagnostics_csv(const std::filesystem::path& path, std::span<const FrameDiagnostics> frames, double fs) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << "frame,alpha_bar_hz,delta_alpha,voiced,gate,remodulated,cyclic_bins,lambda_min,lambda_mean,lambda_max\n"
        << std::setprecision(10);
    const double to_hz = fs / (2.0 * std::numbers::pi);
    for (const auto& f : frames)
        out << f.frame << ',' << f.alpha_bar * to_hz << ',' << f.delta_alpha << ',' << int(f.voiced) << ','
            << gate_name(f.gate) << ',' << int(f.remodulated) << ',' << f.cyclic_bins << ',' << f.lambda_min << ','
            << f.lambda_mean << ',' << f.lambda_max << '\n';
}

}  // namespace cmwf
