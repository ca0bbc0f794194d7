#include "cmwf/beamformer.hpp"

#include <array>
#include <cmath>

#include "cmwf/error.hpp"
#include "cmwf/kernels.hpp"

namespace cmwf {
namespace {
struct VariantInfo {
    Variant v;
    std::string_view name;
};
constexpr std::array<VariantInfo, 7> kVariants{{{Variant::identity, "identity"},
                                                {Variant::mwf, "mwf"},
                                                {Variant::mwf_plus, "mwf+"},
                                                {Variant::mwf_pp, "mwf++"},
                                                {Variant::cmwf, "cmwf"},
                                                {Variant::cmwf_plus, "cmwf+"},
                                                {Variant::cmwf_pp, "cmwf++"}}};
}  // namespace

std::string_view variant_name(Variant v) {
    for (const auto& i : kVariants)
        if (i.v == v) return i.name;
    return "?";
}

std::optional<Variant> parse_variant(std::string_view name) {
    for (const auto& i : kVariants)
        if (i.name == name) return i.v;
    return std::nullopt;
}

std::string_view routing_scope_name(RoutingScope s) { return s == RoutingScope::shifts ? "shifts" : "harmonics"; }

std::optional<RoutingScope> parse_routing_scope(std::string_view name) {
    if (name == "harmonics") return RoutingScope::harmonics;
    if (name == "shifts") return RoutingScope::shifts;
    return std::nullopt;
}

std::vector<Variant> all_variants() {
    return {Variant::mwf, Variant::mwf_plus, Variant::mwf_pp, Variant::cmwf, Variant::cmwf_plus, Variant::cmwf_pp};
}

bool is_cyclic(Variant v) { return v == Variant::cmwf || v == Variant::cmwf_plus || v == Variant::cmwf_pp; }

Estimator estimator_of(Variant v) {
    switch (v) {
        case Variant::identity: return Estimator::identity;
        case Variant::mwf:
        case Variant::cmwf: return Estimator::blind;
        case Variant::mwf_plus:
        case Variant::cmwf_plus: return Estimator::oracle_plus;
        case Variant::mwf_pp:
        case Variant::cmwf_pp: return Estimator::oracle_pp;
    }
    return Estimator::identity;
}

bool needs_clean_target(Variant v) {
    const Estimator e = estimator_of(v);
    return e == Estimator::oracle_plus || e == Estimator::oracle_pp;
}

Variant narrowband_counterpart(Variant v) {
    switch (v) {
        case Variant::cmwf: return Variant::mwf;
        case Variant::cmwf_plus: return Variant::mwf_plus;
        case Variant::cmwf_pp: return Variant::mwf_pp;
        default: return v;
    }
}

std::vector<std::size_t> BinRouting::cyclic_bins() const {
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < routes.size(); ++k)
        if (routes[k] == Route::cyclic) out.push_back(k);
    return out;
}

std::size_t BinRouting::cyclic_count() const { return cyclic_bins().size(); }

BinRouting route_bins(std::size_t fft_size, const CyclicSet& set, double eps_bin, RoutingScope scope) {
    BinRouting r;
    r.eps_bin = eps_bin;
    r.scope = scope;
    const std::size_t bins = fft_size / 2 + 1;
    r.routes.assign(bins, Route::narrowband);
    r.nearest_shift.assign(bins, -1);
    if (!(set.alpha1 > 0.0)) return r;
    const double dw = 2.0 * std::numbers::pi / static_cast<double>(fft_size);
    const double radius = eps_bin * dw;
    const std::size_t centres = scope == RoutingScope::shifts
                                    ? set.size()
                                    : static_cast<std::size_t>(std::floor((std::numbers::pi + radius) / set.alpha1)) + 1;
    for (std::size_t k = 0; k < bins; ++k) {
        const double wk = dw * static_cast<double>(k);
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < centres; ++c) {
            const double dist = std::abs(wk - set.alpha1 * static_cast<double>(c));
            if (dist < radius && dist < best) {
                best = dist;
                r.nearest_shift[k] = static_cast<int>(c);
                r.routes[k] = Route::cyclic;
            }
        }
    }
    return r;
}

CVector mwf_weights(const CMatrix& rx, const CMatrix& rd, double lambda, long bin) {
    if (rx.rows() != rd.rows() || rx.cols() != rd.cols()) throw Error("mwf_weights: dimension mismatch");
    return loaded_solve(rx, lambda, CVector(rd.col(0)), bin);
}

WeightSolution cmwf_weights_blind(const CMatrix& sx, const CMatrix& sv, std::size_t rank, LoadingBounds bounds,
                                  long bin) {
    const CMatrix sd = lowrank_target(sx, sv, rank);
    const double lambda = diag_loading_lambda(sd, bounds);
    return {loaded_solve(sx, lambda, CVector(sd.col(0)), bin), lambda};
}

WeightSolution cmwf_weights_oracle_plus(const CMatrix& sd, const CMatrix& sv, LoadingBounds bounds, long bin) {
    if (sd.rows() != sv.rows() || sd.cols() != sv.cols()) throw Error("oracle+ weights: dimension mismatch");
    const double lambda = diag_loading_lambda(sd, bounds);
    const CMatrix total = sd + sv;
    return {loaded_solve(total, lambda, CVector(sd.col(0)), bin), lambda};
}

CVector cmwf_weights_oracle_pp(const CMatrix& sx, const CVector& sxs, double lambda, long bin) {
    return loaded_solve(sx, lambda, sxs, bin);
}

StftTensor apply_weights(const BeamformerWeights& weights, const StftTensor& plain, const ModulatedStftStack* stack) {
    if (plain.full_spectrum()) throw Error("apply_weights: expects a half-spectrum STFT");
    const std::size_t bins = plain.bins(), m = plain.channels(), frames = plain.frames();
    if (weights.per_bin.size() != bins || weights.routing.routes.size() != bins)
        throw Error("apply_weights: weights cover " + std::to_string(weights.per_bin.size()) + " bins, STFT has " +
                    std::to_string(bins));
    StftTensor out(1, frames, plain.window_spec(), plain.signal_length(), plain.fs(), false);
    std::vector<cdouble> x(m);
    for (std::size_t k = 0; k < bins; ++k) {
        const CVector& w = weights.per_bin[k];
        if (weights.routing.routes[k] == Route::cyclic) {
            const std::size_t bi = stack ? stack->bin_index(k) : ModulatedStftStack::npos;
            if (bi == ModulatedStftStack::npos) throw Error("apply_weights: cyclic bin " + std::to_string(k) + " missing from stack");
            if (static_cast<std::size_t>(w.size()) != stack->dim())
                throw Error("apply_weights: weight length does not match stack dimension at bin " + std::to_string(k));
            for (std::size_t l = 0; l < frames; ++l) out(0, k, l) = kernels::dotc(w.data(), stack->vec(bi, l).data(), stack->dim());
        } else {
            if (static_cast<std::size_t>(w.size()) != m)
                throw Error("apply_weights: weight length does not match channel count at bin " + std::to_string(k));
            for (std::size_t l = 0; l < frames; ++l) {
                for (std::size_t c = 0; c < m; ++c) x[c] = plain(c, k, l);
                out(0, k, l) = kernels::dotc(w.data(), x.data(), m);
            }
        }
    }
    for (std::size_t l = 0; l < frames; ++l) {
        out(0, 0, l) = out(0, 0, l).real();
        if (plain.fft_size() % 2 == 0) out(0, bins - 1, l) = out(0, bins - 1, l).real();
    }
    return out;
}

}  // namespace cmwf
