#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cmwf/cyclic_spectrum.hpp"
#include "cmwf/linalg.hpp"
#include "cmwf/stft.hpp"

namespace cmwf {

// Narrowband (MWF) and cyclic (cMWF) designs, each blind or with oracle statistics.
// `identity` passes the reference microphone through (w = e_0).
enum class Variant : std::uint8_t { identity, mwf, mwf_plus, mwf_pp, cmwf, cmwf_plus, cmwf_pp };

enum class Estimator : std::uint8_t { identity, blind, oracle_plus, oracle_pp };

std::string_view variant_name(Variant v);
std::optional<Variant> parse_variant(std::string_view name);
std::vector<Variant> all_variants();  // every variant except identity
bool is_cyclic(Variant v);
Estimator estimator_of(Variant v);
bool needs_clean_target(Variant v);
// MWF counterpart of a cyclic variant (identity for non-cyclic ones).
Variant narrowband_counterpart(Variant v);

enum class Route : std::uint8_t { narrowband, cyclic };

// Which centres make a bin cyclic: every multiple h * alpha1 below Nyquist (harmonics),
// or only the shifts alpha_c of the cyclic set.
enum class RoutingScope : std::uint8_t { harmonics, shifts };
std::string_view routing_scope_name(RoutingScope s);
std::optional<RoutingScope> parse_routing_scope(std::string_view name);

// Bin k (0..K/2) is cyclic iff |w_k - c alpha1| < eps_bin * dw for some centre c,
// with dw = 2 pi / K. nearest_shift holds the closest c (ties: lower c), -1 for narrowband bins.
struct BinRouting {
    std::vector<Route> routes;
    std::vector<int> nearest_shift;
    double eps_bin = 1.5;
    RoutingScope scope = RoutingScope::harmonics;

    std::vector<std::size_t> cyclic_bins() const;
    std::size_t cyclic_count() const;
};

// An unvoiced set (alpha1 == 0) routes every bin narrowband.
BinRouting route_bins(std::size_t fft_size, const CyclicSet& set, double eps_bin = 1.5,
                      RoutingScope scope = RoutingScope::harmonics);

struct WeightSolution {
    CVector w;
    double lambda = 0.0;
};

// w = (R_x + lambda I)^-1 R_d e_0
CVector mwf_weights(const CMatrix& rx, const CMatrix& rd, double lambda, long bin = -1);

// Blind design: R_d from the rank-limited GEVD of (S_x, S_v), loading from its trace.
// rank = C for the cyclic stack, 1 for the narrowband case.
WeightSolution cmwf_weights_blind(const CMatrix& sx, const CMatrix& sv, std::size_t rank, LoadingBounds bounds,
                                  long bin = -1);

// w = (S_d + S_v + lambda I)^-1 S_d e_0 with lambda from the trace of S_d.
WeightSolution cmwf_weights_oracle_plus(const CMatrix& sd, const CMatrix& sv, LoadingBounds bounds, long bin = -1);

// w = (S_x + lambda I)^-1 s_xs
CVector cmwf_weights_oracle_pp(const CMatrix& sx, const CVector& sxs, double lambda, long bin = -1);

// Weights for bins 0..K/2; cyclic bins carry MC entries, narrowband bins M.
struct BeamformerWeights {
    Variant variant = Variant::mwf;
    BinRouting routing;
    std::vector<CVector> per_bin;
    std::vector<double> lambdas;
};

// output(k, l) = w_k^H x(k, l), using the stacked vector on cyclic bins and the plain
// multichannel STFT elsewhere. DC and Nyquist bins are forced real.
StftTensor apply_weights(const BeamformerWeights& weights, const StftTensor& plain, const ModulatedStftStack* stack);

}  // namespace cmwf
