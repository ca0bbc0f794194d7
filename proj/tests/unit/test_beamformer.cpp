#include <catch_amalgamated.hpp>

#include <Eigen/Eigenvalues>

#include "cmwf/beamformer.hpp"
#include "cmwf/error.hpp"
#include "support.hpp"

using namespace cmwf;
using testing::cdouble;

namespace {

constexpr double kFs = 16000.0;
double rad(double hz) { return 2.0 * std::numbers::pi * hz / kFs; }

CVector e0(Eigen::Index n) {
    CVector v = CVector::Zero(n);
    v(0) = 1.0;
    return v;
}

// Blind target estimate through Eigen's generalized solver: with V^H B V = I,
// A = B V diag(lambda) V^H B.
CMatrix oracle_lowrank(const CMatrix& a, const CMatrix& b, Eigen::Index rank) {
    Eigen::GeneralizedSelfAdjointEigenSolver<CMatrix> es(a, b);
    const Eigen::Index n = a.rows();
    CMatrix sd = CMatrix::Zero(n, n);
    for (Eigen::Index i = n - rank; i < n; ++i) {
        const double g = std::max(es.eigenvalues()(i) - 1.0, 0.0);
        const CVector u = b * es.eigenvectors().col(i);
        sd += g * u * u.adjoint();
    }
    return sd;
}

}  // namespace

TEST_CASE("variant names and properties", "[beamformer]") {
    for (Variant v : all_variants()) {
        const auto parsed = parse_variant(variant_name(v));
        REQUIRE(parsed.has_value());
        CHECK(*parsed == v);
    }
    CHECK(all_variants().size() == 6);
    CHECK(parse_variant("identity") == Variant::identity);
    CHECK_FALSE(parse_variant("mvdr").has_value());
    CHECK(is_cyclic(Variant::cmwf_pp));
    CHECK_FALSE(is_cyclic(Variant::mwf_plus));
    CHECK(narrowband_counterpart(Variant::cmwf_plus) == Variant::mwf_plus);
    CHECK(narrowband_counterpart(Variant::mwf) == Variant::mwf);
    CHECK(needs_clean_target(Variant::mwf_pp));
    CHECK_FALSE(needs_clean_target(Variant::cmwf));
    CHECK(estimator_of(Variant::cmwf) == Estimator::blind);
    CHECK(parse_routing_scope("shifts") == RoutingScope::shifts);
    CHECK(routing_scope_name(RoutingScope::harmonics) == "harmonics");
    CHECK_FALSE(parse_routing_scope("all").has_value());
}

TEST_CASE("bin routing", "[beamformer]") {
    SECTION("unvoiced set routes everything narrowband") {
        const BinRouting r = route_bins(512, narrowband_set());
        CHECK(r.cyclic_count() == 0);
        CHECK(r.routes.size() == 257);
    }
    SECTION("bins within 46.875 Hz of {0, 125, 250} Hz") {
        const CyclicSet set = build_cyclic_set(rad(125.0), 3);
        const BinRouting r = route_bins(512, set, 1.5, RoutingScope::shifts);
        // 31.25 Hz bins: |31.25 k - 125 c| < 46.875 for c = 0, 1, 2
        const std::vector<std::size_t> expected{0, 1, 3, 4, 5, 7, 8, 9};
        CHECK(r.cyclic_bins() == expected);
        const std::vector<int> nearest{0, 0, -1, 1, 1, 1, -1, 2, 2, 2};
        for (std::size_t k = 0; k < nearest.size(); ++k) CHECK(r.nearest_shift[k] == nearest[k]);
        for (std::size_t k = 10; k < 257; ++k) CHECK(r.routes[k] == Route::narrowband);
    }
    SECTION("harmonic scope covers every multiple below Nyquist") {
        const CyclicSet set = build_cyclic_set(rad(125.0), 3);
        const BinRouting r = route_bins(512, set);
        for (std::size_t k = 0; k < 257; ++k) {
            const double f = 31.25 * static_cast<double>(k);
            const double h = std::round(f / 125.0);
            const bool near = std::abs(f - 125.0 * h) < 46.875;
            CHECK((r.routes[k] == Route::cyclic) == near);
            if (near) CHECK(r.nearest_shift[k] == static_cast<int>(h));
        }
    }
    SECTION("eps_bin = 0 gives no cyclic bins") {
        const CyclicSet set = build_cyclic_set(rad(125.0), 3);
        CHECK(route_bins(512, set, 0.0).cyclic_count() == 0);
        CHECK(route_bins(512, set, 0.0, RoutingScope::shifts).cyclic_count() == 0);
    }
    SECTION("ties go to the lower shift") {
        const double dw = 2.0 * std::numbers::pi / 512.0;
        CyclicSet set;
        set.alpha1 = 4.0 * dw;
        set.shifts = {0.0, 4.0 * dw};
        const BinRouting r = route_bins(512, set, 3.0, RoutingScope::shifts);
        CHECK(r.nearest_shift[2] == 0);
        CHECK(r.nearest_shift[3] == 1);
    }
}

TEST_CASE("MWF weights", "[beamformer]") {
    const CMatrix rd = e0(3) * e0(3).adjoint();
    CHECK((mwf_weights(CMatrix::Identity(3, 3), rd, 0.0) - e0(3)).norm() < 1e-15);
    CHECK(mwf_weights(CMatrix::Identity(3, 3), CMatrix::Zero(3, 3), 1e-9).norm() == 0.0);
    CHECK_THROWS_AS(mwf_weights(CMatrix::Identity(3, 3), CMatrix::Zero(2, 2), 0.0), Error);

    SECTION("rank-one noiseless data is reconstructed as delta shrinks") {
        auto g = testing::rng(5);
        const CVector a = testing::random_matrix(3, 1, g);
        const CMatrix s = testing::random_matrix(1, 200, g);
        const CMatrix x = a * s;
        const CMatrix truth = a(0) * s;
        double prev = std::numeric_limits<double>::infinity();
        for (double delta : {1e-1, 1e-3, 1e-6, 1e-9}) {
            const CMatrix rx = 2.0 * a * a.adjoint() + delta * CMatrix::Identity(3, 3);
            const CVector w = mwf_weights(rx, 2.0 * a * a.adjoint(), 0.0);
            const double err = (w.adjoint() * x - truth).norm() / truth.norm();
            CHECK(err < prev);
            prev = err;
        }
        CHECK(prev < 1e-8);
    }
}

TEST_CASE("blind cyclic weights", "[beamformer]") {
    auto g = testing::rng(6);
    const LoadingBounds bounds{};
    for (int t = 0; t < 20; ++t) {
        const Eigen::Index n = 2 + t % 5;
        const CMatrix sv = testing::random_hpd(n, g);
        const CMatrix a = testing::random_matrix(n, 2, g);
        const CMatrix sx = sv + a * a.adjoint();
        const Eigen::Index rank = 1 + t % 2;
        const WeightSolution ws = cmwf_weights_blind(sx, sv, static_cast<std::size_t>(rank), bounds);
        const CMatrix sd = oracle_lowrank(sx, sv, rank);
        const double lambda = std::clamp(sd.trace().real(), bounds.min, bounds.max);
        const CVector ref = (sx + lambda * CMatrix::Identity(n, n)).ldlt().solve(sd.col(0));
        CHECK(ws.lambda == Catch::Approx(lambda).epsilon(1e-9));
        CHECK((ws.w - ref).norm() < 1e-9 * ref.norm());
    }
    SECTION("no target gives vanishing weights") {
        const CMatrix sv = testing::random_hpd(4, g);
        CHECK(cmwf_weights_blind(sv, sv, 2, bounds).w.norm() < 1e-6);
    }
    SECTION("C = 1 reduces to the narrowband blind MWF") {
        const CMatrix sv = testing::random_hpd(2, g);
        const CMatrix a = testing::random_matrix(2, 1, g);
        const CMatrix sx = sv + a * a.adjoint();
        const WeightSolution ws = cmwf_weights_blind(sx, sv, 1, bounds);
        const CMatrix rd = lowrank_target(sx, sv, 1);
        const CVector w = mwf_weights(sx, rd, diag_loading_lambda(rd, bounds));
        CHECK((ws.w - w).norm() <= 1e-9 * w.norm());
    }
}

TEST_CASE("oracle+ weights", "[beamformer]") {
    auto g = testing::rng(7);
    const CMatrix sd = testing::random_hpd(4, g);
    const WeightSolution pass = cmwf_weights_oracle_plus(sd, CMatrix::Zero(4, 4), {0.0, 0.0});
    CHECK((pass.w - e0(4)).norm() < 1e-10);
    const WeightSolution none = cmwf_weights_oracle_plus(CMatrix::Zero(4, 4), testing::random_hpd(4, g), {});
    CHECK(none.w.norm() == 0.0);
    CHECK(none.lambda == 1e-9);
}

TEST_CASE("oracle++ weights", "[beamformer]") {
    auto g = testing::rng(8);
    std::normal_distribution<double> nd;
    const Eigen::Index n = 4;

    SECTION("normal equations and MSE optimality") {
        const std::size_t frames = 400;
        const CMatrix a = testing::random_matrix(n, 1, g);
        const CMatrix s = testing::random_matrix(1, static_cast<Eigen::Index>(frames), g);
        const CMatrix x = a * s + 0.5 * testing::random_matrix(n, static_cast<Eigen::Index>(frames), g);
        const CMatrix sx = x * x.adjoint() / static_cast<double>(frames);
        const CVector sxs = x * s.adjoint() / static_cast<double>(frames);
        const double lambda = 1e-4;
        const CVector w = cmwf_weights_oracle_pp(sx, sxs, lambda);
        CHECK(((sx + lambda * CMatrix::Identity(n, n)) * w - sxs).norm() < 1e-12 * sxs.norm());

        auto cost = [&](const CVector& v) {
            return (s - v.adjoint() * x).squaredNorm() / static_cast<double>(frames) + lambda * v.squaredNorm();
        };
        const double best = cost(w);
        std::size_t worse = 0;
        for (int t = 0; t < 1000; ++t) {
            CVector d(n);
            for (auto& v : d) v = {nd(g), nd(g)};
            d *= 1e-3 * std::pow(10.0, 3.0 * (t % 4) / 3.0);
            if (cost(w + d) >= best) ++worse;
        }
        CHECK(worse == 1000);
    }

    SECTION("uncorrelated target gives decaying weights") {
        auto norm_for = [&](Eigen::Index frames) {
            const CMatrix x = testing::random_matrix(n, frames, g);
            const CMatrix s = testing::random_matrix(1, frames, g);
            const CMatrix sx = x * x.adjoint() / static_cast<double>(frames);
            const CVector sxs = x * s.adjoint() / static_cast<double>(frames);
            return cmwf_weights_oracle_pp(sx, sxs, 1e-9).norm();
        };
        double small = 0.0, large = 0.0;
        for (int t = 0; t < 10; ++t) {
            small += norm_for(100);
            large += norm_for(10000);
        }
        CHECK(large < small / 5.0);
    }
}

TEST_CASE("applying weights", "[beamformer]") {
    const auto x = testing::white_noise(2, 3000, 9);
    const WindowSpec win{256, 64};
    const StftTensor plain = stft(x, win);
    const CyclicSet set = build_cyclic_set(rad(250.0), 3);

    BeamformerWeights bw;
    bw.routing = route_bins(256, set);
    const auto cyc = bw.routing.cyclic_bins();
    const ModulatedStftStack stack = build_stack(x, plain, set, win, cyc);
    for (std::size_t k = 0; k < plain.bins(); ++k)
        bw.per_bin.push_back(e0(bw.routing.routes[k] == Route::cyclic ? 6 : 2));

    const StftTensor out = apply_weights(bw, plain, &stack);
    REQUIRE(out.channels() == 1);
    for (std::size_t l = 0; l < plain.frames(); ++l)
        for (std::size_t k = 0; k < plain.bins(); ++k) CHECK(out(0, k, l) == plain(0, k, l));

    for (auto& w : bw.per_bin) w.setZero();
    const StftTensor zero = apply_weights(bw, plain, &stack);
    for (std::size_t l = 0; l < plain.frames(); ++l)
        for (std::size_t k = 0; k < plain.bins(); ++k) CHECK(zero(0, k, l) == cdouble{});

    SECTION("DC and Nyquist outputs are real") {
        for (auto& w : bw.per_bin) w.setConstant(cdouble{0.3, 0.7});
        const StftTensor y = apply_weights(bw, plain, &stack);
        for (std::size_t l = 0; l < y.frames(); ++l) {
            CHECK(y(0, 0, l).imag() == 0.0);
            CHECK(y(0, 128, l).imag() == 0.0);
        }
    }
    SECTION("shape errors") {
        CHECK_THROWS_AS(apply_weights(bw, plain, nullptr), Error);
        bw.per_bin.pop_back();
        CHECK_THROWS_AS(apply_weights(bw, plain, &stack), Error);
    }
}
