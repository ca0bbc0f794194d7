#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <numeric>

#include "cmwf/error.hpp"
#include "cmwf/harness.hpp"

namespace cmwf {

double si_sdr(std::span<const double> estimate, std::span<const double> reference) {
    if (estimate.size() != reference.size())
        throw Error("si_sdr: estimate has " + std::to_string(estimate.size()) + " samples, reference " +
                    std::to_string(reference.size()));
    const double ref_energy = std::inner_product(reference.begin(), reference.end(), reference.begin(), 0.0);
    if (!(ref_energy > 0.0)) throw Error("si_sdr: reference has zero energy");
    const double a = std::inner_product(estimate.begin(), estimate.end(), reference.begin(), 0.0) / ref_energy;
    double target = 0.0, residual = 0.0;
    for (std::size_t i = 0; i < reference.size(); ++i) {
        const double t = a * reference[i];
        const double e = estimate[i] - t;
        target += t * t;
        residual += e * e;
    }
    if (residual == 0.0) return target > 0.0 ? kSiSdrCapDb : -kSiSdrCapDb;
    if (target == 0.0) return -kSiSdrCapDb;
    return std::clamp(10.0 * std::log10(target / residual), -kSiSdrCapDb, kSiSdrCapDb);
}

double si_sdr(const AudioBuffer& estimate, const AudioBuffer& reference) {
    if (estimate.channels() != 1 || reference.channels() != 1) throw Error("si_sdr expects single-channel signals");
    return si_sdr(estimate.channel(0), reference.channel(0));
}

ScoreWindow valid_interval(std::size_t length, const WindowSpec& win) {
    if (length <= 2 * win.length) throw Error("signal too short to score");
    return {win.length, length - 2 * win.length};
}

Score score(const AudioBuffer& output, const AudioBuffer& noisy, const AudioBuffer& target, std::size_t ref,
            ScoreWindow w) {
    const auto cut = [&](const AudioBuffer& a, std::size_t ch) {
        if (w.begin + w.count > a.length()) throw Error("score window exceeds the signal");
        return a.channel(ch).subspan(w.begin, w.count);
    };
    Score s;
    s.in = si_sdr(cut(noisy, ref), cut(target, ref));
    s.out = si_sdr(cut(output, 0), cut(target, ref));
    s.improvement = s.out - s.in;
    return s;
}

double median_f0(std::span<const double> raw) {
    std::vector<double> v;
    for (double x : raw)
        if (x > 0.0) v.push_back(x);
    if (v.empty()) return 0.0;
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    if (v.size() % 2) return *mid;
    const double hi = *mid;
    const double lo = *std::max_element(v.begin(), mid);
    return 0.5 * (lo + hi);
}

double ci95_half_width(double stddev, std::size_t n) {
    if (n < 2) return 0.0;
    const boost::math::students_t dist(static_cast<double>(n - 1));
    return boost::math::quantile(boost::math::complement(dist, 0.025)) * stddev / std::sqrt(static_cast<double>(n));
}

}  // namespace cmwf
