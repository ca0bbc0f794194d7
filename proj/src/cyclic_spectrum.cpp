#include "cmwf/cyclic_spectrum.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <string>

#include "cmwf/error.hpp"
#include "cmwf/kernels.hpp"

namespace cmwf {

CyclicSet narrowband_set() { return CyclicSet{}; }

CyclicSet build_cyclic_set(double alpha1, std::size_t requested, double nyquist, std::size_t harmonic_cap) {
    if (!(alpha1 > 0.0) || !std::isfinite(alpha1))
        throw Error("cyclic set needs a positive fundamental, got " + std::to_string(alpha1));
    CyclicSet set;
    set.alpha1 = alpha1;
    set.shifts.assign(1, 0.0);
    const std::size_t cap = std::min(std::max<std::size_t>(requested, 1), std::max<std::size_t>(harmonic_cap, 1));
    for (std::size_t c = 1; c < cap; ++c) {
        const double a = static_cast<double>(c) * alpha1;
        if (!(a < nyquist)) break;
        set.shifts.push_back(a);
    }
    return set;
}

namespace {
std::pair<std::size_t, std::size_t> resolve(FrameRange r, std::size_t total) {
    if (r.first >= total) throw Error("frame range starts past the last frame");
    const std::size_t count = std::min(r.count, total - r.first);
    if (count == 0) throw Error("empty frame range");
    return {r.first, count};
}
}  // namespace

std::vector<cdouble> acp_estimate(const StftTensor& y, std::size_t y_channel, const StftTensor& x_shifted,
                                  std::size_t x_channel, FrameRange frames) {
    if (y.frames() != x_shifted.frames())
        throw Error("ACP: frame counts differ (" + std::to_string(y.frames()) + " vs " +
                    std::to_string(x_shifted.frames()) + ")");
    if (y.fft_size() != x_shifted.fft_size()) throw Error("ACP: FFT sizes differ");
    const auto [first, count] = resolve(frames, y.frames());
    std::vector<cdouble> out(y.bins());
    for (std::size_t l = first; l < first + count; ++l) {
        const auto yf = y.frame(y_channel, l);
        const auto xf = x_shifted.frame(x_channel, l);
        for (std::size_t k = 0; k < out.size(); ++k) out[k] += yf[k] * std::conj(xf[k]);
    }
    const double inv = 1.0 / static_cast<double>(count);
    for (auto& v : out) v *= inv;
    return out;
}

ScdEstimate cyclic_spectrum(const AudioBuffer& audio, std::size_t channel, std::span<const double> alphas,
                            const WindowSpec& win) {
    const AudioBuffer mono = audio.select_channel(channel);
    const StftTensor base = stft(mono, win);
    ScdEstimate scd;
    scd.alphas.assign(alphas.begin(), alphas.end());
    scd.bins = base.bins();
    scd.frames = base.frames();
    scd.values.reserve(alphas.size() * scd.bins);
    for (double a : alphas) {
        const StftTensor shifted = stft(modulate(mono, a), win);
        const auto row = acp_estimate(base, 0, shifted, 0);
        scd.values.insert(scd.values.end(), row.begin(), row.end());
    }
    return scd;
}

void write_scd_csv(const std::filesystem::path& path, const ScdEstimate& scd, double fs, std::size_t fft_size) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << "alpha_hz,bin,freq_hz,re,im\n" << std::setprecision(17);
    for (std::size_t p = 0; p < scd.alphas.size(); ++p) {
        const double ahz = scd.alphas[p] * fs / (2.0 * std::numbers::pi);
        for (std::size_t k = 0; k < scd.bins; ++k) {
            const cdouble v = scd(p, k);
            out << ahz << ',' << k << ',' << static_cast<double>(k) * fs / static_cast<double>(fft_size) << ','
                << v.real() << ',' << v.imag() << '\n';
        }
    }
}

ModulatedStftStack::ModulatedStftStack(std::size_t channels, std::size_t shifts, std::size_t frames,
                                       std::vector<std::size_t> bins)
    : channels_(channels), shifts_(shifts), frames_(frames), bins_(std::move(bins)) {
    std::size_t max_bin = 0;
    for (auto b : bins_) max_bin = std::max(max_bin, b);
    lookup_.assign(bins_.empty() ? 0 : max_bin + 1, npos);
    for (std::size_t i = 0; i < bins_.size(); ++i) lookup_[bins_[i]] = i;
    data_.assign(bins_.size() * frames_ * dim(), cdouble{});
}

std::size_t ModulatedStftStack::bin_index(std::size_t bin) const { return bin < lookup_.size() ? lookup_[bin] : npos; }

ModulatedStftStack build_stack(const AudioBuffer& audio, const CyclicSet& set, const WindowSpec& win,
                               std::span<const std::size_t> bins) {
    return build_stack(audio, stft(audio, win), set, win, bins);
}

ModulatedStftStack build_stack(const AudioBuffer& audio, const StftTensor& base, const CyclicSet& set,
                               const WindowSpec& win, std::span<const std::size_t> bins) {
    if (base.full_spectrum() || base.fft_size() != win.length || base.channels() != audio.channels())
        throw Error("build_stack: base STFT does not match the audio/window");
    std::vector<std::size_t> sel(bins.begin(), bins.end());
    if (sel.empty())
        for (std::size_t k = 0; k < base.bins(); ++k) sel.push_back(k);
    for (auto k : sel)
        if (k >= base.bins()) throw Error("build_stack: bin " + std::to_string(k) + " out of range");

    const std::size_t m_count = audio.channels();
    ModulatedStftStack stack(m_count, set.size(), base.frames(), sel);
    for (std::size_t c = 0; c < set.size(); ++c) {
        StftTensor shifted;
        const StftTensor* src = &base;
        if (c > 0) {
            shifted = stft(modulate(audio, set.shifts[c]), win);
            src = &shifted;
        }
        for (std::size_t m = 0; m < m_count; ++m)
            for (std::size_t l = 0; l < base.frames(); ++l) {
                const auto f = src->frame(m, l);
                for (std::size_t bi = 0; bi < sel.size(); ++bi) stack.vec(bi, l)[c * m_count + m] = f[sel[bi]];
            }
    }
    return stack;
}

SpectralSpatialCov assemble_cov(const ModulatedStftStack& stack, FrameRange frames, CovRole role) {
    const auto [first, count] = resolve(frames, stack.frames());
    const std::size_t n = stack.dim();
    SpectralSpatialCov cov;
    cov.role = role;
    cov.dim = n;
    cov.bins = stack.bins();
    cov.mats.reserve(stack.bins().size());
    const double inv = 1.0 / static_cast<double>(count);
    std::vector<cdouble> acc(n * n);
    for (std::size_t bi = 0; bi < stack.bins().size(); ++bi) {
        std::fill(acc.begin(), acc.end(), cdouble{});
        for (std::size_t l = first; l < first + count; ++l) kernels::herk_update(acc.data(), stack.vec(bi, l).data(), n, 1.0, inv);
        kernels::mirror_lower(acc.data(), n);
        cov.mats.emplace_back(Eigen::Map<const Eigen::Matrix<cdouble, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
            acc.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)));
    }
    return cov;
}

std::vector<CVector> assemble_cross(const ModulatedStftStack& stack, const StftTensor& ref, std::size_t ref_channel,
                                    FrameRange frames) {
    if (ref.frames() != stack.frames()) throw Error("assemble_cross: frame counts differ");
    const auto [first, count] = resolve(frames, stack.frames());
    const std::size_t n = stack.dim();
    const double inv = 1.0 / static_cast<double>(count);
    std::vector<CVector> out;
    out.reserve(stack.bins().size());
    for (std::size_t bi = 0; bi < stack.bins().size(); ++bi) {
        CVector acc = CVector::Zero(static_cast<Eigen::Index>(n));
        const std::size_t bin = stack.bins()[bi];
        for (std::size_t l = first; l < first + count; ++l)
            kernels::axpy(acc.data(), stack.vec(bi, l).data(), n, 1.0, inv * std::conj(ref(ref_channel, bin, l)));
        out.push_back(std::move(acc));
    }
    return out;
}

CMatrix blkdiag(const CMatrix& s, std::size_t block_size) {
    const auto n = static_cast<std::size_t>(s.rows());
    if (block_size == 0 || s.rows() != s.cols() || n % block_size != 0)
        throw Error("blkdiag: dimension " + std::to_string(n) + " is not a multiple of " + std::to_string(block_size));
    CMatrix out = CMatrix::Zero(s.rows(), s.cols());
    const auto b = static_cast<Eigen::Index>(block_size);
    for (Eigen::Index i = 0; i < s.rows(); i += b) out.block(i, i, b, b) = s.block(i, i, b, b);
    return out;
}

SpectralSpatialCov blkdiag_project(const SpectralSpatialCov& cov, std::size_t block_size) {
    SpectralSpatialCov out = cov;
    for (auto& m : out.mats) m = blkdiag(m, block_size);
    return out;
}

}  // namespace cmwf
