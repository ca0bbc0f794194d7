// Compiled with -mavx2 -mfma. Only reached after a runtime CPU check.
#include "cmwf/kernels.hpp"

#if defined(__AVX2__) && defined(__FMA__)
#include <immintrin.h>

namespace cmwf::kernels::detail {
namespace {

// Two complex doubles per register: [re0, im0, re1, im1].
inline __m256d load2(const cdouble* p) { return _mm256_loadu_pd(reinterpret_cast<const double*>(p)); }
inline void store2(cdouble* p, __m256d v) { _mm256_storeu_pd(reinterpret_cast<double*>(p), v); }

// (ar + j ai) * v for each complex lane of v
inline __m256d cmul_scalar(__m256d ar, __m256d ai, __m256d v) {
    const __m256d swapped = _mm256_permute_pd(v, 0b0101);
    return _mm256_addsub_pd(_mm256_mul_pd(ar, v), _mm256_mul_pd(ai, swapped));
}

const __m256d kConjMask = _mm256_set_pd(-0.0, 0.0, -0.0, 0.0);

void herk_update_avx2(cdouble* s, const cdouble* x, std::size_t n, double a, double b) {
    const __m256d va = _mm256_set1_pd(a);
    for (std::size_t i = 0; i < n; ++i) {
        const double br = b * x[i].real();
        const double bi = b * x[i].imag();
        const __m256d vr = _mm256_set1_pd(br);
        const __m256d vi = _mm256_set1_pd(bi);
        cdouble* row = s + i * n;
        const std::size_t len = i + 1;
        std::size_t j = 0;
        for (; j + 2 <= len; j += 2) {
            const __m256d xc = _mm256_xor_pd(load2(x + j), kConjMask);
            const __m256d prod = cmul_scalar(vr, vi, xc);
            store2(row + j, _mm256_fmadd_pd(va, load2(row + j), prod));
        }
        for (; j < len; ++j) {
            const double xr = x[j].real();
            const double xi = -x[j].imag();
            const double pr = br * xr - bi * xi;
            const double pi = br * xi + bi * xr;
            row[j] = {a * row[j].real() + pr, a * row[j].imag() + pi};
        }
    }
}

cdouble dotc_avx2(const cdouble* w, const cdouble* x, std::size_t n) {
    // conj(w) * x = (wr*xr + wi*xi) + j(wr*xi - wi*xr)
    __m256d acc_re = _mm256_setzero_pd();  // [wr*xr, wi*xi, ...]
    __m256d acc_im = _mm256_setzero_pd();  // [wr*xi, wi*xr, ...]
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        const __m256d wv = load2(w + i);
        const __m256d xv = load2(x + i);
        acc_re = _mm256_fmadd_pd(wv, xv, acc_re);
        acc_im = _mm256_fmadd_pd(wv, _mm256_permute_pd(xv, 0b0101), acc_im);
    }
    alignas(32) double r[4];
    alignas(32) double m[4];
    _mm256_store_pd(r, acc_re);
    _mm256_store_pd(m, acc_im);
    double re = (r[0] + r[1]) + (r[2] + r[3]);
    double im = (m[0] - m[1]) + (m[2] - m[3]);
    for (; i < n; ++i) {
        const double wr = w[i].real(), wi = -w[i].imag();
        re += wr * x[i].real() - wi * x[i].imag();
        im += wr * x[i].imag() + wi * x[i].real();
    }
    return {re, im};
}

void axpy_avx2(cdouble* y, const cdouble* x, std::size_t n, double a, cdouble c) {
    const __m256d va = _mm256_set1_pd(a);
    const __m256d cr = _mm256_set1_pd(c.real());
    const __m256d ci = _mm256_set1_pd(c.imag());
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        const __m256d prod = cmul_scalar(cr, ci, load2(x + i));
        store2(y + i, _mm256_fmadd_pd(va, load2(y + i), prod));
    }
    for (; i < n; ++i) {
        const double pr = c.real() * x[i].real() - c.imag() * x[i].imag();
        const double pi = c.real() * x[i].imag() + c.imag() * x[i].real();
        y[i] = {a * y[i].real() + pr, a * y[i].imag() + pi};
    }
}

void scale_complex_avx2(cdouble* out, const double* re, const cdouble* ph, std::size_t n) {
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        // [re0, re0, re1, re1]
        const __m128d r = _mm_loadu_pd(re + i);
        const __m256d rr = _mm256_permute4x64_pd(_mm256_castpd128_pd256(r), 0b01010000);
        store2(out + i, _mm256_mul_pd(rr, load2(ph + i)));
    }
    for (; i < n; ++i) out[i] = {re[i] * ph[i].real(), re[i] * ph[i].imag()};
}

}  // namespace

const KernelTable* avx2_table() {
    static const KernelTable t{herk_update_avx2, dotc_avx2, axpy_avx2, scale_complex_avx2};
    return &t;
}

}  // namespace cmwf::kernels::detail

#else

namespace cmwf::kernels::detail {
const KernelTable* avx2_table() { return nullptr; }
}  // namespace cmwf::kernels::detail

#endif
