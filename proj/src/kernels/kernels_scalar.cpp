#include "cmwf/kernels.hpp"

namespace cmwf::kernels::detail {
namespace {

void herk_update_scalar(cdouble* s, const cdouble* x, std::size_t n, double a, double b) {
    for (std::size_t i = 0; i < n; ++i) {
        const double br = b * x[i].real();
        const double bi = b * x[i].imag();
        cdouble* row = s + i * n;
        for (std::size_t j = 0; j <= i; ++j) {
            const double xr = x[j].real();
            const double xi = -x[j].imag();
            const double pr = br * xr - bi * xi;
            const double pi = br * xi + bi * xr;
            row[j] = {a * row[j].real() + pr, a * row[j].imag() + pi};
        }
    }
}

cdouble dotc_scalar(const cdouble* w, const cdouble* x, std::size_t n) {
    double re = 0.0, im = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double wr = w[i].real(), wi = -w[i].imag();
        re += wr * x[i].real() - wi * x[i].imag();
        im += wr * x[i].imag() + wi * x[i].real();
    }
    return {re, im};
}

void axpy_scalar(cdouble* y, const cdouble* x, std::size_t n, double a, cdouble c) {
    const double cr = c.real(), ci = c.imag();
    for (std::size_t i = 0; i < n; ++i) {
        const double pr = cr * x[i].real() - ci * x[i].imag();
        const double pi = cr * x[i].imag() + ci * x[i].real();
        y[i] = {a * y[i].real() + pr, a * y[i].imag() + pi};
    }
}

void scale_complex_scalar(cdouble* out, const double* re, const cdouble* ph, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = {re[i] * ph[i].real(), re[i] * ph[i].imag()};
}

}  // namespace

const KernelTable& scalar_table() {
    static const KernelTable t{herk_update_scalar, dotc_scalar, axpy_scalar, scale_complex_scalar};
    return t;
}

}  // namespace cmwf::kernels::detail
