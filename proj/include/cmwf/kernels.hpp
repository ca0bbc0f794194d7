#pragma once
// Data-parallel inner loops shared by covariance assembly, recursive updates
// and weight application. Each kernel has a scalar reference implementation
// and an AVX2 variant; the active variant is picked once at runtime.

#include <complex>
#include <cstddef>
#include <string_view>

namespace cmwf::kernels {

using cdouble = std::complex<double>;

enum class Isa { scalar, avx2 };

struct KernelTable {
    // Lower triangle (incl. diagonal) of the row-major n x n matrix s:
    //   s = a * s + b * x x^H
    void (*herk_update)(cdouble* s, const cdouble* x, std::size_t n, double a, double b);
    // sum_i conj(w_i) * x_i
    cdouble (*dotc)(const cdouble* w, const cdouble* x, std::size_t n);
    // y = a * y + c * x
    void (*axpy)(cdouble* y, const cdouble* x, std::size_t n, double a, cdouble c);
    // out_i = re_i * ph_i
    void (*scale_complex)(cdouble* out, const double* re, const cdouble* ph, std::size_t n);
};

const KernelTable& table(Isa isa);
bool isa_supported(Isa isa);

// Active ISA: AVX2 when the CPU has AVX2+FMA, unless CMWF_ISA=scalar is set.
Isa active_isa();
void set_active_isa(Isa isa);
std::string_view isa_name(Isa isa);

inline void herk_update(cdouble* s, const cdouble* x, std::size_t n, double a, double b) {
    table(active_isa()).herk_update(s, x, n, a, b);
}
inline cdouble dotc(const cdouble* w, const cdouble* x, std::size_t n) {
    return table(active_isa()).dotc(w, x, n);
}
inline void axpy(cdouble* y, const cdouble* x, std::size_t n, double a, cdouble c) {
    table(active_isa()).axpy(y, x, n, a, c);
}
inline void scale_complex(cdouble* out, const double* re, const cdouble* ph, std::size_t n) {
    table(active_isa()).scale_complex(out, re, ph, n);
}

// Copies the lower triangle into the upper one (conjugated) and zeroes the
// imaginary part of the diagonal, making s exactly Hermitian.
void mirror_lower(cdouble* s, std::size_t n);

namespace detail {
const KernelTable& scalar_table();
const KernelTable* avx2_table();  // nullptr when not compiled in
}  // namespace detail

}  // namespace cmwf::kernels
