#include "fft.hpp"

#include <cstring>
#include <mutex>

#include "cmwf/error.hpp"

namespace cmwf::detail {
namespace {
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}
}  // namespace

Fft::Fft(std::size_t n, Kind kind) : n_(n), kind_(kind) {
    if (n == 0) throw Error("FFT size must be positive");
    const int ni = static_cast<int>(n);
    std::lock_guard lock(planner_mutex());
    switch (kind) {
        case Kind::forward_c2c:
        case Kind::inverse_c2c:
            cin_ = fftw_alloc_complex(n);
            cout_ = fftw_alloc_complex(n);
            plan_ = fftw_plan_dft_1d(ni, cin_, cout_, kind == Kind::forward_c2c ? FFTW_FORWARD : FFTW_BACKWARD,
                                     FFTW_ESTIMATE);
            break;
        case Kind::forward_r2c:
            real_ = fftw_alloc_real(n);
            cout_ = fftw_alloc_complex(n / 2 + 1);
            plan_ = fftw_plan_dft_r2c_1d(ni, real_, cout_, FFTW_ESTIMATE);
            break;
        case Kind::inverse_c2r:
            real_ = fftw_alloc_real(n);
            cin_ = fftw_alloc_complex(n / 2 + 1);
            plan_ = fftw_plan_dft_c2r_1d(ni, cin_, real_, FFTW_ESTIMATE);
            break;
    }
    if (!plan_) throw Error("FFTW planning failed");
}

Fft::~Fft() {
    std::lock_guard lock(planner_mutex());
    if (plan_) fftw_destroy_plan(plan_);
    if (real_) fftw_free(real_);
    if (cin_) fftw_free(cin_);
    if (cout_) fftw_free(cout_);
}

void Fft::forward(std::span<const std::complex<double>> in, std::span<std::complex<double>> out) {
    std::memcpy(cin_, in.data(), n_ * sizeof(fftw_complex));
    fftw_execute(plan_);
    std::memcpy(static_cast<void*>(out.data()), cout_, n_ * sizeof(fftw_complex));
}

void Fft::inverse(std::span<const std::complex<double>> in, std::span<std::complex<double>> out) {
    forward(in, out);
}

void Fft::forward_real(std::span<const double> in, std::span<std::complex<double>> out) {
    std::memcpy(real_, in.data(), n_ * sizeof(double));
    fftw_execute(plan_);
    std::memcpy(static_cast<void*>(out.data()), cout_, (n_ / 2 + 1) * sizeof(fftw_complex));
}

void Fft::inverse_real(std::span<const std::complex<double>> in, std::span<double> out) {
    std::memcpy(cin_, in.data(), (n_ / 2 + 1) * sizeof(fftw_complex));
    fftw_execute(plan_);
    std::memcpy(out.data(), real_, n_ * sizeof(double));
}

}  // namespace cmwf::detail
