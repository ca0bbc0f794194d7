#pragma once
// Thin RAII wrapper over FFTW plans. Plan creation and destruction go
// through a global mutex (FFTW's planner is not reentrant); execution is
// thread-safe because each Fft owns its buffers.

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <span>

namespace cmwf::detail {

class Fft {
   public:
    enum class Kind { forward_c2c, inverse_c2c, forward_r2c, inverse_c2r };

    Fft(std::size_t n, Kind kind);
    ~Fft();
    Fft(const Fft&) = delete;
    Fft& operator=(const Fft&) = delete;

    std::size_t size() const noexcept { return n_; }

    // Unnormalized transforms (FFTW conventions).
    void forward(std::span<const std::complex<double>> in, std::span<std::complex<double>> out);
    void inverse(std::span<const std::complex<double>> in, std::span<std::complex<double>> out);
    void forward_real(std::span<const double> in, std::span<std::complex<double>> out);   // out: n/2+1
    void inverse_real(std::span<const std::complex<double>> in, std::span<double> out);   // in: n/2+1

   private:
    std::size_t n_;
    Kind kind_;
    fftw_plan plan_ = nullptr;
    double* real_ = nullptr;
    fftw_complex* cin_ = nullptr;
    fftw_complex* cout_ = nullptr;
};

}  // namespace cmwf::detail
