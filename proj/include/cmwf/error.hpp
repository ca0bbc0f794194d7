#pragma once

#include <stdexcept>
#include <string>

namespace cmwf {

// All recoverable failures in the library surface as cmwf::Error.
class Error : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

// Raised by factorizations; carries the frequency bin when known (-1 otherwise).
class LinalgError : public Error {
   public:
    LinalgError(const std::string& what, long bin = -1)
        : Error(bin >= 0 ? what + " (bin " + std::to_string(bin) + ")" : what), bin_(bin) {}
    long bin() const noexcept { return bin_; }

   private:
    long bin_;
};

}  // namespace cmwf
