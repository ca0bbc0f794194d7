#include <atomic>
#include <cstdlib>
#include <cstring>

#include "cmwf/kernels.hpp"

namespace cmwf::kernels {
namespace {

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

Isa detect() {
    if (const char* env = std::getenv("CMWF_ISA"); env && std::strcmp(env, "scalar") == 0) return Isa::scalar;
    return isa_supported(Isa::avx2) ? Isa::avx2 : Isa::scalar;
}

std::atomic<Isa>& active() {
    static std::atomic<Isa> isa{detect()};
    return isa;
}

}  // namespace

bool isa_supported(Isa isa) {
    if (isa == Isa::scalar) return true;
    static const bool ok = detail::avx2_table() != nullptr && cpu_has_avx2();
    return ok;
}

const KernelTable& table(Isa isa) {
    if (isa == Isa::avx2 && isa_supported(Isa::avx2)) return *detail::avx2_table();
    return detail::scalar_table();
}

Isa active_isa() { return active().load(std::memory_order_relaxed); }

void set_active_isa(Isa isa) {
    active().store(isa_supported(isa) ? isa : Isa::scalar, std::memory_order_relaxed);
}

std::string_view isa_name(Isa isa) { return isa == Isa::avx2 ? "avx2" : "scalar"; }

void mirror_lower(cdouble* s, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        s[i * n + i] = {s[i * n + i].real(), 0.0};
        for (std::size_t j = 0; j < i; ++j) s[j * n + i] = std::conj(s[i * n + j]);
    }
}

}  // namespace cmwf::kernels
