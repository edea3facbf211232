#include "odtr/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

namespace odtr::kernels {
namespace {

Isa detect() {
    if (const char* env = std::getenv("ODTR_SIMD")) {
        const std::string v(env);
        if (v == "scalar") return Isa::Scalar;
        if (v == "avx2" && isa_available(Isa::Avx2)) return Isa::Avx2;
    }
    return isa_available(Isa::Avx2) ? Isa::Avx2 : Isa::Scalar;
}

std::atomic<Isa>& current() {
    static std::atomic<Isa> isa{detect()};
    return isa;
}

}  // namespace

bool isa_available(Isa isa) {
    switch (isa) {
        case Isa::Scalar:
            return true;
        case Isa::Avx2:
#if defined(ODTR_HAVE_AVX2)
            return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
            return false;
#endif
    }
    return false;
}

const KernelTable& table(Isa isa) {
#if defined(ODTR_HAVE_AVX2)
    if (isa == Isa::Avx2) return avx2::kTable;
#endif
    (void)isa;
    return scalar::kTable;
}

Isa active_isa() { return current().load(std::memory_order_relaxed); }

const KernelTable& active() { return table(active_isa()); }

void set_active_isa(Isa isa) {
    current().store(isa_available(isa) ? isa : Isa::Scalar, std::memory_order_relaxed);
}

std::string_view isa_name(Isa isa) { return isa == Isa::Avx2 ? "avx2" : "scalar"; }

}  // namespace odtr::kernels
