#include "har/simd/kernels.hpp"

#include <cstdlib>
#include <string_view>

namespace har::simd {

std::string_view isa_name(Isa isa) noexcept {
    switch (isa) {
    case Isa::scalar: return "scalar";
    case Isa::avx2: return "avx2";
    }
    return "unknown";
}

bool isa_supported(Isa isa) noexcept {
    switch (isa) {
    case Isa::scalar: return true;
    case Isa::avx2:
#if defined(HAR_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
        return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
        return false;
#endif
    }
    return false;
}

const KernelTable& table(Isa isa) noexcept {
#if defined(HAR_HAVE_AVX2)
    if (isa == Isa::avx2 && isa_supported(Isa::avx2)) return avx2_table();
#endif
    (void)isa;
    return scalar_table();
}

const KernelTable& active() noexcept {
    static const KernelTable& chosen = [] () -> const KernelTable& {
        const char* env = std::getenv("HAR_ISA");
        if (env != nullptr && std::string_view(env) == "scalar") return scalar_table();
        return table(Isa::avx2);
    }();
    return chosen;
}

} // namespace har::simd
