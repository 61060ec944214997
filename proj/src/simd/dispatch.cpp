#include <cstdlib>
#include <string>

#include "ngmpc/simd.hpp"

namespace ngmpc::simd {

#if defined(NGMPC_HAVE_AVX2)
const KernelTable& avx2_kernel_table();
#endif

std::string_view isa_name(Isa isa) {
    switch (isa) {
        case Isa::scalar:
            return "scalar";
        case Isa::avx2:
            return "avx2";
    }
    return "unknown";
}

const KernelTable* avx2_kernels() {
#if defined(NGMPC_HAVE_AVX2)
    static const bool supported = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
    return supported ? &avx2_kernel_table() : nullptr;
#else
    return nullptr;
#endif
}

const KernelTable& active_kernels() {
    static const KernelTable& table = [] () -> const KernelTable& {
        const char* forced = std::getenv("NGMPC_SIMD");
        if (forced != nullptr && std::string(forced) == "scalar") return scalar_kernels();
        if (const KernelTable* avx2 = avx2_kernels()) return *avx2;
        return scalar_kernels();
    }();
    return table;
}

}  // namespace ngmpc::simd
