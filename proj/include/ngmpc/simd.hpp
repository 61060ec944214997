#pragma once

// Data-parallel inner loops used by moment propagation, Monte Carlo
// accumulation and particle distance statistics. Every kernel has a scalar
// reference implementation; wider variants are picked once at runtime.

#include <cstddef>
#include <span>
#include <string_view>

namespace ngmpc::simd {

enum class Isa { scalar, avx2 };

std::string_view isa_name(Isa isa);

struct KernelTable {
    Isa isa;

    double (*dot)(const double* a, const double* b, std::size_t n);

    // y += alpha * x
    void (*axpy)(double alpha, const double* x, double* y, std::size_t n);

    // Accumulates sum_i prod_j factors[j][i] and the sum of its squares.
    // With n_factors == 0 each product is 1.
    void (*product_moments)(const double* const* factors, std::size_t n_factors, std::size_t n,
                            double* sum, double* sum_sq);

    // out[i] = (ax-bx)^2 + (ay-by)^2 + (az-bz)^2
    void (*squared_distances)(const double* ax, const double* ay, const double* az,
                              const double* bx, const double* by, const double* bz, double* out,
                              std::size_t n);

    // Number of entries strictly below threshold.
    std::size_t (*count_below)(const double* values, std::size_t n, double threshold);
};

const KernelTable& scalar_kernels();

// nullptr when the variant was not compiled in or the CPU lacks support.
const KernelTable* avx2_kernels();

// Best supported table. NGMPC_SIMD=scalar in the environment forces the
// reference kernels. The choice is made on first call and then fixed.
const KernelTable& active_kernels();

inline double dot(std::span<const double> a, std::span<const double> b) {
    return active_kernels().dot(a.data(), b.data(), a.size());
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
    active_kernels().axpy(alpha, x.data(), y.data(), x.size());
}

}  // namespace ngmpc::simd
