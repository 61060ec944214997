#include "ngmpc/simd.hpp"

namespace ngmpc::simd {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void product_moments_scalar(const double* const* factors, std::size_t n_factors, std::size_t n,
                            double* sum, double* sum_sq) {
    double s = 0.0;
    double s2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double p = 1.0;
        for (std::size_t j = 0; j < n_factors; ++j) p *= factors[j][i];
        s += p;
        s2 += p * p;
    }
    *sum = s;
    *sum_sq = s2;
}

void squared_distances_scalar(const double* ax, const double* ay, const double* az,
                              const double* bx, const double* by, const double* bz, double* out,
                              std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = ax[i] - bx[i];
        const double dy = ay[i] - by[i];
        const double dz = az[i] - bz[i];
        out[i] = dx * dx + dy * dy + dz * dz;
    }
}

std::size_t count_below_scalar(const double* values, std::size_t n, double threshold) {
    std::size_t count = 0;
    for (std::size_t i = 0; i < n; ++i) count += values[i] < threshold ? 1 : 0;
    return count;
}

}  // namespace

const KernelTable& scalar_kernels() {
    static const KernelTable table{Isa::scalar,           dot_scalar,
                                   axpy_scalar,           product_moments_scalar,
                                   squared_distances_scalar, count_below_scalar};
    return table;
}

}  // namespace ngmpc::simd
