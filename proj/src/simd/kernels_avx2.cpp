// Compiled with -mavx2 -mfma; only reached through avx2_kernels() after a
// runtime CPU check.

#include <immintrin.h>

#include "ngmpc/simd.hpp"

namespace ngmpc::simd {
namespace {

inline double hsum(__m256d v) {
    const __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    const __m128d s = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
    }
    for (; i + 4 <= n; i += 4) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    }
    double acc = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void product_moments_avx2(const double* const* factors, std::size_t n_factors, std::size_t n,
                          double* sum, double* sum_sq) {
    __m256d s = _mm256_setzero_pd();
    __m256d s2 = _mm256_setzero_pd();
    const __m256d one = _mm256_set1_pd(1.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d p = one;
        for (std::size_t j = 0; j < n_factors; ++j) p = _mm256_mul_pd(p, _mm256_loadu_pd(factors[j] + i));
        s = _mm256_add_pd(s, p);
        s2 = _mm256_fmadd_pd(p, p, s2);
    }
    double ts = hsum(s);
    double ts2 = hsum(s2);
    for (; i < n; ++i) {
        double p = 1.0;
        for (std::size_t j = 0; j < n_factors; ++j) p *= factors[j][i];
        ts += p;
        ts2 += p * p;
    }
    *sum = ts;
    *sum_sq = ts2;
}

void squared_distances_avx2(const double* ax, const double* ay, const double* az, const double* bx,
                            const double* by, const double* bz, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d dx = _mm256_sub_pd(_mm256_loadu_pd(ax + i), _mm256_loadu_pd(bx + i));
        const __m256d dy = _mm256_sub_pd(_mm256_loadu_pd(ay + i), _mm256_loadu_pd(by + i));
        const __m256d dz = _mm256_sub_pd(_mm256_loadu_pd(az + i), _mm256_loadu_pd(bz + i));
        __m256d acc = _mm256_mul_pd(dx, dx);
        acc = _mm256_fmadd_pd(dy, dy, acc);
        acc = _mm256_fmadd_pd(dz, dz, acc);
        _mm256_storeu_pd(out + i, acc);
    }
    for (; i < n; ++i) {
        const double dx = ax[i] - bx[i];
        const double dy = ay[i] - by[i];
        const double dz = az[i] - bz[i];
        out[i] = dx * dx + dy * dy + dz * dz;
    }
}

std::size_t count_below_avx2(const double* values, std::size_t n, double threshold) {
    const __m256d t = _mm256_set1_pd(threshold);
    std::size_t count = 0;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const int mask = _mm256_movemask_pd(_mm256_cmp_pd(_mm256_loadu_pd(values + i), t, _CMP_LT_OQ));
        count += static_cast<std::size_t>(__builtin_popcount(static_cast<unsigned>(mask)));
    }
    for (; i < n; ++i) count += values[i] < threshold ? 1 : 0;
    return count;
}

}  // namespace

const KernelTable& avx2_kernel_table() {
    static const KernelTable table{Isa::avx2,           dot_avx2,
                                   axpy_avx2,           product_moments_avx2,
                                   squared_distances_avx2, count_below_avx2};
    return table;
}

}  // namespace ngmpc::simd
