#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "ngmpc/simd.hpp"

using namespace ngmpc::simd;

namespace {

std::vector<double> random_vector(std::size_t n, std::mt19937_64& rng, double scale = 1.0) {
    std::uniform_real_distribution<double> u(-scale, scale);
    std::vector<double> v(n);
    for (double& x : v) x = u(rng);
    return v;
}

class KernelEquivalence : public ::testing::TestWithParam<std::size_t> {
protected:
    void SetUp() override {
        if (avx2_kernels() == nullptr) GTEST_SKIP() << "AVX2 variant unavailable on this CPU";
    }
};

}  // namespace

TEST_P(KernelEquivalence, Dot) {
    std::mt19937_64 rng(GetParam());
    const auto a = random_vector(GetParam(), rng);
    const auto b = random_vector(GetParam(), rng);
    const double ref = scalar_kernels().dot(a.data(), b.data(), a.size());
    EXPECT_NEAR(avx2_kernels()->dot(a.data(), b.data(), a.size()), ref, 1e-12 * std::max(1.0, std::abs(ref)) * 8);
}

TEST_P(KernelEquivalence, Axpy) {
    std::mt19937_64 rng(GetParam() + 1);
    const auto x = random_vector(GetParam(), rng);
    auto y1 = random_vector(GetParam(), rng);
    auto y2 = y1;
    scalar_kernels().axpy(0.37, x.data(), y1.data(), x.size());
    avx2_kernels()->axpy(0.37, x.data(), y2.data(), x.size());
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(y1[i], y2[i], 1e-15);
}

TEST_P(KernelEquivalence, ProductMoments) {
    std::mt19937_64 rng(GetParam() + 2);
    const std::size_t n = GetParam();
    std::vector<std::vector<double>> cols;
    for (int j = 0; j < 4; ++j) cols.push_back(random_vector(n, rng, 3.0));
    for (std::size_t nf = 0; nf <= 4; ++nf) {
        std::vector<const double*> f;
        for (std::size_t j = 0; j < nf; ++j) f.push_back(cols[j].data());
        double s1, q1, s2, q2;
        scalar_kernels().product_moments(f.data(), nf, n, &s1, &q1);
        avx2_kernels()->product_moments(f.data(), nf, n, &s2, &q2);
        EXPECT_NEAR(s1, s2, 1e-11 * std::max(1.0, q1));
        EXPECT_NEAR(q1, q2, 1e-11 * std::max(1.0, q1));
    }
}

TEST_P(KernelEquivalence, DistancesAndCount) {
    std::mt19937_64 rng(GetParam() + 3);
    const std::size_t n = GetParam();
    std::vector<std::vector<double>> c;
    for (int j = 0; j < 6; ++j) c.push_back(random_vector(n, rng, 10.0));
    std::vector<double> o1(n), o2(n);
    scalar_kernels().squared_distances(c[0].data(), c[1].data(), c[2].data(), c[3].data(), c[4].data(), c[5].data(),
                                       o1.data(), n);
    avx2_kernels()->squared_distances(c[0].data(), c[1].data(), c[2].data(), c[3].data(), c[4].data(), c[5].data(),
                                      o2.data(), n);
    for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(o1[i], o2[i], 1e-12 * std::max(1.0, o1[i]));
    // Thresholds away from any data point so rounding cannot flip a comparison.
    for (double t : {-1.0, 50.0, 150.0, 400.5, 1e9}) {
        EXPECT_EQ(scalar_kernels().count_below(o1.data(), n, t), avx2_kernels()->count_below(o1.data(), n, t));
    }
    if (n > 0) {
        EXPECT_EQ(scalar_kernels().count_below(o1.data(), n, o1[0]), avx2_kernels()->count_below(o1.data(), n, o1[0]));
    }
}

INSTANTIATE_TEST_SUITE_P(Lengths, KernelEquivalence, ::testing::Values(0, 1, 3, 4, 5, 7, 8, 15, 16, 17, 126, 1000, 4099));

TEST(Dispatch, ActiveTableIsConsistent) {
    const KernelTable& k = active_kernels();
    EXPECT_EQ(&k, &active_kernels());
    if (avx2_kernels() != nullptr && std::getenv("NGMPC_SIMD") == nullptr) {
        EXPECT_EQ(k.isa, Isa::avx2);
    }
    EXPECT_EQ(isa_name(Isa::scalar), "scalar");
    const double a[3] = {1, 2, 3};
    EXPECT_EQ(dot(a, a), 14.0);
}
