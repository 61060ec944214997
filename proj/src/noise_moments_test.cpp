#include "ngmpc/noise_moments.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "ngmpc/errors.hpp"

using namespace ngmpc;

namespace {

std::vector<NoiseSpec> reference_specs() {
    const NoiseModel m = NoiseModel::reference();
    return {m.speed, m.climb, m.heading};
}

}  // namespace

TEST(CharFn, ZeroOrderAtOriginIsOne) {
    for (const NoiseSpec& s : reference_specs()) {
        const auto v = char_fn_derivative(s, 0, 0.0);
        EXPECT_NEAR(v.real(), 1.0, 1e-14);
        EXPECT_NEAR(v.imag(), 0.0, 1e-14);
    }
}

TEST(CharFn, GaussianClosedForm) {
    const auto g = NoiseSpec::gaussian(NoiseChannel::altitude_z, 0.0, 0.3);
    for (double t : {-3.0, -0.5, 0.7, 2.0, 8.0}) {
        EXPECT_NEAR(char_fn_derivative(g, 0, t).real(), std::exp(-0.09 * t * t / 2.0), 1e-14);
        // First derivative of exp(-s^2 t^2/2) is -s^2 t exp(...)
        EXPECT_NEAR(char_fn_derivative(g, 1, t).real(), -0.09 * t * std::exp(-0.09 * t * t / 2.0), 1e-14);
    }
}

TEST(CharFn, UniformClosedForm) {
    const auto u = NoiseSpec::uniform(NoiseChannel::heading_psi, -0.1, 0.1);
    for (double t : {-8.0, -1.0, 0.3, 4.0, 40.0, 100.0}) {
        EXPECT_NEAR(char_fn_derivative(u, 0, t).real(), std::sin(0.1 * t) / (0.1 * t), 1e-13);
    }
}

TEST(CharFn, BetaMatchesNumericalDerivatives) {
    const auto b = NoiseSpec::beta(NoiseChannel::speed_v, 1.0, 3.0);
    // Phi(t) = E[exp(i t w)]; compare the order-1 derivative with a central difference of order 0.
    for (double t : {-2.0, 0.0, 0.5, 3.0}) {
        const double h = 1e-5;
        const auto fd = (char_fn_derivative(b, 0, t + h) - char_fn_derivative(b, 0, t - h)) / (2.0 * h);
        const auto d1 = char_fn_derivative(b, 1, t);
        EXPECT_NEAR(d1.real(), fd.real(), 1e-8);
        EXPECT_NEAR(d1.imag(), fd.imag(), 1e-8);
    }
}

TEST(MixedTrigMoment, BetaRawMoments) {
    const auto b = NoiseSpec::beta(NoiseChannel::speed_v, 1.0, 3.0);
    EXPECT_NEAR(mixed_trig_moment(b, {1, 0, 0, 1.0}), 0.25, 1e-12);
    EXPECT_NEAR(mixed_trig_moment(b, {2, 0, 0, 1.0}), 0.1, 1e-12);
    // Third raw moment a(a+1)(a+2)/((a+b)(a+b+1)(a+b+2)) = 6/120.
    EXPECT_NEAR(mixed_trig_moment(b, {3, 0, 0, 1.0}), 0.05, 1e-12);
}

TEST(MixedTrigMoment, SymmetricOddEntriesVanish) {
    const auto u = NoiseSpec::uniform(NoiseChannel::heading_psi, -0.1, 0.1);
    const auto g = NoiseSpec::gaussian(NoiseChannel::altitude_z, 0.0, 0.3);
    EXPECT_NEAR(mixed_trig_moment(u, {0, 0, 1, 0.1}), 0.0, 1e-12);
    for (const auto& s : {u, g}) {
        for (int p = 0; p <= 4; ++p)
            for (int q = 0; p + q <= 4; ++q)
                for (int r = 0; p + q + r <= 4; ++r) {
                    if ((p + r) % 2 == 1) EXPECT_NEAR(mixed_trig_moment(s, {p, q, r, 0.1}), 0.0, 1e-10);
                }
    }
}

TEST(MixedTrigMoment, GaussianCosine) {
    const auto g = NoiseSpec::gaussian(NoiseChannel::altitude_z, 0.0, 0.3);
    EXPECT_NEAR(mixed_trig_moment(g, {0, 1, 0, 0.1}), std::exp(-(0.03 * 0.03) / 2.0), 1e-14);
}

TEST(MixedTrigMoment, AgreesWithQuadratureOnAllLowKeys) {
    for (const NoiseSpec& s : reference_specs()) {
        for (double delta : {0.1, 1.0}) {
            for (int p = 0; p <= 4; ++p)
                for (int q = 0; p + q <= 4; ++q)
                    for (int r = 0; p + q + r <= 4; ++r) {
                        const MixedTrigMomentKey key{p, q, r, delta};
                        EXPECT_NEAR(mixed_trig_moment(s, key), quadrature_moment_oracle(s, key), 1e-8)
                            << s.describe() << " key " << p << q << r << " delta " << delta;
                    }
        }
    }
}

TEST(MixedTrigMoment, ShiftedAndScaledBeta) {
    const auto b = NoiseSpec::beta(NoiseChannel::speed_v, 2.0, 5.0, -0.4, 0.6);
    for (int p = 0; p <= 4; ++p)
        for (int q = 0; p + q <= 4; ++q)
            for (int r = 0; p + q + r <= 4; ++r) {
                const MixedTrigMomentKey key{p, q, r, 0.7};
                EXPECT_NEAR(mixed_trig_moment(b, key), quadrature_moment_oracle(b, key), 1e-8);
            }
}

TEST(MixedTrigMoment, PythagoreanIdentity) {
    for (const NoiseSpec& s : reference_specs()) {
        for (double delta : {0.01, 0.1, 1.0, 3.0}) {
            EXPECT_NEAR(mixed_trig_moment(s, {0, 2, 0, delta}) + mixed_trig_moment(s, {0, 0, 2, delta}), 1.0, 1e-10);
        }
    }
}

TEST(MixedTrigMoment, UniformCosineMonotoneInWidth) {
    double prev = 0.0;
    for (double a : {2.0, 1.0, 0.5, 0.1, 0.01}) {
        const auto u = NoiseSpec::uniform(NoiseChannel::heading_psi, -a, a);
        const double c = mixed_trig_moment(u, {0, 1, 0, 0.1});
        EXPECT_GT(c, 0.0);
        EXPECT_LE(c, 1.0);
        EXPECT_GT(c, prev);
        prev = c;
    }
}

TEST(MixedTrigMoment, RejectsExcessivePower) {
    const auto u = NoiseSpec::uniform(NoiseChannel::heading_psi, -0.1, 0.1);
    EXPECT_THROW(mixed_trig_moment(u, {5, 2, 2, 0.1}), std::invalid_argument);
}

TEST(NoiseSpec, RejectsInvalidParameters) {
    EXPECT_THROW(NoiseSpec::beta(NoiseChannel::speed_v, 0.0, 3.0), ConfigurationError);
    EXPECT_THROW(NoiseSpec::uniform(NoiseChannel::heading_psi, 0.1, -0.1), ConfigurationError);
    EXPECT_THROW(NoiseSpec::gaussian(NoiseChannel::altitude_z, 0.0, -1.0), ConfigurationError);
    EXPECT_NO_THROW(NoiseSpec::gaussian(NoiseChannel::altitude_z, 0.0, 0.0));
}

TEST(NoiseModel, ReferenceMoments) {
    const NoiseModel m = NoiseModel::reference();
    EXPECT_NEAR(m.speed.mean(), 0.25, 1e-15);
    EXPECT_NEAR(m.speed.variance(), 3.0 / 80.0, 1e-15);
    EXPECT_NEAR(m.climb.variance(), 0.09, 1e-15);
    EXPECT_NEAR(m.heading.variance(), 0.04 / 12.0, 1e-15);
    EXPECT_TRUE(NoiseModel::zero().speed.is_degenerate());
}

TEST(MomentTable, Entries) {
    const auto u = NoiseSpec::uniform(NoiseChannel::heading_psi, -0.1, 0.1);
    const TrigMomentTable t = build_moment_table(u, 0.1);
    EXPECT_EQ(t.at(0, 0, 0), 1.0);
    EXPECT_NEAR(t.at(0, 1, 0), std::sin(0.01) / 0.01, 1e-14);
    const auto g = build_moment_table(NoiseSpec::gaussian(NoiseChannel::altitude_z, 0.0, 0.3), 0.1);
    EXPECT_NEAR(g.at(3, 0, 0), 0.0, 1e-15);
    for (const auto& [key, value] : g.entries()) EXPECT_TRUE(std::isfinite(value));
    EXPECT_EQ(t.entries().size(), 35u);
}

TEST(MomentTable, CapEnforced) {
    const auto u = NoiseSpec::uniform(NoiseChannel::heading_psi, -0.1, 0.1);
    const TrigMomentTable t = build_moment_table(u, 0.1);
    EXPECT_FALSE(t.contains(5, 0, 0));
    EXPECT_THROW(t.at(5, 0, 0), ConfigurationError);
    EXPECT_THROW(build_moment_table(u, 0.1, 9), std::invalid_argument);
    const TrigMomentTable p = t.with_perturbed_entry(0, 1, 0, 0.5);
    EXPECT_NEAR(p.at(0, 1, 0) - t.at(0, 1, 0), 0.5, 1e-15);
}

TEST(MomentTable, PointMassIsExact) {
    const auto z = NoiseSpec::gaussian(NoiseChannel::altitude_z, 0.0, 0.0);
    const TrigMomentTable t = build_moment_table(z, 0.1);
    for (const auto& [key, value] : t.entries()) {
        const double expected = (key[0] == 0 && key[2] == 0) ? 1.0 : 0.0;
        EXPECT_NEAR(value, expected, 1e-15);
    }
}
