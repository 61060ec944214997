#pragma once

// Expectations of mixed trigonometric-polynomial functions of a scalar
// disturbance, E[(d*w)^p cos^q(d*w) sin^r(d*w)], computed from derivatives of
// the characteristic function of w.

#include <array>
#include <complex>
#include <compare>
#include <map>
#include <string>
#include <variant>

#include "ngmpc/errors.hpp"

namespace ngmpc {

enum class NoiseChannel { speed_v, altitude_z, heading_psi };

std::string to_string(NoiseChannel channel);
NoiseChannel noise_channel_from_string(const std::string& name);

// Beta(alpha, beta) mapped affinely onto [low, high]; the default support is [0, 1].
struct BetaDistribution {
    double alpha;
    double beta;
    double low = 0.0;
    double high = 1.0;

    bool operator==(const BetaDistribution&) const = default;
};

struct UniformDistribution {
    double low;
    double high;

    bool operator==(const UniformDistribution&) const = default;
};

// std == 0 is accepted and denotes a point mass at the mean.
struct GaussianDistribution {
    double mean;
    double std;

    bool operator==(const GaussianDistribution&) const = default;
};

using Distribution = std::variant<BetaDistribution, UniformDistribution, GaussianDistribution>;

class NoiseSpec {
public:
    // Throws ConfigurationError when parameters violate their constraints.
    NoiseSpec(NoiseChannel channel, Distribution distribution);

    static NoiseSpec beta(NoiseChannel channel, double alpha, double beta, double low = 0.0,
                          double high = 1.0);
    static NoiseSpec uniform(NoiseChannel channel, double low, double high);
    static NoiseSpec gaussian(NoiseChannel channel, double mean, double std);

    NoiseChannel channel() const { return channel_; }
    const Distribution& distribution() const { return distribution_; }

    double mean() const;
    double variance() const;
    bool is_degenerate() const { return variance() == 0.0; }
    std::string describe() const;

    bool operator==(const NoiseSpec&) const = default;

private:
    NoiseChannel channel_;
    Distribution distribution_;
};

// The three mutually independent disturbances acting on the controls.
struct NoiseModel {
    NoiseSpec speed;    // on u_v, m/s
    NoiseSpec climb;    // on u_z, m/s
    NoiseSpec heading;  // on u_psi, rad/s

    // Beta(1,3) on [0,1], Gaussian std 0.3, Uniform[-0.1, 0.1].
    static NoiseModel reference();
    // Point masses at zero on every channel.
    static NoiseModel zero();

    const NoiseSpec& operator[](NoiseChannel c) const;
    // Throws ConfigurationError if a spec sits on the wrong channel.
    void validate() const;
    bool operator==(const NoiseModel&) const = default;
};

// Largest p+q+r accepted anywhere in this module.
inline constexpr int kMaxMixedTrigPower = 8;

struct MixedTrigMomentKey {
    int p = 0;  // power of (delta * w)
    int q = 0;  // power of cos(delta * w)
    int r = 0;  // power of sin(delta * w)
    double delta = 1.0;

    int total_power() const { return p + q + r; }
};

// Order-th derivative of the characteristic function of spec, evaluated at t.
// Beta uses the Kummer series of 1F1 truncated at relative tolerance 1e-12.
std::complex<double> char_fn_derivative(const NoiseSpec& spec, int order, double t);

double mixed_trig_moment(const NoiseSpec& spec, const MixedTrigMomentKey& key);

// Gauss-Legendre integration of the same expectation against the density
// (Gaussian truncated at +-10 std). Independent of the characteristic function.
double quadrature_moment_oracle(const NoiseSpec& spec, const MixedTrigMomentKey& key, int nodes = 128);

using TrigPowers = std::array<int, 3>;

class TrigMomentTable {
public:
    TrigMomentTable(NoiseSpec spec, double delta, int max_total_power,
                    std::map<TrigPowers, double> entries);

    const NoiseSpec& spec() const { return spec_; }
    double delta() const { return delta_; }
    int max_total_power() const { return max_total_power_; }
    const std::map<TrigPowers, double>& entries() const { return entries_; }

    bool contains(int p, int q, int r) const { return entries_.count({p, q, r}) != 0; }
    // Throws ConfigurationError for keys beyond the table cap.
    double at(int p, int q, int r) const;

    // Returns a copy with one entry offset; used to exercise oracle harnesses.
    TrigMomentTable with_perturbed_entry(int p, int q, int r, double offset) const;

private:
    NoiseSpec spec_;
    double delta_;
    int max_total_power_;
    std::map<TrigPowers, double> entries_;
};

TrigMomentTable build_moment_table(const NoiseSpec& spec, double delta, int max_total_power = 4);

}  // namespace ngmpc
