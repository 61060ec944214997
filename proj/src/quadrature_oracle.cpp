#include <boost/math/special_functions/legendre.hpp>
#include <cmath>
#include <map>
#include <mutex>
#include <utility>
#include <vector>

#include "ngmpc/noise_moments.hpp"

namespace ngmpc {
namespace {

struct GaussLegendreRule {
    std::vector<double> nodes;    // on [-1, 1]
    std::vector<double> weights;
};

GaussLegendreRule make_rule(int n) {
    GaussLegendreRule rule;
    // Boost returns the non-negative zeros of P_n in ascending order.
    const std::vector<double> zeros = boost::math::legendre_p_zeros<double>(n);
    for (double x : zeros) {
        const double dp = boost::math::legendre_p_prime<double>(n, x);
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.nodes.push_back(x);
        rule.weights.push_back(w);
        if (x != 0.0) {
            rule.nodes.push_back(-x);
            rule.weights.push_back(w);
        }
    }
    return rule;
}

const GaussLegendreRule& rule_for(int n) {
    static std::mutex mutex;
    static std::map<int, GaussLegendreRule> cache;
    const std::lock_guard<std::mutex> lock(mutex);
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, make_rule(n)).first;
    return it->second;
}

double integrand(const MixedTrigMomentKey& key, double w) {
    const double a = key.delta * w;
    return std::pow(a, key.p) * std::pow(std::cos(a), key.q) * std::pow(std::sin(a), key.r);
}

// Integrates density(w) * integrand(w) over [lo, hi] with the given rule.
template <typename Density>
double integrate(const GaussLegendreRule& rule, double lo, double hi, const MixedTrigMomentKey& key,
                 Density density) {
    const double half = 0.5 * (hi - lo);
    const double mid = 0.5 * (hi + lo);
    double acc = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
        const double w = mid + half * rule.nodes[i];
        acc += rule.weights[i] * density(w) * integrand(key, w);
    }
    return half * acc;
}

}  // namespace

double quadrature_moment_oracle(const NoiseSpec& spec, const MixedTrigMomentKey& key, int nodes) {
    if (nodes < 64) throw std::invalid_argument("quadrature oracle requires at least 64 nodes");
    const GaussLegendreRule& rule = rule_for(nodes);
    const double value = std::visit(
        [&](const auto& d) -> double {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, BetaDistribution>) {
                const double width = d.high - d.low;
                const double log_norm =
                    std::lgamma(d.alpha + d.beta) - std::lgamma(d.alpha) - std::lgamma(d.beta);
                return integrate(rule, d.low, d.high, key, [&](double w) {
                    const double x = (w - d.low) / width;
                    return std::exp(log_norm + (d.alpha - 1.0) * std::log(x) +
                                    (d.beta - 1.0) * std::log1p(-x)) /
                           width;
                });
            } else if constexpr (std::is_same_v<T, UniformDistribution>) {
                const double density = 1.0 / (d.high - d.low);
                return integrate(rule, d.low, d.high, key, [density](double) { return density; });
            } else {
                if (d.std == 0.0) return integrand(key, d.mean);
                const double norm = 1.0 / (d.std * std::sqrt(2.0 * M_PI));
                return integrate(rule, d.mean - 10.0 * d.std, d.mean + 10.0 * d.std, key, [&](double w) {
                    const double u = (w - d.mean) / d.std;
                    return norm * std::exp(-0.5 * u * u);
                });
            }
        },
        spec.distribution());
    if (!std::isfinite(value)) throw NumericalFailure(spec.describe() + ": quadrature produced a non-finite value");
    return value;
}

}  // namespace ngmpc
