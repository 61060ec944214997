#include "ngmpc/noise_moments.hpp"

#include <cmath>
#include <sstream>

namespace ngmpc {
namespace {

using cplx = std::complex<double>;

constexpr double kSeriesTolerance = 1e-12;
constexpr int kSeriesIterationCap = 500;
constexpr double kImaginaryResidueTolerance = 1e-9;

double binomial(int n, int k) {
    double c = 1.0;
    for (int j = 1; j <= k; ++j) c = c * static_cast<double>(n - k + j) / static_cast<double>(j);
    return c;
}

double factorial(int n) {
    double f = 1.0;
    for (int j = 2; j <= n; ++j) f *= j;
    return f;
}

// i^n for integer n >= 0.
cplx i_pow(int n) {
    switch (n & 3) {
        case 0:
            return {1.0, 0.0};
        case 1:
            return {0.0, 1.0};
        case 2:
            return {-1.0, 0.0};
        default:
            return {0.0, -1.0};
    }
}

cplx ipow_c(cplx base, int n) {
    cplx out = 1.0;
    for (int j = 0; j < n; ++j) out *= base;
    return out;
}

// exp(i*mu*t - s^2 t^2 / 2). With g(t) its exponent, g'' is constant, so
// d^n/dt^n e^g = e^g * sum_k n!/(k!(n-2k)!) g'^(n-2k) (g''/2)^k.
cplx gaussian_derivative(const GaussianDistribution& d, int order, double t) {
    const double var = d.std * d.std;
    const cplx phi = std::exp(cplx(-0.5 * var * t * t, d.mean * t));
    const cplx slope(-var * t, d.mean);
    const double half_curv = -0.5 * var;
    cplx acc = 0.0;
    for (int k = 0; 2 * k <= order; ++k) {
        const double c = factorial(order) / (factorial(k) * factorial(order - 2 * k));
        acc += c * ipow_c(slope, order - 2 * k) * std::pow(half_curv, k);
    }
    return phi * acc;
}

// Phi^(n)(t) = i^n / (b - a) * int_a^b w^n e^{itw} dw.
cplx uniform_derivative(const UniformDistribution& d, int order, double t) {
    const double a = d.low;
    const double b = d.high;
    const double width = b - a;
    const double radius = std::max(std::abs(a), std::abs(b));
    const double reach = std::abs(t) * radius;
    cplx integral = 0.0;
    if (reach <= 4.0) {
        // Power series of e^{itw}; converges for all t, cancellation-free for small reach.
        cplx it_pow = 1.0;
        double m_fact = 1.0;
        for (int m = 0; m < kSeriesIterationCap; ++m) {
            if (m > 0) {
                it_pow *= cplx(0.0, t);
                m_fact *= m;
            }
            const int e = order + m + 1;
            const double span = (std::pow(b, e) - std::pow(a, e)) / e;
            const cplx term = it_pow / m_fact * span;
            integral += term;
            // Odd-symmetric spans vanish exactly, so stop on a bound of the term rather than its value.
            const double bound = std::abs(it_pow) / m_fact * 2.0 * std::pow(radius, e) / e;
            if (m > reach && bound <= kSeriesTolerance * std::max(std::abs(integral), 1e-300)) break;
            if (m + 1 == kSeriesIterationCap) {
                std::ostringstream os;
                os << "uniform characteristic-function series did not converge at t=" << t;
                throw NumericalFailure(os.str());
            }
        }
    } else {
        // Upward integration-by-parts recursion, stable once |t| dominates the order.
        const cplx it(0.0, t);
        const cplx eb = std::exp(cplx(0.0, t * b));
        const cplx ea = std::exp(cplx(0.0, t * a));
        integral = (eb - ea) / it;
        for (int n = 1; n <= order; ++n) {
            integral = (std::pow(b, n) * eb - std::pow(a, n) * ea) / it - static_cast<double>(n) / it * integral;
        }
    }
    return i_pow(order) * integral / width;
}

// Derivative of 1F1(alpha; alpha+beta; i t) of standard Beta on [0,1]:
// i^n (alpha)_n / (alpha+beta)_n * 1F1(alpha+n; alpha+beta+n; i t), summed term by term.
cplx standard_beta_derivative(const BetaDistribution& d, int order, double t) {
    double rising_ratio = 1.0;
    for (int j = 0; j < order; ++j) rising_ratio *= (d.alpha + j) / (d.alpha + d.beta + j);
    const double a = d.alpha + order;
    const double c = d.alpha + d.beta + order;
    cplx term = 1.0;
    cplx sum = 1.0;
    bool converged = false;
    for (int k = 0; k < kSeriesIterationCap; ++k) {
        term *= cplx(0.0, t) * ((a + k) / ((c + k) * (k + 1)));
        sum += term;
        if (k + 1 > std::abs(t) && std::abs(term) <= kSeriesTolerance * std::abs(sum)) {
            converged = true;
            break;
        }
    }
    if (!converged) {
        std::ostringstream os;
        os << "Kummer series for Beta(" << d.alpha << "," << d.beta << ") did not converge at t=" << t
           << " within " << kSeriesIterationCap << " terms";
        throw NumericalFailure(os.str());
    }
    return i_pow(order) * rising_ratio * sum;
}

// w = low + width * B: Phi_w(t) = e^{i t low} Phi_B(width t); Leibniz rule for derivatives.
cplx beta_derivative(const BetaDistribution& d, int order, double t) {
    const double width = d.high - d.low;
    const cplx shift = std::exp(cplx(0.0, t * d.low));
    cplx acc = 0.0;
    for (int k = 0; k <= order; ++k) {
        const cplx outer = ipow_c(cplx(0.0, d.low), order - k);
        acc += binomial(order, k) * outer * std::pow(width, k) * standard_beta_derivative(d, k, width * t);
    }
    return shift * acc;
}

}  // namespace

std::string to_string(NoiseChannel channel) {
    switch (channel) {
        case NoiseChannel::speed_v:
            return "speed_v";
        case NoiseChannel::altitude_z:
            return "altitude_z";
        case NoiseChannel::heading_psi:
            return "heading_psi";
    }
    return "unknown";
}

NoiseChannel noise_channel_from_string(const std::string& name) {
    if (name == "speed_v") return NoiseChannel::speed_v;
    if (name == "altitude_z") return NoiseChannel::altitude_z;
    if (name == "heading_psi") return NoiseChannel::heading_psi;
    throw ConfigurationError("unknown noise channel '" + name + "'");
}

NoiseSpec::NoiseSpec(NoiseChannel channel, Distribution distribution)
    : channel_(channel), distribution_(distribution) {
    std::visit(
        [](const auto& d) {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, BetaDistribution>) {
                if (!(d.alpha > 0.0) || !(d.beta > 0.0))
                    throw ConfigurationError("Beta noise requires alpha > 0 and beta > 0");
                if (!(d.low < d.high)) throw ConfigurationError("Beta noise support requires low < high");
            } else if constexpr (std::is_same_v<T, UniformDistribution>) {
                if (!(d.low < d.high)) throw ConfigurationError("Uniform noise requires low < high");
            } else {
                if (!std::isfinite(d.mean)) throw ConfigurationError("Gaussian noise mean must be finite");
                if (!(d.std >= 0.0) || !std::isfinite(d.std))
                    throw ConfigurationError("Gaussian noise requires a finite std >= 0");
            }
        },
        distribution_);
}

NoiseSpec NoiseSpec::beta(NoiseChannel channel, double alpha, double beta, double low, double high) {
    return NoiseSpec(channel, BetaDistribution{alpha, beta, low, high});
}

NoiseSpec NoiseSpec::uniform(NoiseChannel channel, double low, double high) {
    return NoiseSpec(channel, UniformDistribution{low, high});
}

NoiseSpec NoiseSpec::gaussian(NoiseChannel channel, double mean, double std) {
    return NoiseSpec(channel, GaussianDistribution{mean, std});
}

double NoiseSpec::mean() const {
    return std::visit(
        [](const auto& d) -> double {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, BetaDistribution>) {
                return d.low + (d.high - d.low) * d.alpha / (d.alpha + d.beta);
            } else if constexpr (std::is_same_v<T, UniformDistribution>) {
                return 0.5 * (d.low + d.high);
            } else {
                return d.mean;
            }
        },
        distribution_);
}

double NoiseSpec::variance() const {
    return std::visit(
        [](const auto& d) -> double {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, BetaDistribution>) {
                const double s = d.alpha + d.beta;
                const double w = d.high - d.low;
                return w * w * d.alpha * d.beta / (s * s * (s + 1.0));
            } else if constexpr (std::is_same_v<T, UniformDistribution>) {
                const double w = d.high - d.low;
                return w * w / 12.0;
            } else {
                return d.std * d.std;
            }
        },
        distribution_);
}

std::string NoiseSpec::describe() const {
    std::ostringstream os;
    os << to_string(channel_) << ":";
    std::visit(
        [&os](const auto& d) {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, BetaDistribution>) {
                os << "Beta(" << d.alpha << "," << d.beta << ") on [" << d.low << "," << d.high << "]";
            } else if constexpr (std::is_same_v<T, UniformDistribution>) {
                os << "Uniform[" << d.low << "," << d.high << "]";
            } else {
                os << "Gaussian(mean=" << d.mean << ",std=" << d.std << ")";
            }
        },
        distribution_);
    return os.str();
}

std::complex<double> char_fn_derivative(const NoiseSpec& spec, int order, double t) {
    if (order < 0 || order > kMaxMixedTrigPower) {
        throw std::invalid_argument("characteristic-function derivative order must lie in [0, 8]");
    }
    try {
        return std::visit(
            [order, t](const auto& d) -> cplx {
                using T = std::decay_t<decltype(d)>;
                if constexpr (std::is_same_v<T, BetaDistribution>) {
                    return beta_derivative(d, order, t);
                } else if constexpr (std::is_same_v<T, UniformDistribution>) {
                    return uniform_derivative(d, order, t);
                } else {
                    return gaussian_derivative(d, order, t);
                }
            },
            spec.distribution());
    } catch (const NumericalFailure& e) {
        throw NumericalFailure(spec.describe() + ": " + e.what());
    }
}

NoiseModel NoiseModel::reference() {
    return NoiseModel{NoiseSpec::beta(NoiseChannel::speed_v, 1.0, 3.0),
                      NoiseSpec::gaussian(NoiseChannel::altitude_z, 0.0, 0.3),
                      NoiseSpec::uniform(NoiseChannel::heading_psi, -0.1, 0.1)};
}

NoiseModel NoiseModel::zero() {
    return NoiseModel{NoiseSpec::gaussian(NoiseChannel::speed_v, 0.0, 0.0),
                      NoiseSpec::gaussian(NoiseChannel::altitude_z, 0.0, 0.0),
                      NoiseSpec::gaussian(NoiseChannel::heading_psi, 0.0, 0.0)};
}

const NoiseSpec& NoiseModel::operator[](NoiseChannel c) const {
    switch (c) {
        case NoiseChannel::speed_v:
            return speed;
        case NoiseChannel::altitude_z:
            return climb;
        case NoiseChannel::heading_psi:
            return heading;
    }
    throw std::invalid_argument("unknown noise channel");
}

void NoiseModel::validate() const {
    if (speed.channel() != NoiseChannel::speed_v || climb.channel() != NoiseChannel::altitude_z ||
        heading.channel() != NoiseChannel::heading_psi) {
        throw ConfigurationError("noise model channels must be speed_v, altitude_z, heading_psi");
    }
}

double mixed_trig_moment(const NoiseSpec& spec, const MixedTrigMomentKey& key) {
    if (key.p < 0 || key.q < 0 || key.r < 0 || key.total_power() > kMaxMixedTrigPower) {
        throw std::invalid_argument("mixed trigonometric moment powers must be non-negative with p+q+r <= 8");
    }
    const double delta_pow = std::pow(key.delta, key.p);
    cplx sum = 0.0;
    for (int g = 0; g <= key.q; ++g) {
        for (int h = 0; h <= key.r; ++h) {
            const int t = 2 * (g + h) - key.q - key.r;
            const double sign = ((key.r - h) & 1) ? -1.0 : 1.0;
            sum += binomial(key.q, g) * binomial(key.r, h) * sign * delta_pow *
                   char_fn_derivative(spec, key.p, key.delta * t);
        }
    }
    // Divide by i^(p+r) 2^(q+r); 1/i^n = i^(4-n mod 4).
    const cplx value = sum * i_pow((4 - ((key.p + key.r) & 3)) & 3) / std::ldexp(1.0, key.q + key.r);
    if (std::abs(value.imag()) > kImaginaryResidueTolerance * std::max(1.0, std::abs(value.real()))) {
        std::ostringstream os;
        os << spec.describe() << ": imaginary residue " << value.imag() << " for key (" << key.p << ","
           << key.q << "," << key.r << ") delta=" << key.delta;
        throw NumericalFailure(os.str());
    }
    return value.real();
}

TrigMomentTable::TrigMomentTable(NoiseSpec spec, double delta, int max_total_power,
                                 std::map<TrigPowers, double> entries)
    : spec_(std::move(spec)), delta_(delta), max_total_power_(max_total_power), entries_(std::move(entries)) {}

double TrigMomentTable::at(int p, int q, int r) const {
    const auto it = entries_.find({p, q, r});
    if (it == entries_.end()) {
        std::ostringstream os;
        os << "moment table for " << spec_.describe() << " has no entry (" << p << "," << q << "," << r
           << "); table cap is " << max_total_power_;
        throw ConfigurationError(os.str());
    }
    return it->second;
}

TrigMomentTable TrigMomentTable::with_perturbed_entry(int p, int q, int r, double offset) const {
    auto entries = entries_;
    const auto it = entries.find({p, q, r});
    if (it == entries.end()) throw ConfigurationError("cannot perturb a missing moment-table entry");
    it->second += offset;
    return TrigMomentTable(spec_, delta_, max_total_power_, std::move(entries));
}

TrigMomentTable build_moment_table(const NoiseSpec& spec, double delta, int max_total_power) {
    if (max_total_power < 4 || max_total_power > kMaxMixedTrigPower) {
        throw std::invalid_argument("moment tables need a total power cap in [4, 8]");
    }
    std::map<TrigPowers, double> entries;
    for (int p = 0; p <= max_total_power; ++p) {
        for (int q = 0; p + q <= max_total_power; ++q) {
            for (int r = 0; p + q + r <= max_total_power; ++r) {
                const double value = (p + q + r == 0) ? 1.0 : mixed_trig_moment(spec, {p, q, r, delta});
                if (!std::isfinite(value)) {
                    throw NumericalFailure(spec.describe() + ": non-finite moment-table entry");
                }
                entries.emplace(TrigPowers{p, q, r}, value);
            }
        }
    }
    return TrigMomentTable(spec, delta, max_total_power, std::move(entries));
}

}  // namespace ngmpc
