#include "ngmpc/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "ngmpc/simd.hpp"

namespace ngmpc {
namespace {

std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

double uniform01(SplitMix64& rng) {
    // 53 random mantissa bits in [0, 1).
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace

SplitMix64::result_type SplitMix64::operator()() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix(state_);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    std::uint64_t h = mix(master + 0x9e3779b97f4a7c15ULL);
    h = mix(h ^ (a + 0x632be59bd9b4e019ULL));
    h = mix(h ^ (b + 0x85157af5ULL));
    h = mix(h ^ (c + 0x2545f4914f6cdd1dULL));
    return h;
}

TrueState step_truth(const TrueState& s, const Control& u, const NoiseSample& w, double ds) {
    const double speed = ds * (u.v + w.v);
    return TrueState{s.x + speed * std::cos(s.psi), s.y + speed * std::sin(s.psi), s.z + ds * (u.z + w.z),
                     s.psi + ds * (u.psi + w.psi)};
}

AugmentedState step_augmented(const AugmentedState& s, const Control& u, const NoiseSample& w, double ds) {
    const double speed = ds * (u.v + w.v);
    const double turn = ds * (u.psi + w.psi);
    const double ct = std::cos(turn);
    const double st = std::sin(turn);
    return AugmentedState{s.x + speed * s.c, s.y + speed * s.s, s.z + ds * (u.z + w.z), ct * s.c - st * s.s,
                          st * s.c + ct * s.s};
}

AugmentedState augment(const TrueState& s) { return {s.x, s.y, s.z, std::cos(s.psi), std::sin(s.psi)}; }

double sample(const NoiseSpec& spec, SplitMix64& rng) {
    return std::visit(
        [&rng](const auto& d) -> double {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, BetaDistribution>) {
                double b;
                if (d.alpha == 1.0) {
                    // Inverse CDF of Beta(1, beta): 1 - (1-U)^(1/beta).
                    b = 1.0 - std::pow(1.0 - uniform01(rng), 1.0 / d.beta);
                } else if (d.beta == 1.0) {
                    b = std::pow(uniform01(rng), 1.0 / d.alpha);
                } else {
                    std::gamma_distribution<double> ga(d.alpha, 1.0);
                    std::gamma_distribution<double> gb(d.beta, 1.0);
                    const double x = ga(rng);
                    const double y = gb(rng);
                    b = x / (x + y);
                }
                return d.low + (d.high - d.low) * b;
            } else if constexpr (std::is_same_v<T, UniformDistribution>) {
                return d.low + (d.high - d.low) * uniform01(rng);
            } else {
                if (d.std == 0.0) return d.mean;
                std::normal_distribution<double> n(d.mean, d.std);
                return n(rng);
            }
        },
        spec.distribution());
}

NoiseStreams::NoiseStreams(std::uint64_t master, StreamPurpose purpose, std::uint64_t agent, std::uint64_t particle)
    : engines_{SplitMix64(derive_seed(master, static_cast<std::uint64_t>(purpose), agent * 4 + 0, particle)),
               SplitMix64(derive_seed(master, static_cast<std::uint64_t>(purpose), agent * 4 + 1, particle)),
               SplitMix64(derive_seed(master, static_cast<std::uint64_t>(purpose), agent * 4 + 2, particle))} {}

NoiseSample sample_noise(const NoiseModel& noise, NoiseStreams& streams) {
    NoiseSample w;
    w.v = sample(noise.speed, streams[NoiseChannel::speed_v]);
    w.z = sample(noise.climb, streams[NoiseChannel::altitude_z]);
    w.psi = sample(noise.heading, streams[NoiseChannel::heading_psi]);
    return w;
}

ParticleSet mc_rollout(const TrueState& start, std::span<const Control> controls, const NoiseModel& noise,
                       double delta_s, std::size_t n, std::uint64_t seed, std::uint64_t agent) {
    if (n == 0) throw std::invalid_argument("mc_rollout needs at least one particle");
    ParticleSet set;
    set.n = n;
    set.seed = seed;
    set.controls.assign(controls.begin(), controls.end());
    const std::size_t steps = controls.size() + 1;
    set.x.assign(steps, std::vector<double>(n));
    set.y.assign(steps, std::vector<double>(n));
    set.z.assign(steps, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
        NoiseStreams streams(seed, StreamPurpose::particles, agent, i);
        TrueState s = start;
        set.x[0][i] = s.x;
        set.y[0][i] = s.y;
        set.z[0][i] = s.z;
        for (std::size_t k = 0; k < controls.size(); ++k) {
            s = step_truth(s, controls[k], sample_noise(noise, streams), delta_s);
            set.x[k + 1][i] = s.x;
            set.y[k + 1][i] = s.y;
            set.z[k + 1][i] = s.z;
        }
    }
    return set;
}

double quantile(std::vector<double> values, double prob) {
    if (values.empty()) throw std::invalid_argument("quantile of empty data");
    std::sort(values.begin(), values.end());
    const double h = prob * static_cast<double>(values.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

std::vector<DistanceStats> pairwise_distance_stats(const ParticleSet& a, const ParticleSet& b, double d_min) {
    if (a.n != b.n || a.steps() != b.steps()) {
        throw std::invalid_argument("particle sets must have equal particle and step counts");
    }
    const simd::KernelTable& kernels = simd::active_kernels();
    std::vector<DistanceStats> out;
    out.reserve(a.steps());
    std::vector<double> sq(a.n);
    for (std::size_t k = 0; k < a.steps(); ++k) {
        kernels.squared_distances(a.x[k].data(), a.y[k].data(), a.z[k].data(), b.x[k].data(), b.y[k].data(),
                                  b.z[k].data(), sq.data(), a.n);
        DistanceStats st;
        st.violation_fraction =
            static_cast<double>(kernels.count_below(sq.data(), a.n, d_min * d_min)) / static_cast<double>(a.n);
        std::vector<double> dist(a.n);
        std::transform(sq.begin(), sq.end(), dist.begin(), [](double v) { return std::sqrt(v); });
        std::sort(dist.begin(), dist.end());
        auto q = [&dist](double p) {
            const double h = p * static_cast<double>(dist.size() - 1);
            const std::size_t lo = static_cast<std::size_t>(std::floor(h));
            const std::size_t hi = std::min(lo + 1, dist.size() - 1);
            return dist[lo] + (h - static_cast<double>(lo)) * (dist[hi] - dist[lo]);
        };
        st.min = dist.front();
        st.q01 = q(0.01);
        st.q25 = q(0.25);
        st.q50 = q(0.50);
        st.q75 = q(0.75);
        st.q99 = q(0.99);
        out.push_back(st);
    }
    return out;
}

}  // namespace ngmpc
