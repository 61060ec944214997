#pragma once

// Ground-truth dynamics, disturbance sampling and particle statistics.

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "ngmpc/control.hpp"
#include "ngmpc/noise_moments.hpp"

namespace ngmpc {

struct TrueState {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
    double psi = 0.0;

    Position position() const { return {x, y, z}; }
    bool operator==(const TrueState&) const = default;
};

// Same state with the heading carried as (cos psi, sin psi).
struct AugmentedState {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
    double c = 1.0;
    double s = 0.0;
};

struct NoiseSample {
    double v = 0.0;
    double z = 0.0;
    double psi = 0.0;
};

TrueState step_truth(const TrueState& state, const Control& u, const NoiseSample& w, double delta_s);
AugmentedState step_augmented(const AugmentedState& state, const Control& u, const NoiseSample& w, double delta_s);
AugmentedState augment(const TrueState& state);

// SplitMix64: a 64-bit generator with O(1) seeding, used for the many
// short per-particle streams. Satisfies UniformRandomBitGenerator.
class SplitMix64 {
public:
    using result_type = std::uint64_t;

    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
    result_type operator()();

private:
    std::uint64_t state_;
};

// Seed split function: hashes (master, a, b, c) into an independent stream
// seed by chained SplitMix64 finalisation. Streams are keyed by
// (purpose, agent, channel, particle) throughout the library.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0);

enum class StreamPurpose : std::uint64_t { truth = 1, particles = 2, oracle = 3, planner = 4 };

double sample(const NoiseSpec& spec, SplitMix64& rng);

// One independent engine per channel.
class NoiseStreams {
public:
    NoiseStreams(std::uint64_t master, StreamPurpose purpose, std::uint64_t agent, std::uint64_t particle = 0);

    SplitMix64& operator[](NoiseChannel c) { return engines_[static_cast<int>(c)]; }

private:
    std::array<SplitMix64, 3> engines_;
};

NoiseSample sample_noise(const NoiseModel& noise, NoiseStreams& streams);

// Particle positions per step (index 0 is the start), structure of arrays.
struct ParticleSet {
    std::size_t n = 0;
    std::vector<std::vector<double>> x, y, z;  // [step][particle]
    std::uint64_t seed = 0;
    std::vector<Control> controls;

    std::size_t steps() const { return x.size(); }
};

// n independent rollouts of step_truth over the controls. The stream for
// particle i of agent `agent` depends only on (seed, agent, i).
ParticleSet mc_rollout(const TrueState& start, std::span<const Control> controls, const NoiseModel& noise,
                       double delta_s, std::size_t n, std::uint64_t seed, std::uint64_t agent = 0);

struct DistanceStats {
    double min = 0.0;
    double q01 = 0.0;
    double q25 = 0.0;
    double q50 = 0.0;
    double q75 = 0.0;
    double q99 = 0.0;
    double violation_fraction = 0.0;
};

// Per step, Euclidean distances between particles paired by index.
// Throws std::invalid_argument on mismatched shapes.
std::vector<DistanceStats> pairwise_distance_stats(const ParticleSet& a, const ParticleSet& b, double d_min);

// Linear-interpolation quantile (type 7) of unsorted data.
double quantile(std::vector<double> values, double prob);

}  // namespace ngmpc
