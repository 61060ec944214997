#include <cmath>
#include <stdexcept>
#include <vector>

#include "ngmpc/moment_dynamics.hpp"
#include "ngmpc/simd.hpp"
#include "ngmpc/simulator.hpp"

namespace ngmpc {
namespace {

constexpr std::size_t kChunk = 4096;

}  // namespace

MomentEstimate mc_moment_oracle(const TrueState& start, std::span<const Control> controls, const NoiseModel& noise,
                                double delta_s, std::size_t n_samples, std::uint64_t seed) {
    if (n_samples < 2) throw std::invalid_argument("moment oracle needs at least two samples");
    const std::size_t steps = controls.size();
    const MomentBasis& basis = MomentBasis::instance();
    const simd::KernelTable& kernels = simd::active_kernels();

    std::vector<std::array<double, kBasisSize>> sum(steps), sum_sq(steps);
    for (auto& a : sum) a.fill(0.0);
    for (auto& a : sum_sq) a.fill(0.0);

    std::vector<double> px(kChunk), py(kChunk), pz(kChunk), ppsi(kChunk);
    // pw[v][e] holds the e-th power of state variable v for the chunk.
    std::array<std::array<std::vector<double>, kMaxMomentDegree + 1>, 5> pw;
    for (auto& var : pw)
        for (auto& e : var) e.resize(kChunk);
    std::vector<NoiseStreams> streams;
    streams.reserve(kChunk);

    for (std::size_t begin = 0; begin < n_samples; begin += kChunk) {
        const std::size_t n = std::min(kChunk, n_samples - begin);
        streams.clear();
        for (std::size_t i = 0; i < n; ++i) {
            streams.emplace_back(seed, StreamPurpose::oracle, 0, begin + i);
            px[i] = start.x;
            py[i] = start.y;
            pz[i] = start.z;
            ppsi[i] = start.psi;
        }
        for (std::size_t k = 0; k < steps; ++k) {
            for (std::size_t i = 0; i < n; ++i) {
                const TrueState s = step_truth({px[i], py[i], pz[i], ppsi[i]}, controls[k],
                                               sample_noise(noise, streams[i]), delta_s);
                px[i] = s.x;
                py[i] = s.y;
                pz[i] = s.z;
                ppsi[i] = s.psi;
                pw[kX][1][i] = s.x;
                pw[kY][1][i] = s.y;
                pw[kZ][1][i] = s.z;
                pw[kCos][1][i] = std::cos(s.psi);
                pw[kSin][1][i] = std::sin(s.psi);
            }
            for (int v = 0; v < 5; ++v) {
                for (int e = 2; e <= kMaxMomentDegree; ++e) {
                    for (std::size_t i = 0; i < n; ++i) pw[v][e][i] = pw[v][e - 1][i] * pw[v][1][i];
                }
            }
            for (std::size_t m = 1; m < kBasisSize; ++m) {
                const auto& exps = basis.monomial(m).exponents;
                const double* factors[5];
                std::size_t nf = 0;
                for (int v = 0; v < 5; ++v) {
                    if (exps[v] > 0) factors[nf++] = pw[v][exps[v]].data();
                }
                double s = 0.0;
                double s2 = 0.0;
                kernels.product_moments(factors, nf, n, &s, &s2);
                sum[k][m] += s;
                sum_sq[k][m] += s2;
            }
        }
    }

    MomentEstimate est;
    est.samples = n_samples;
    est.mean.resize(steps);
    est.standard_error.resize(steps);
    const double nn = static_cast<double>(n_samples);
    for (std::size_t k = 0; k < steps; ++k) {
        MomentVector& mean = est.mean[k];
        MomentVector& se = est.standard_error[k];
        mean.time_step = se.time_step = static_cast<int>(k + 1);
        mean.values[kConstantIndex] = 1.0;
        se.values[kConstantIndex] = 0.0;
        for (std::size_t m = 1; m < kBasisSize; ++m) {
            const double mu = sum[k][m] / nn;
            const double var = std::max(0.0, (sum_sq[k][m] - nn * mu * mu) / (nn - 1.0));
            mean.values[m] = mu;
            se.values[m] = std::sqrt(var / nn);
        }
    }
    return est;
}

}  // namespace ngmpc
