#pragma once

// Exact moment propagation for the unicycle-with-climb model
//
//   x' = x + ds (u_v + w_v) cos(psi)      y' = y + ds (u_v + w_v) sin(psi)
//   z' = z + ds (u_z + w_z)               psi' = psi + ds (u_psi + w_psi)
//
// rewritten over (x, y, z, cos psi, sin psi). Every basis monomial at step k
// is an affine function of the basis at step k-1 whose coefficients are
// polynomials in the control atoms and mixed trigonometric moments of the
// independent disturbances.

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "ngmpc/control.hpp"
#include "ngmpc/moment_basis.hpp"
#include "ngmpc/noise_moments.hpp"

namespace ngmpc {

// Exponents of (ds*u_v, ds*u_z, cos(ds*u_psi), sin(ds*u_psi)).
using ControlAtomPowers = std::array<std::uint8_t, 4>;

enum ControlAtom : int { kSpeedAtom = 0, kClimbAtom = 1, kCosTurnAtom = 2, kSinTurnAtom = 3 };

struct ExpansionTerm {
    std::size_t source = kConstantIndex;  // basis index at k-1
    double coefficient = 0.0;             // integer-valued combinatorial factor
    ControlAtomPowers control{};
    // Mixed trigonometric key (p, q, r) per channel, indexed by NoiseChannel.
    std::array<TrigPowers, 3> noise{};
};

class SymbolicExpansion {
public:
    explicit SymbolicExpansion(std::vector<std::vector<ExpansionTerm>> rows) : rows_(std::move(rows)) {}

    std::size_t size() const { return rows_.size(); }
    const std::vector<ExpansionTerm>& terms(std::size_t target) const { return rows_.at(target); }
    std::size_t term_count() const;

private:
    std::vector<std::vector<ExpansionTerm>> rows_;
};

// Expands every basis monomial through one step of the dynamics. Computed
// once; the result is deterministic.
SymbolicExpansion build_expansion(int max_degree = kMaxMomentDegree);
const SymbolicExpansion& default_expansion();

// Per-channel tables, all built with delta equal to the sampling interval.
struct ChannelTables {
    TrigMomentTable speed;
    TrigMomentTable climb;
    TrigMomentTable heading;

    const TrigMomentTable& operator[](NoiseChannel c) const;
};

ChannelTables build_channel_tables(const NoiseModel& noise, double delta_s, int max_total_power = 4);

// Sparse affine map m_k = A m_{k-1} + b. Columns never include the constant
// monomial; its contribution lives in the offset. Optional derivative arrays
// share the sparsity pattern and hold d/du_v, d/du_z, d/du_psi.
struct StepTransition {
    std::vector<std::uint32_t> row_ptr;  // kBasisSize + 1
    std::vector<std::uint32_t> cols;
    std::vector<double> values;
    std::array<double, kBasisSize> offset{};
    bool has_derivatives = false;
    std::array<std::vector<double>, 3> d_values;
    std::array<std::array<double, kBasisSize>, 3> d_offset{};

    // Dense lookup (0 when structurally absent); column 0 returns the offset.
    double coefficient(std::size_t row, std::size_t col) const;
};

// Expansion with the disturbance moments folded in; only the control
// dependence is left symbolic.
class TransitionModel {
public:
    TransitionModel(const SymbolicExpansion& expansion, const ChannelTables& tables);

    double delta_s() const { return delta_s_; }
    std::size_t nonzeros() const { return cols_.size(); }

    StepTransition transition(const Control& u, bool with_derivatives = false) const;
    void transition(const Control& u, bool with_derivatives, StepTransition& out) const;

private:
    struct CompiledTerm {
        double coefficient;
        std::uint32_t monomial;  // into monomials_
    };

    double delta_s_;
    std::vector<std::uint32_t> row_ptr_;      // into entries, kBasisSize + 1
    std::vector<std::uint32_t> cols_;         // per entry; 0 marks the offset
    std::vector<std::uint32_t> term_begin_;   // per entry + 1
    std::vector<CompiledTerm> terms_;
    std::vector<ControlAtomPowers> monomials_;  // distinct control-atom products
    // Output sparsity without the constant column; per entry, the slot in
    // values or ~row for offsets.
    std::vector<std::uint32_t> out_row_ptr_;
    std::vector<std::uint32_t> out_cols_;
    std::vector<std::int64_t> slot_;
};

StepTransition build_transition(const Control& u, const ChannelTables& tables,
                                const SymbolicExpansion& expansion);

MomentVector propagate(const MomentVector& m, const StepTransition& t);

// Moments of a deterministic state: every entry is the literal monomial value.
MomentVector moments_from_point_state(double x, double y, double z, double psi);

// Moment trajectory m_0..m_T under a control sequence, optionally with the
// dense Jacobians dm_k/du (kBasisSize x 3T, row-major, control-major columns
// u_0.v, u_0.z, u_0.psi, u_1.v, ...).
struct MomentRollout {
    std::vector<MomentVector> moments;
    std::vector<std::vector<double>> jacobians;
    std::size_t n_columns = 0;

    double jacobian(std::size_t step, std::size_t row, std::size_t col) const {
        return jacobians[step][row * n_columns + col];
    }
    const double* jacobian_row(std::size_t step, std::size_t row) const {
        return jacobians[step].data() + row * n_columns;
    }
};

void rollout_moments(const TransitionModel& model, const MomentVector& start,
                     std::span<const Control> controls, bool with_jacobian, MomentRollout& out);
MomentRollout rollout_moments(const TransitionModel& model, const MomentVector& start,
                              std::span<const Control> controls, bool with_jacobian = false);

// Monte Carlo estimate of the basis moments after each control, by sampling
// the original (x, y, z, psi) dynamics.
struct MomentEstimate {
    std::vector<MomentVector> mean;            // steps 1..K
    std::vector<MomentVector> standard_error;  // per entry
    std::size_t samples = 0;
};

struct TrueState;
MomentEstimate mc_moment_oracle(const TrueState& start, std::span<const Control> controls,
                                const NoiseModel& noise, double delta_s, std::size_t n_samples,
                                std::uint64_t seed);

}  // namespace ngmpc
