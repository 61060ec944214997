#include "ngmpc/moment_dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "ngmpc/simd.hpp"

namespace ngmpc {
namespace {

constexpr int kAtomPowerCap = kMaxMomentDegree + 2;
constexpr std::size_t kMaxAtomMonomials = 128;

std::uint32_t pack_powers(const ControlAtomPowers& p) {
    return (static_cast<std::uint32_t>(p[0]) << 24) | (static_cast<std::uint32_t>(p[1]) << 16) |
           (static_cast<std::uint32_t>(p[2]) << 8) | static_cast<std::uint32_t>(p[3]);
}

// Powers 0..kAtomPowerCap-1 of each control atom at a concrete control.
struct AtomPowers {
    std::array<std::array<double, kAtomPowerCap>, 4> pw;

    AtomPowers(const Control& u, double ds) {
        const double base[4] = {ds * u.v, ds * u.z, std::cos(ds * u.psi), std::sin(ds * u.psi)};
        for (int a = 0; a < 4; ++a) {
            pw[a][0] = 1.0;
            for (int e = 1; e < kAtomPowerCap; ++e) pw[a][e] = pw[a][e - 1] * base[a];
        }
    }
};

}  // namespace

const TrigMomentTable& ChannelTables::operator[](NoiseChannel c) const {
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

ChannelTables build_channel_tables(const NoiseModel& noise, double delta_s, int max_total_power) {
    noise.validate();
    if (!(delta_s > 0.0)) throw ConfigurationError("sampling interval must be positive");
    return ChannelTables{build_moment_table(noise.speed, delta_s, max_total_power),
                         build_moment_table(noise.climb, delta_s, max_total_power),
                         build_moment_table(noise.heading, delta_s, max_total_power)};
}

double StepTransition::coefficient(std::size_t row, std::size_t col) const {
    if (col == kConstantIndex) return offset[row];
    for (std::uint32_t e = row_ptr[row]; e < row_ptr[row + 1]; ++e) {
        if (cols[e] == col) return values[e];
    }
    return 0.0;
}

TransitionModel::TransitionModel(const SymbolicExpansion& expansion, const ChannelTables& tables)
    : delta_s_(tables.speed.delta()) {
    if (tables.climb.delta() != delta_s_ || tables.heading.delta() != delta_s_) {
        throw ConfigurationError("moment tables must share the sampling interval as their scale factor");
    }
    if (expansion.size() != kBasisSize) throw ConfigurationError("expansion does not match the moment basis");

    row_ptr_.assign(kBasisSize + 1, 0);
    for (std::size_t row = 0; row < kBasisSize; ++row) {
        // (source, packed control powers) -> coefficient with disturbance moments folded in.
        std::map<std::pair<std::size_t, std::uint32_t>, std::pair<ControlAtomPowers, double>> merged;
        for (const ExpansionTerm& term : expansion.terms(row)) {
            double coef = term.coefficient;
            for (int ch = 0; ch < 3; ++ch) {
                const auto& k = term.noise[ch];
                if (k[0] == 0 && k[1] == 0 && k[2] == 0) continue;
                const TrigMomentTable& table = tables[static_cast<NoiseChannel>(ch)];
                if (!table.contains(k[0], k[1], k[2])) {
                    std::ostringstream os;
                    os << "moment table for " << table.spec().describe() << " lacks entry (" << k[0] << ","
                       << k[1] << "," << k[2] << ") needed by row " << MomentBasis::instance().monomial(row).label()
                       << "; table cap " << table.max_total_power() << " is too low";
                    throw ConfigurationError(os.str());
                }
                coef *= table.at(k[0], k[1], k[2]);
            }
            auto& slot = merged[{term.source, pack_powers(term.control)}];
            slot.first = term.control;
            slot.second += coef;
        }
        if (row != kConstantIndex) {
            std::size_t last_source = kBasisSize;
            for (const auto& [key, val] : merged) {
                if (key.first != last_source) {
                    cols_.push_back(static_cast<std::uint32_t>(key.first));
                    term_begin_.push_back(static_cast<std::uint32_t>(terms_.size()));
                    last_source = key.first;
                }
                const auto it = std::find(monomials_.begin(), monomials_.end(), val.first);
                const auto mono = static_cast<std::uint32_t>(it - monomials_.begin());
                if (it == monomials_.end()) monomials_.push_back(val.first);
                terms_.push_back({val.second, mono});
            }
        }
        row_ptr_[row + 1] = static_cast<std::uint32_t>(cols_.size());
    }
    term_begin_.push_back(static_cast<std::uint32_t>(terms_.size()));

    if (monomials_.size() > kMaxAtomMonomials) throw std::logic_error("too many distinct control-atom products");

    out_row_ptr_.assign(kBasisSize + 1, 0);
    for (std::size_t row = 0; row < kBasisSize; ++row) {
        for (std::uint32_t e = row_ptr_[row]; e < row_ptr_[row + 1]; ++e) {
            if (cols_[e] == kConstantIndex) {
                slot_.push_back(~static_cast<std::int64_t>(row));
            } else {
                slot_.push_back(static_cast<std::int64_t>(out_cols_.size()));
                out_cols_.push_back(cols_[e]);
            }
        }
        out_row_ptr_[row + 1] = static_cast<std::uint32_t>(out_cols_.size());
    }
}

void TransitionModel::transition(const Control& u, bool with_derivatives, StepTransition& out) const {
    const AtomPowers ap(u, delta_s_);
    const auto& pw = ap.pw;
    const double ds = delta_s_;

    // Value and control derivatives of every distinct atom product.
    const std::size_t nm = monomials_.size();
    double mono[4][kMaxAtomMonomials];
    for (std::size_t i = 0; i < nm; ++i) {
        const int a = monomials_[i][kSpeedAtom];
        const int b = monomials_[i][kClimbAtom];
        const int c = monomials_[i][kCosTurnAtom];
        const int s = monomials_[i][kSinTurnAtom];
        const double trig = pw[kCosTurnAtom][c] * pw[kSinTurnAtom][s];
        const double lin = pw[kSpeedAtom][a] * pw[kClimbAtom][b];
        mono[0][i] = lin * trig;
        if (!with_derivatives) continue;
        mono[1][i] = a > 0 ? a * ds * pw[kSpeedAtom][a - 1] * pw[kClimbAtom][b] * trig : 0.0;
        mono[2][i] = b > 0 ? b * ds * pw[kSpeedAtom][a] * pw[kClimbAtom][b - 1] * trig : 0.0;
        double dtrig = 0.0;
        if (s > 0) dtrig += s * pw[kCosTurnAtom][c + 1] * pw[kSinTurnAtom][s - 1];
        if (c > 0) dtrig -= c * pw[kCosTurnAtom][c - 1] * pw[kSinTurnAtom][s + 1];
        mono[3][i] = lin * ds * dtrig;
    }

    if (out.cols.size() != out_cols_.size() || out.row_ptr.size() != out_row_ptr_.size()) {
        out.row_ptr = out_row_ptr_;
        out.cols = out_cols_;
    }
    out.values.resize(out_cols_.size());
    out.offset.fill(0.0);
    out.offset[kConstantIndex] = 1.0;
    out.has_derivatives = with_derivatives;
    for (int j = 0; j < 3; ++j) {
        out.d_values[j].assign(with_derivatives ? out_cols_.size() : 0, 0.0);
        out.d_offset[j].fill(0.0);
    }

    const std::size_t entries = cols_.size();
    for (std::size_t e = 0; e < entries; ++e) {
        double val = 0.0, dv = 0.0, dz = 0.0, dpsi = 0.0;
        if (with_derivatives) {
            for (std::uint32_t t = term_begin_[e]; t < term_begin_[e + 1]; ++t) {
                const double k = terms_[t].coefficient;
                const std::uint32_t m = terms_[t].monomial;
                val += k * mono[0][m];
                dv += k * mono[1][m];
                dz += k * mono[2][m];
                dpsi += k * mono[3][m];
            }
        } else {
            for (std::uint32_t t = term_begin_[e]; t < term_begin_[e + 1]; ++t) {
                val += terms_[t].coefficient * mono[0][terms_[t].monomial];
            }
        }
        const std::int64_t slot = slot_[e];
        if (slot < 0) {
            const std::size_t row = static_cast<std::size_t>(~slot);
            out.offset[row] = val;
            if (with_derivatives) {
                out.d_offset[0][row] = dv;
                out.d_offset[1][row] = dz;
                out.d_offset[2][row] = dpsi;
            }
        } else {
            out.values[slot] = val;
            if (with_derivatives) {
                out.d_values[0][slot] = dv;
                out.d_values[1][slot] = dz;
                out.d_values[2][slot] = dpsi;
            }
        }
    }
}

StepTransition TransitionModel::transition(const Control& u, bool with_derivatives) const {
    StepTransition out;
    transition(u, with_derivatives, out);
    return out;
}

StepTransition build_transition(const Control& u, const ChannelTables& tables, const SymbolicExpansion& expansion) {
    return TransitionModel(expansion, tables).transition(u, false);
}

MomentVector propagate(const MomentVector& m, const StepTransition& t) {
    MomentVector out;
    out.time_step = m.time_step + 1;
    for (std::size_t row = 0; row < kBasisSize; ++row) {
        double acc = t.offset[row];
        for (std::uint32_t e = t.row_ptr[row]; e < t.row_ptr[row + 1]; ++e) acc += t.values[e] * m.values[t.cols[e]];
        out.values[row] = acc;
    }
    return out;
}

MomentVector moments_from_point_state(double x, double y, double z, double psi) {
    const std::array<double, 5> point = {x, y, z, std::cos(psi), std::sin(psi)};
    MomentVector m;
    const MomentBasis& basis = MomentBasis::instance();
    for (std::size_t i = 0; i < basis.size(); ++i) {
        double value = 1.0;
        const auto& exps = basis.monomial(i).exponents;
        for (int v = 0; v < 5; ++v) {
            for (int e = 0; e < exps[v]; ++e) value *= point[v];
        }
        m.values[i] = value;
    }
    return m;
}

void rollout_moments(const TransitionModel& model, const MomentVector& start, std::span<const Control> controls,
                     bool with_jacobian, MomentRollout& out) {
    const std::size_t steps = controls.size();
    const std::size_t ncols = 3 * steps;
    out.moments.resize(steps + 1);
    out.moments[0] = start;
    out.n_columns = ncols;
    if (with_jacobian) {
        out.jacobians.resize(steps + 1);
        for (auto& j : out.jacobians) j.assign(kBasisSize * ncols, 0.0);
    } else {
        out.jacobians.clear();
    }
    const simd::KernelTable& kernels = simd::active_kernels();

    StepTransition t;
    for (std::size_t k = 1; k <= steps; ++k) {
        model.transition(controls[k - 1], with_jacobian, t);
        const MomentVector& prev = out.moments[k - 1];
        out.moments[k] = propagate(prev, t);
        if (!with_jacobian) continue;

        // J_k = A J_{k-1} on the columns of earlier controls, plus the direct
        // dependence on u_{k-1}.
        const std::size_t active = 3 * (k - 1);
        const std::vector<double>& jprev = out.jacobians[k - 1];
        std::vector<double>& jcur = out.jacobians[k];
        for (std::size_t row = 1; row < kBasisSize; ++row) {
            double* dst = jcur.data() + row * ncols;
            double direct[3] = {t.d_offset[0][row], t.d_offset[1][row], t.d_offset[2][row]};
            for (std::uint32_t e = t.row_ptr[row]; e < t.row_ptr[row + 1]; ++e) {
                const std::uint32_t col = t.cols[e];
                if (active > 0) kernels.axpy(t.values[e], jprev.data() + col * ncols, dst, active);
                const double mc = prev.values[col];
                direct[0] += t.d_values[0][e] * mc;
                direct[1] += t.d_values[1][e] * mc;
                direct[2] += t.d_values[2][e] * mc;
            }
            dst[active] = direct[0];
            dst[active + 1] = direct[1];
            dst[active + 2] = direct[2];
        }
    }
}

MomentRollout rollout_moments(const TransitionModel& model, const MomentVector& start, std::span<const Control> controls,
                              bool with_jacobian) {
    MomentRollout out;
    rollout_moments(model, start, controls, with_jacobian, out);
    return out;
}

}  // namespace ngmpc
