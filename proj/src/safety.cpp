#include "ngmpc/safety.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>

namespace ngmpc {
namespace {

// Exponents of (xA, yA, zA, xB, yB, zB, d^2).
using Exps = std::array<int, 7>;
using Poly = std::map<Exps, double>;

Poly clearance_polynomial() {
    Poly f;
    for (int q = 0; q < 3; ++q) {
        Exps a{}, b{}, ab{};
        a[q] = 2;
        b[q + 3] = 2;
        ab[q] = 1;
        ab[q + 3] = 1;
        f[a] += 1.0;
        f[b] += 1.0;
        f[ab] -= 2.0;
    }
    Exps d{};
    d[6] = 1;
    f[d] -= 1.0;
    return f;
}

Poly square(const Poly& p) {
    Poly out;
    for (const auto& [ea, ca] : p) {
        for (const auto& [eb, cb] : p) {
            Exps e;
            for (int i = 0; i < 7; ++i) e[i] = ea[i] + eb[i];
            out[e] += ca * cb;
        }
    }
    std::erase_if(out, [](const auto& kv) { return kv.second == 0.0; });
    return out;
}

std::vector<ClearanceTerm> terms_of(const Poly& p) {
    const MomentBasis& basis = MomentBasis::instance();
    std::vector<ClearanceTerm> out;
    for (const auto& [e, c] : p) {
        out.push_back({basis.index_of(e[0], e[1], e[2], 0, 0), basis.index_of(e[3], e[4], e[5], 0, 0), c, e[6]});
    }
    return out;
}

const std::vector<ClearanceTerm>& clearance_linear_terms() {
    static const std::vector<ClearanceTerm> terms = terms_of(clearance_polynomial());
    return terms;
}

double evaluate_terms(const std::vector<ClearanceTerm>& terms, const MomentVector& a, const MomentVector& b,
                      double d_min) {
    const double d2 = d_min * d_min;
    double acc = 0.0;
    for (const ClearanceTerm& t : terms) {
        acc += t.coefficient * std::pow(d2, t.d_power) * a.values[t.index_a] * b.values[t.index_b];
    }
    return acc;
}

AffineMomentForm affine_form(const std::vector<ClearanceTerm>& terms, const MomentVector& other, double d_min) {
    const double d2 = d_min * d_min;
    std::map<std::size_t, double> coef;
    for (const ClearanceTerm& t : terms) {
        coef[t.index_a] += t.coefficient * std::pow(d2, t.d_power) * other.values[t.index_b];
    }
    AffineMomentForm form;
    for (const auto& [idx, c] : coef) {
        if (idx == kConstantIndex) {
            form.constant += c;
        } else {
            form.indices.push_back(idx);
            form.coefficients.push_back(c);
        }
    }
    return form;
}

}  // namespace

const std::vector<ClearanceTerm>& clearance_square_terms() {
    static const std::vector<ClearanceTerm> terms = terms_of(square(clearance_polynomial()));
    return terms;
}

double expected_f(const MomentVector& a, const MomentVector& b, double d_min) {
    double acc = -d_min * d_min;
    for (std::size_t q = 0; q < 3; ++q) {
        const std::size_t lin = 1 + q;
        const std::size_t sq = MomentBasis::instance().index_of(q == 0 ? 2 : 0, q == 1 ? 2 : 0, q == 2 ? 2 : 0, 0, 0);
        acc += a.values[sq] - 2.0 * a.values[lin] * b.values[lin] + b.values[sq];
    }
    return acc;
}

double expected_f_squared(const MomentVector& a, const MomentVector& b, double d_min) {
    return evaluate_terms(clearance_square_terms(), a, b, d_min);
}

ClearanceMoments clearance_moments(const MomentVector& a, const MomentVector& b, double d_min) {
    ClearanceMoments c;
    c.e_f = expected_f(a, b, d_min);
    c.e_f2 = expected_f_squared(a, b, d_min);
    c.time_step = a.time_step;
    return c;
}

SafetyEvalResult vp_bound(const ClearanceMoments& c) {
    SafetyEvalResult r;
    const double mean_sq = c.e_f * c.e_f;
    r.condition_mean_nonneg = c.e_f >= 0.0;
    r.condition_moment_ratio = mean_sq >= 0.625 * c.e_f2;
    if (mean_sq < 1e-12) {
        r.bound = std::numeric_limits<double>::infinity();
        r.applicable = false;
        return r;
    }
    r.bound = std::max(0.0, 4.0 * (c.e_f2 - mean_sq) / (9.0 * mean_sq));
    r.applicable = r.condition_mean_nonneg && r.condition_moment_ratio;
    return r;
}

SafetyEvalResult evaluate_pair(const MomentVector& a, const MomentVector& b, double d_min) {
    return vp_bound(clearance_moments(a, b, d_min));
}

double AffineMomentForm::evaluate(const MomentVector& m) const {
    double acc = constant;
    for (std::size_t i = 0; i < indices.size(); ++i) acc += coefficients[i] * m.values[indices[i]];
    return acc;
}

ClearanceForms clearance_forms(const MomentVector& other, double d_min) {
    return {affine_form(clearance_linear_terms(), other, d_min), affine_form(clearance_square_terms(), other, d_min)};
}

}  // namespace ngmpc
