#pragma once

// Pairwise clearance f = |p_A - p_B|^2 - d_min^2 between two independent
// agents, its first two moments from the agents' moment vectors, and the
// one-sided Vysochanskij-Petunin bound on P(f <= 0).

#include <cstddef>
#include <utility>
#include <vector>

#include "ngmpc/moment_basis.hpp"

namespace ngmpc {

struct ClearanceMoments {
    double e_f = 0.0;
    double e_f2 = 0.0;
    std::pair<int, int> pair{0, 0};
    int time_step = 0;
};

struct SafetyEvalResult {
    double bound = 0.0;
    bool condition_mean_nonneg = false;
    bool condition_moment_ratio = false;
    bool applicable = false;

    bool satisfies(double epsilon, double tol = 0.0) const { return applicable && bound <= epsilon + tol; }
};

double expected_f(const MomentVector& a, const MomentVector& b, double d_min);
double expected_f_squared(const MomentVector& a, const MomentVector& b, double d_min);
ClearanceMoments clearance_moments(const MomentVector& a, const MomentVector& b, double d_min);

SafetyEvalResult vp_bound(const ClearanceMoments& c);
SafetyEvalResult evaluate_pair(const MomentVector& a, const MomentVector& b, double d_min);

// One term of E[f^2] = sum coef * d_min^(2*dpow) * E[m_A] * E[m_B].
struct ClearanceTerm {
    std::size_t index_a;
    std::size_t index_b;
    double coefficient;
    int d_power;
};

// Generated once by symbolic squaring; cached.
const std::vector<ClearanceTerm>& clearance_square_terms();

// With agent B's moments fixed, E[f] and E[f^2] are affine in agent A's
// moment vector: value = constant + sum_j coef_j * m_A[index_j].
struct AffineMomentForm {
    double constant = 0.0;
    std::vector<std::size_t> indices;
    std::vector<double> coefficients;

    double evaluate(const MomentVector& m) const;
};

struct ClearanceForms {
    AffineMomentForm e_f;
    AffineMomentForm e_f2;
};

ClearanceForms clearance_forms(const MomentVector& other, double d_min);

}  // namespace ngmpc
