#pragma once

// Smooth inequality-constrained NLP solver: PHR augmented Lagrangian over
// all inequality rows with a projected quasi-Newton inner minimizer on the box.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "ngmpc/errors.hpp"

namespace ngmpc {

using Vector = std::vector<double>;

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

// lower <= sum coef * x[index] <= upper; either side may be infinite.
struct LinearConstraint {
    std::vector<std::pair<std::size_t, double>> terms;
    double lower = -kInfinity;
    double upper = kInfinity;
};

// Objective, constraint values and (optionally) their derivatives in one pass.
// jacobian is row-major, constraint_count x dimension.
struct Evaluation {
    double objective = 0.0;
    Vector gradient;
    Vector constraints;
    Vector jacobian;
};

using ScalarFunction = std::function<double(std::span<const double>)>;
using GradientFunction = std::function<void(std::span<const double>, std::span<double>)>;
using FusedEvaluator = std::function<void(std::span<const double> x, bool with_derivatives, Evaluation& out)>;

struct NlpProblem {
    std::size_t dimension = 0;
    ScalarFunction objective;
    GradientFunction objective_gradient;  // optional
    std::vector<ScalarFunction> inequality_constraints;  // g_i(x) <= 0
    std::vector<LinearConstraint> linear_constraints;
    Vector lower;
    Vector upper;

    // When set, replaces objective/objective_gradient and contributes
    // fused_constraint_count rows ahead of inequality_constraints.
    FusedEvaluator fused;
    std::size_t fused_constraint_count = 0;

    std::size_t nonlinear_constraint_count() const { return fused_constraint_count + inequality_constraints.size(); }
    // Throws std::invalid_argument on inconsistent sizes or unordered bounds.
    void validate() const;
};

struct SolverOptions {
    double feasibility_tolerance = 1e-6;
    double kkt_tolerance = 1e-6;
    int max_outer_iterations = 50;
    int max_inner_iterations = 500;
    double initial_penalty = 10.0;
    double max_penalty = 1e8;
};

struct SolveReport {
    Vector solution;
    double objective_value = kInfinity;
    double max_constraint_violation = kInfinity;
    bool converged = false;
    int iterations = 0;  // inner iterations summed over outer loops
    int outer_iterations = 0;
    double kkt_residual = kInfinity;
    double wall_time = 0.0;  // seconds
    std::size_t evaluations = 0;
    std::size_t start_index = 0;
    std::string message;
};

// Non-finite objective or constraint value at a probe point.
class SolverFailure : public NumericalFailure {
public:
    SolverFailure(const std::string& what, Vector point) : NumericalFailure(what), point_(std::move(point)) {}
    const Vector& point() const { return point_; }

private:
    Vector point_;
};

// Largest violation over nonlinear rows, linear rows and the box.
double max_violation(const NlpProblem& p, std::span<const double> x);

SolveReport solve(const NlpProblem& p, std::span<const double> start, const SolverOptions& opts = {});

struct MultiStartReport {
    SolveReport best;
    std::vector<SolveReport> runs;  // in start order; failed starts carry their message
};

// Solves from each start in order, then from extra_random_starts points drawn
// uniformly in the box from seed. Best feasible objective wins with ties to
// the lowest index; without a feasible run the least violation is returned
// with converged = false.
MultiStartReport multi_start_solve(const NlpProblem& p, const std::vector<Vector>& starts, std::uint64_t seed,
                                   const SolverOptions& opts = {}, std::size_t extra_random_starts = 0);

}  // namespace ngmpc
