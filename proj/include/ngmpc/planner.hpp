#pragma once

// Single-agent receding-horizon problem: reach the destination in
// expectation with smooth controls while keeping the one-sided
// Vysochanskij-Petunin bound on each pairwise clearance below epsilon.

#include <cstdint>
#include <optional>
#include <vector>

#include "ngmpc/control.hpp"
#include "ngmpc/moment_dynamics.hpp"
#include "ngmpc/nlp.hpp"
#include "ngmpc/simulator.hpp"

namespace ngmpc {

struct ControlBounds {
    double v_min = 0.0;
    double v_max = 10.0;
    double z_min = -10.0;
    double z_max = 10.0;
    double psi_min = -3.14159265358979323846;
    double psi_max = 3.14159265358979323846;

    bool operator==(const ControlBounds&) const = default;
};

struct PlannerParams {
    int horizon = 10;
    double delta_s = 0.1;
    double w = 0.1;
    double d_min = 10.0;
    double epsilon = 0.1;
    ControlBounds bounds;
    double dv_max = 1.0;
    double dz_max = 1.0;
    Control previous_control;  // anchor of the first rate constraint
    SolverOptions solver;

    // Throws ConfigurationError.
    void validate() const;
};

struct PlanMetadata {
    bool fallback = false;
    bool feasible = false;  // solver found a feasible point and it passed verification
    double objective = 0.0;
    double max_violation = 0.0;
    double worst_bound = 0.0;  // largest VP bound over steps and other agents
    int iterations = 0;
    int starts_tried = 0;
    int winning_start = -1;
    double wall_time = 0.0;
    std::string note;
};

struct HorizonPlan {
    int owner = 0;
    int planned_at = 0;
    std::vector<Control> controls;       // T
    std::vector<Control> slacks;         // T, component-wise |u| at the optimum
    std::vector<MomentVector> moments;   // T + 1; moments[0] is the exact current state
    PlanMetadata meta;

    int horizon() const { return static_cast<int>(controls.size()); }
};

// Another agent's predicted moments over this agent's upcoming horizon:
// moments[j] is aligned with this agent's step j + 1.
struct AlignedPlan {
    int owner = 0;
    int planned_at = 0;
    std::vector<MomentVector> moments;
};

// Drops the consumed step of a plan made `age` steps ago and holds the last
// predicted moment to fill the horizon.
AlignedPlan align_plan(const HorizonPlan& plan, int age);

// Decision layout: 3T positive parts (v, z, psi per step) then 3T negative
// parts; the control is their difference.
NlpProblem assemble_problem(const TransitionModel& model, const TrueState& state, const Position& destination,
                            const std::vector<AlignedPlan>& others, const PlannerParams& params);

// Number of nonlinear safety rows per other agent and step.
inline constexpr int kSafetyRowsPerPair = 3;

struct PlanRequest {
    TrueState state;
    Position destination;
    std::vector<AlignedPlan> others;
    PlannerParams params;
    const HorizonPlan* previous_plan = nullptr;
    int starts = 4;
    std::uint64_t seed = 0;
    int owner = 0;
    int planned_at = 0;
    std::vector<std::vector<Control>> extra_starts;  // tried first, in order
};

HorizonPlan plan(const TransitionModel& model, const PlanRequest& request);

HorizonPlan fallback_plan(const TransitionModel& model, const HorizonPlan* previous_plan, const TrueState& state,
                          const PlannerParams& params);

// Per step, the VP evaluation of the plan against each aligned plan.
struct PlanCheck {
    bool box_ok = true;
    bool rates_ok = true;
    bool safety_ok = true;
    double worst_bound = 0.0;
    double max_moment_mismatch = 0.0;  // against re-propagation from moments[0]
};

PlanCheck verify_plan(const TransitionModel& model, const HorizonPlan& plan, const std::vector<AlignedPlan>& others,
                      const PlannerParams& params, double bound_tolerance = 1e-6);

double expected_terminal_cost(const MomentVector& m, const Position& destination);

}  // namespace ngmpc
