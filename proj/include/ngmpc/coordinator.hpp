#pragma once

// Sequential-broadcast receding-horizon loop: at every global step the UAVs
// replan in id order, each consuming the fresh plans of lower ids and the
// previous-step plans of higher ids, then all apply their first control.

#include <functional>
#include <string>
#include <vector>

#include "ngmpc/moment_dynamics.hpp"
#include "ngmpc/planner.hpp"
#include "ngmpc/scenario.hpp"
#include "ngmpc/simulator.hpp"

namespace ngmpc {

struct PlanMessage {
    int sender = 0;
    int planned_at = 0;
    std::vector<MomentVector> payload;  // T entries, the sender's steps 1..T
    std::vector<Control> controls;
};

PlanMessage make_message(const HorizonPlan& plan);

struct ConsumedPlan {
    int sender = 0;
    int planned_at = 0;

    bool operator==(const ConsumedPlan&) const = default;
};

struct AgentStepRecord {
    int uav = 0;
    TrueState state;      // at the start of the step, fed back exactly to the planner
    Control applied;
    NoiseSample noise;    // drawn for this step
    HorizonPlan plan;     // full plan including moments
    std::vector<ConsumedPlan> consumed;
};

struct PairDistance {
    int a = 0;
    int b = 0;
    double distance = 0.0;
};

struct StepRecord {
    int step = 0;
    std::vector<AgentStepRecord> agents;  // planning order
    // Distances between the expected positions one step ahead, given the
    // exact states and the applied controls.
    std::vector<PairDistance> mean_distances;
};

struct RunLog {
    ScenarioConfig config;
    std::uint64_t seed = 0;
    std::vector<StepRecord> steps;
    std::vector<TrueState> final_states;  // after the last step
    bool aborted = false;
    std::string abort_reason;
};

// Zero-control plans with moments propagated from each start state.
std::vector<HorizonPlan> bootstrap_plans(const ScenarioConfig& scenario, const TransitionModel& model);

using ProgressFn = std::function<void(int step, const StepRecord&)>;

// Protocol errors stop the loop; the partial log is returned with aborted set.
RunLog run_receding_horizon(const ScenarioConfig& scenario, std::uint64_t seed, const ProgressFn& progress = {});
RunLog run_receding_horizon(const ScenarioConfig& scenario, std::uint64_t seed, const TransitionModel& model,
                            const ProgressFn& progress = {});

TransitionModel make_transition_model(const ScenarioConfig& scenario);

}  // namespace ngmpc
