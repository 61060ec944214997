#include "ngmpc/coordinator.hpp"

#include <cmath>
#include <memory>

#include "ngmpc/errors.hpp"

namespace ngmpc {

PlanMessage make_message(const HorizonPlan& plan) {
    PlanMessage m;
    m.sender = plan.owner;
    m.planned_at = plan.planned_at;
    m.payload.assign(plan.moments.begin() + 1, plan.moments.end());
    m.controls = plan.controls;
    return m;
}

TransitionModel make_transition_model(const ScenarioConfig& scenario) {
    return TransitionModel(default_expansion(), build_channel_tables(scenario.noise, scenario.params.delta_s));
}

std::vector<HorizonPlan> bootstrap_plans(const ScenarioConfig& scenario, const TransitionModel& model) {
    std::vector<HorizonPlan> plans;
    for (const AgentConfig& a : scenario.agents) {
        HorizonPlan p;
        p.owner = a.id;
        p.planned_at = 0;
        p.controls.assign(scenario.params.horizon, Control{});
        p.slacks = p.controls;
        p.moments = rollout_moments(model, moments_from_point_state(a.start.x, a.start.y, a.start.z, a.initial_heading()),
                                    p.controls)
                        .moments;
        p.meta.note = "bootstrap";
        plans.push_back(std::move(p));
    }
    return plans;
}

RunLog run_receding_horizon(const ScenarioConfig& scenario, std::uint64_t seed, const ProgressFn& progress) {
    scenario.validate();
    const TransitionModel model = make_transition_model(scenario);
    return run_receding_horizon(scenario, seed, model, progress);
}

RunLog run_receding_horizon(const ScenarioConfig& scenario, std::uint64_t seed, const TransitionModel& model,
                            const ProgressFn& progress) {
    scenario.validate();
    const std::size_t m = scenario.agents.size();
    RunLog log;
    log.config = scenario;
    log.seed = seed;

    std::vector<TrueState> states;
    std::vector<NoiseStreams> noise;
    std::vector<Control> applied(m);
    for (std::size_t i = 0; i < m; ++i) {
        const AgentConfig& a = scenario.agents[i];
        states.push_back({a.start.x, a.start.y, a.start.z, a.initial_heading()});
        noise.emplace_back(seed, StreamPurpose::truth, static_cast<std::uint64_t>(a.id));
    }
    std::vector<HorizonPlan> plans = bootstrap_plans(scenario, model);

    try {
        for (int k = 0; k < scenario.run.steps; ++k) {
            StepRecord rec;
            rec.step = k;
            std::vector<HorizonPlan> fresh(m);
            for (std::size_t i = 0; i < m; ++i) {
                PlanRequest req;
                req.state = states[i];
                req.destination = scenario.agents[i].destination;
                req.params = scenario.params;
                req.params.previous_control = applied[i];
                req.previous_plan = k > 0 ? &plans[i] : nullptr;
                req.starts = scenario.run.starts;
                req.seed = seed;
                req.owner = scenario.agents[i].id;
                req.planned_at = k;
                AgentStepRecord ar;
                ar.uav = req.owner;
                ar.state = states[i];
                for (std::size_t j = 0; j < m; ++j) {
                    if (j == i) continue;
                    const HorizonPlan& src = j < i ? fresh[j] : plans[j];
                    const int age = k - src.planned_at;
                    if ((j < i && age != 0) || (j > i && age != (k == 0 ? 0 : 1))) {
                        throw ProtocolError("agent " + std::to_string(req.owner) + " at step " + std::to_string(k) +
                                            " received a plan of agent " + std::to_string(src.owner) +
                                            " with unexpected age " + std::to_string(age));
                    }
                    req.others.push_back(align_plan(src, age));
                    ar.consumed.push_back({src.owner, src.planned_at});
                }
                fresh[i] = plan(model, req);
                const MomentVector fed = moments_from_point_state(states[i].x, states[i].y, states[i].z, states[i].psi);
                if (fresh[i].moments.at(0).values != fed.values) {
                    throw ProtocolError("plan does not start from the fed-back state");
                }
                ar.plan = fresh[i];
                rec.agents.push_back(std::move(ar));
            }
            for (std::size_t a = 0; a < m; ++a) {
                for (std::size_t b = a + 1; b < m; ++b) {
                    const MomentVector& ma = fresh[a].moments[1];
                    const MomentVector& mb = fresh[b].moments[1];
                    const double d = std::sqrt(std::pow(ma.values[1] - mb.values[1], 2) +
                                               std::pow(ma.values[2] - mb.values[2], 2) +
                                               std::pow(ma.values[3] - mb.values[3], 2));
                    rec.mean_distances.push_back({scenario.agents[a].id, scenario.agents[b].id, d});
                }
            }
            for (std::size_t i = 0; i < m; ++i) {
                applied[i] = fresh[i].controls.front();
                const NoiseSample w = sample_noise(scenario.noise, noise[i]);
                rec.agents[i].applied = applied[i];
                rec.agents[i].noise = w;
                states[i] = step_truth(states[i], applied[i], w, scenario.params.delta_s);
            }
            plans = std::move(fresh);
            log.steps.push_back(std::move(rec));
            if (progress) progress(k, log.steps.back());
        }
    } catch (const ProtocolError& e) {
        log.aborted = true;
        log.abort_reason = e.what();
    }
    log.final_states = states;
    return log;
}

}  // namespace ngmpc
