#include "ngmpc/planner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <memory>
#include <random>
#include <sstream>

#include "ngmpc/errors.hpp"
#include "ngmpc/safety.hpp"
#include "ngmpc/simd.hpp"

namespace ngmpc {
namespace {

constexpr double kPi = 3.14159265358979323846;

double wrap_angle(double a) {
    a = std::fmod(a + kPi, 2.0 * kPi);
    if (a < 0) a += 2.0 * kPi;
    return a - kPi;
}

std::size_t square_index(int q) {
    return MomentBasis::instance().index_of(q == 0 ? 2 : 0, q == 1 ? 2 : 0, q == 2 ? 2 : 0, 0, 0);
}

// Box on u_0 tightened by the rate limits against the previously applied control.
void first_step_box(const PlannerParams& p, double& v_lo, double& v_hi, double& z_lo, double& z_hi) {
    const ControlBounds& b = p.bounds;
    v_lo = std::clamp(p.previous_control.v - p.dv_max, b.v_min, b.v_max);
    v_hi = std::clamp(p.previous_control.v + p.dv_max, b.v_min, b.v_max);
    z_lo = std::clamp(p.previous_control.z - p.dz_max, b.z_min, b.z_max);
    z_hi = std::clamp(p.previous_control.z + p.dz_max, b.z_min, b.z_max);
}

// Exact box and rate feasibility by a forward clamp.
std::vector<Control> repair_controls(std::vector<Control> u, const PlannerParams& p) {
    const ControlBounds& b = p.bounds;
    Control prev = p.previous_control;
    for (Control& c : u) {
        c.v = std::clamp(std::clamp(c.v, prev.v - p.dv_max, prev.v + p.dv_max), b.v_min, b.v_max);
        c.z = std::clamp(std::clamp(c.z, prev.z - p.dz_max, prev.z + p.dz_max), b.z_min, b.z_max);
        c.psi = std::clamp(c.psi, b.psi_min, b.psi_max);
        prev = c;
    }
    return u;
}

// Each control entry u is carried as u = p - m with p, m >= 0, which turns
// the |u| penalty into the linear term w (p + m).
Vector to_decision(const std::vector<Control>& u) {
    const std::size_t t = u.size();
    Vector x(6 * t, 0.0);
    for (std::size_t k = 0; k < t; ++k) {
        const double c[3] = {u[k].v, u[k].z, u[k].psi};
        for (std::size_t q = 0; q < 3; ++q) {
            x[3 * k + q] = std::max(c[q], 0.0);
            x[3 * t + 3 * k + q] = std::max(-c[q], 0.0);
        }
    }
    return x;
}

std::vector<Control> controls_of(std::span<const double> x, std::size_t t) {
    std::vector<Control> u(t);
    for (std::size_t k = 0; k < t; ++k) {
        const std::size_t m = 3 * t + 3 * k;
        u[k] = {x[3 * k] - x[m], x[3 * k + 1] - x[m + 1], x[3 * k + 2] - x[m + 2]};
    }
    return u;
}

std::vector<Control> abs_controls(const std::vector<Control>& u) {
    std::vector<Control> s(u.size());
    for (std::size_t k = 0; k < u.size(); ++k) s[k] = {std::abs(u[k].v), std::abs(u[k].z), std::abs(u[k].psi)};
    return s;
}

std::vector<Control> shifted(const std::vector<Control>& u, std::size_t t) {
    std::vector<Control> out;
    for (std::size_t k = 1; k < u.size() && out.size() < t; ++k) out.push_back(u[k]);
    const Control hold = u.empty() ? Control{} : u.back();
    while (out.size() < t) out.push_back(hold);
    return out;
}

// Turn toward the goal, ramp speed within the rate limit and brake so the
// mean path can stop at the goal.
std::vector<Control> straight_to_goal(const TrueState& s0, const Position& goal, const PlannerParams& p) {
    std::vector<Control> u;
    TrueState s = s0;
    Control prev = p.previous_control;
    const double accel = p.dv_max / p.delta_s;
    const double climb_accel = p.dz_max / p.delta_s;
    for (int k = 0; k < p.horizon; ++k) {
        const double dx = goal.x - s.x;
        const double dy = goal.y - s.y;
        const double dz = goal.z - s.z;
        const double dist = std::hypot(dx, dy);
        const double heading_err = dist > 1e-6 ? wrap_angle(std::atan2(dy, dx) - s.psi) : 0.0;
        Control c;
        c.psi = std::clamp(heading_err / p.delta_s, p.bounds.psi_min, p.bounds.psi_max);
        const double brake_v = std::sqrt(2.0 * accel * std::max(0.0, dist - 0.5));
        c.v = std::clamp(std::min(brake_v * std::max(0.0, std::cos(heading_err)), prev.v + p.dv_max),
                         std::max(p.bounds.v_min, prev.v - p.dv_max), std::min(p.bounds.v_max, prev.v + p.dv_max));
        const double brake_z = std::copysign(std::sqrt(2.0 * climb_accel * std::abs(dz)), dz);
        c.z = std::clamp(brake_z, std::max(p.bounds.z_min, prev.z - p.dz_max), std::min(p.bounds.z_max, prev.z + p.dz_max));
        u.push_back(c);
        s = step_truth(s, c, {}, p.delta_s);
        prev = c;
    }
    return u;
}

struct SafetyBlock {
    ClearanceForms forms;
    std::size_t step;  // own step 1..T
};

struct EvalState {
    const TransitionModel* model;
    MomentVector start;
    std::size_t horizon;
    Position goal;
    double w;
    double scale;
    double d2;
    double kappa;
    double margin;  // rows tightened so a tolerance-feasible point is exactly safe
    std::vector<SafetyBlock> blocks;
    MomentRollout rollout;
    std::vector<Control> controls;
};

void evaluate(EvalState& st, std::span<const double> x, bool deriv, Evaluation& out) {
    const std::size_t t = st.horizon;
    const std::size_t n = 6 * t;
    const std::size_t nc = 3 * t;
    st.controls.resize(t);
    for (std::size_t k = 0; k < t; ++k) {
        st.controls[k] = {x[3 * k] - x[nc + 3 * k], x[3 * k + 1] - x[nc + 3 * k + 1], x[3 * k + 2] - x[nc + 3 * k + 2]};
    }
    rollout_moments(*st.model, st.start, st.controls, deriv, st.rollout);

    const MomentVector& mt = st.rollout.moments[t];
    const double goal[3] = {st.goal.x, st.goal.y, st.goal.z};
    double slack_sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) slack_sum += x[j];
    out.objective = st.scale * (expected_terminal_cost(mt, st.goal) + st.w * slack_sum);
    if (deriv) {
        out.gradient.assign(n, 0.0);
        for (int q = 0; q < 3; ++q) {
            const double* jsq = st.rollout.jacobian_row(t, square_index(q));
            const double* jm = st.rollout.jacobian_row(t, 1 + q);
            for (std::size_t j = 0; j < nc; ++j) out.gradient[j] += st.scale * (jsq[j] - 2.0 * goal[q] * jm[j]);
        }
        for (std::size_t j = 0; j < nc; ++j) {
            out.gradient[nc + j] = st.scale * st.w - out.gradient[j];
            out.gradient[j] += st.scale * st.w;
        }
    }

    const std::size_t rows = kSafetyRowsPerPair * st.blocks.size();
    out.constraints.resize(rows);
    if (deriv) out.jacobian.assign(rows * n, 0.0);
    const double r58 = std::sqrt(0.625);
    std::vector<double> de1, de2;
    for (std::size_t b = 0; b < st.blocks.size(); ++b) {
        const SafetyBlock& blk = st.blocks[b];
        const MomentVector& m = st.rollout.moments[blk.step];
        const double e1 = blk.forms.e_f.evaluate(m);
        const double e2 = std::max(blk.forms.e_f2.evaluate(m), 1e-12);
        const double root = std::sqrt(e2);
        out.constraints[3 * b] = (st.kappa * root - e1) / st.d2 + st.margin;
        out.constraints[3 * b + 1] = -e1 / st.d2 + st.margin;
        out.constraints[3 * b + 2] = (r58 * root - e1) / st.d2 + st.margin;
        if (!deriv) continue;
        const std::size_t active = 3 * blk.step;
        de1.assign(active, 0.0);
        de2.assign(active, 0.0);
        const auto& kernels = simd::active_kernels();
        for (std::size_t i = 0; i < blk.forms.e_f.indices.size(); ++i) {
            kernels.axpy(blk.forms.e_f.coefficients[i], st.rollout.jacobian_row(blk.step, blk.forms.e_f.indices[i]),
                         de1.data(), active);
        }
        for (std::size_t i = 0; i < blk.forms.e_f2.indices.size(); ++i) {
            kernels.axpy(blk.forms.e_f2.coefficients[i], st.rollout.jacobian_row(blk.step, blk.forms.e_f2.indices[i]),
                         de2.data(), active);
        }
        double* rh = out.jacobian.data() + (3 * b) * n;
        double* ri = rh + n;
        double* rj = ri + n;
        const double droot = 0.5 / root;
        for (std::size_t j = 0; j < active; ++j) {
            rh[j] = (st.kappa * droot * de2[j] - de1[j]) / st.d2;
            ri[j] = -de1[j] / st.d2;
            rj[j] = (r58 * droot * de2[j] - de1[j]) / st.d2;
            rh[nc + j] = -rh[j];
            ri[nc + j] = -ri[j];
            rj[nc + j] = -rj[j];
        }
    }
}

HorizonPlan make_plan(const TransitionModel& model, const TrueState& state, std::vector<Control> controls) {
    HorizonPlan plan;
    plan.controls = std::move(controls);
    plan.slacks = abs_controls(plan.controls);
    plan.moments =
        rollout_moments(model, moments_from_point_state(state.x, state.y, state.z, state.psi), plan.controls).moments;
    return plan;
}

}  // namespace

void PlannerParams::validate() const {
    auto fail = [](const std::string& m) { throw ConfigurationError("planner parameters: " + m); };
    if (horizon < 1) fail("horizon must be at least 1");
    if (!(delta_s > 0)) fail("sampling interval must be positive");
    if (!(w >= 0)) fail("smoothness weight must be non-negative");
    if (!(d_min > 0)) fail("d_min must be positive");
    if (!(epsilon > 0 && epsilon < 1)) fail("epsilon must lie in (0, 1)");
    if (!(bounds.v_min <= bounds.v_max && bounds.z_min <= bounds.z_max && bounds.psi_min <= bounds.psi_max)) {
        fail("control bounds must be ordered");
    }
    if (!(dv_max > 0 && dz_max > 0)) fail("rate limits must be positive");
}

AlignedPlan align_plan(const HorizonPlan& plan, int age) {
    if (age < 0) throw ProtocolError("cannot align a plan from the future");
    AlignedPlan a;
    a.owner = plan.owner;
    a.planned_at = plan.planned_at;
    const int t = plan.horizon();
    if (static_cast<int>(plan.moments.size()) != t + 1 || t == 0) {
        throw ProtocolError("plan of agent " + std::to_string(plan.owner) + " carries a malformed moment payload");
    }
    for (int j = 1; j <= t; ++j) a.moments.push_back(plan.moments[std::min(j + age, t)]);
    return a;
}

double expected_terminal_cost(const MomentVector& m, const Position& goal) {
    const double c[3] = {goal.x, goal.y, goal.z};
    double acc = 0.0;
    for (int q = 0; q < 3; ++q) acc += m.values[square_index(q)] - 2.0 * c[q] * m.values[1 + q] + c[q] * c[q];
    return acc;
}

NlpProblem assemble_problem(const TransitionModel& model, const TrueState& state, const Position& destination,
                            const std::vector<AlignedPlan>& others, const PlannerParams& params) {
    params.validate();
    const std::size_t t = static_cast<std::size_t>(params.horizon);
    if (std::abs(model.delta_s() - params.delta_s) > 1e-15) {
        throw ConfigurationError("transition model and planner disagree on the sampling interval");
    }
    for (const AlignedPlan& o : others) {
        if (o.moments.size() != t) {
            std::ostringstream os;
            os << "plan of agent " << o.owner << " covers " << o.moments.size() << " steps, expected " << t;
            throw ProtocolError(os.str());
        }
    }

    auto st = std::make_shared<EvalState>();
    st->model = &model;
    st->start = moments_from_point_state(state.x, state.y, state.z, state.psi);
    st->horizon = t;
    st->goal = destination;
    st->w = params.w;
    st->scale = 1.0 / std::max(1.0, expected_terminal_cost(st->start, destination));
    st->d2 = params.d_min * params.d_min;
    st->kappa = 1.0 / std::sqrt(1.0 + 2.25 * params.epsilon);
    st->margin = 2.0 * params.solver.feasibility_tolerance;
    for (const AlignedPlan& o : others) {
        for (std::size_t k = 1; k <= t; ++k) st->blocks.push_back({clearance_forms(o.moments[k - 1], params.d_min), k});
    }

    NlpProblem p;
    p.dimension = 6 * t;
    p.lower.assign(p.dimension, 0.0);
    p.upper.assign(p.dimension, 0.0);
    const ControlBounds& b = params.bounds;
    auto split_box = [&](std::size_t j, double lo, double hi) {
        p.lower[j] = std::max(lo, 0.0);
        p.upper[j] = std::max(hi, 0.0);
        p.lower[3 * t + j] = std::max(-hi, 0.0);
        p.upper[3 * t + j] = std::max(-lo, 0.0);
    };
    double v0_lo, v0_hi, z0_lo, z0_hi;
    first_step_box(params, v0_lo, v0_hi, z0_lo, z0_hi);
    for (std::size_t k = 0; k < t; ++k) {
        split_box(3 * k, k == 0 ? v0_lo : b.v_min, k == 0 ? v0_hi : b.v_max);
        split_box(3 * k + 1, k == 0 ? z0_lo : b.z_min, k == 0 ? z0_hi : b.z_max);
        split_box(3 * k + 2, b.psi_min, b.psi_max);
    }
    // Rate limits between consecutive planned steps; the first step is in the box.
    const std::size_t m0 = 3 * t;
    for (std::size_t k = 1; k < t; ++k) {
        for (std::size_t q = 0; q < 2; ++q) {
            const std::size_t cur = 3 * k + q;
            const std::size_t prev = 3 * (k - 1) + q;
            const double lim = q == 0 ? params.dv_max : params.dz_max;
            p.linear_constraints.push_back({{{cur, 1.0}, {m0 + cur, -1.0}, {prev, -1.0}, {m0 + prev, 1.0}}, -lim, lim});
        }
    }
    p.fused_constraint_count = kSafetyRowsPerPair * st->blocks.size();
    p.fused = [st](std::span<const double> x, bool deriv, Evaluation& out) { evaluate(*st, x, deriv, out); };
    return p;
}

HorizonPlan fallback_plan(const TransitionModel& model, const HorizonPlan* previous, const TrueState& state,
                          const PlannerParams& params) {
    const std::size_t t = static_cast<std::size_t>(params.horizon);
    std::vector<Control> u;
    if (previous != nullptr && !previous->controls.empty()) {
        u = shifted(previous->controls, t);
    } else {
        Control c = params.previous_control;
        for (std::size_t k = 0; k < t; ++k) {
            c.v = std::max(params.bounds.v_min, std::max(0.0, c.v - params.dv_max));
            c.z = c.z > 0 ? std::max(0.0, c.z - params.dz_max) : std::min(0.0, c.z + params.dz_max);
            c.psi = 0.0;
            u.push_back(c);
        }
    }
    HorizonPlan plan = make_plan(model, state, repair_controls(std::move(u), params));
    plan.meta.fallback = true;
    plan.meta.note = previous ? "shift-and-hold of previous plan" : "braking profile";
    return plan;
}

PlanCheck verify_plan(const TransitionModel& model, const HorizonPlan& plan, const std::vector<AlignedPlan>& others,
                      const PlannerParams& params, double bound_tolerance) {
    PlanCheck c;
    const ControlBounds& b = params.bounds;
    Control prev = params.previous_control;
    for (const Control& u : plan.controls) {
        c.box_ok = c.box_ok && u.v >= b.v_min && u.v <= b.v_max && u.z >= b.z_min && u.z <= b.z_max &&
                   u.psi >= b.psi_min && u.psi <= b.psi_max;
        c.rates_ok = c.rates_ok && std::abs(u.v - prev.v) <= params.dv_max + 1e-12 &&
                     std::abs(u.z - prev.z) <= params.dz_max + 1e-12;
        prev = u;
    }
    const MomentRollout r = rollout_moments(model, plan.moments.at(0), plan.controls);
    for (std::size_t k = 0; k < r.moments.size() && k < plan.moments.size(); ++k) {
        for (std::size_t i = 0; i < kBasisSize; ++i) {
            c.max_moment_mismatch = std::max(c.max_moment_mismatch, std::abs(r.moments[k].values[i] - plan.moments[k].values[i]));
        }
    }
    for (const AlignedPlan& o : others) {
        for (std::size_t k = 1; k < plan.moments.size() && k <= o.moments.size(); ++k) {
            const SafetyEvalResult s = evaluate_pair(plan.moments[k], o.moments[k - 1], params.d_min);
            c.worst_bound = std::max(c.worst_bound, s.bound);
            if (!s.satisfies(params.epsilon, bound_tolerance)) c.safety_ok = false;
        }
    }
    return c;
}

HorizonPlan plan(const TransitionModel& model, const PlanRequest& req) {
    const auto t0 = std::chrono::steady_clock::now();
    const PlannerParams& params = req.params;
    const NlpProblem problem = assemble_problem(model, req.state, req.destination, req.others, params);
    const std::size_t t = static_cast<std::size_t>(params.horizon);

    std::vector<Vector> starts;
    for (const auto& u : req.extra_starts) starts.push_back(to_decision(repair_controls(u, params)));
    if (req.previous_plan != nullptr && !req.previous_plan->controls.empty()) {
        starts.push_back(to_decision(repair_controls(shifted(req.previous_plan->controls, t), params)));
    }
    starts.push_back(to_decision(repair_controls(std::vector<Control>(t), params)));
    starts.push_back(to_decision(straight_to_goal(req.state, req.destination, params)));
    std::mt19937_64 rng(derive_seed(req.seed, static_cast<std::uint64_t>(StreamPurpose::planner),
                                    static_cast<std::uint64_t>(req.owner), static_cast<std::uint64_t>(req.planned_at)));
    const std::size_t base = starts.size();
    std::normal_distribution<double> unit(0.0, 1.0);
    for (std::size_t s = base; s < static_cast<std::size_t>(std::max(0, req.starts)); ++s) {
        std::vector<Control> u = controls_of(starts[(s - base) % base], t);
        for (Control& c : u) {
            c.v += unit(rng);
            c.z += 0.5 * unit(rng);
            c.psi += 0.5 * unit(rng);
        }
        starts.push_back(to_decision(repair_controls(u, params)));
    }

    const MultiStartReport ms = multi_start_solve(problem, starts, req.seed, params.solver);
    std::vector<const SolveReport*> order;
    for (const SolveReport& r : ms.runs) {
        if (r.converged) order.push_back(&r);
    }
    std::stable_sort(order.begin(), order.end(),
                     [](const SolveReport* a, const SolveReport* b) { return a->objective_value < b->objective_value; });

    // The repaired candidate must pass the exact bound check; the first that
    // does in objective order wins.
    HorizonPlan best;
    bool have = false;
    auto accept = [&](const SolveReport& r) {
        HorizonPlan cand = make_plan(model, req.state, repair_controls(controls_of(r.solution, t), params));
        const PlanCheck check = verify_plan(model, cand, req.others, params);
        if (!check.safety_ok) return false;
        cand.meta.objective = expected_terminal_cost(cand.moments[t], req.destination);
        for (const Control& sl : cand.slacks) cand.meta.objective += params.w * (sl.v + sl.z + sl.psi);
        if (have && cand.meta.objective >= best.meta.objective) return false;
        cand.meta.max_violation = r.max_constraint_violation;
        cand.meta.worst_bound = check.worst_bound;
        cand.meta.winning_start = static_cast<int>(r.start_index);
        best = std::move(cand);
        have = true;
        return true;
    };
    for (const SolveReport* r : order) {
        if (accept(*r)) break;
    }
    int total_iterations = 0;
    for (const SolveReport& r : ms.runs) total_iterations += r.iterations;

    // No start verified: look for any safe point without the objective, then
    // polish from it.
    if (!have) {
        NlpProblem feasibility = problem;
        feasibility.fused = [inner = problem.fused](std::span<const double> x, bool deriv, Evaluation& out) {
            inner(x, deriv, out);
            out.objective = 0.0;
            if (deriv) std::fill(out.gradient.begin(), out.gradient.end(), 0.0);
        };
        for (std::size_t s = 0; s < starts.size() && !have; ++s) {
            SolveReport r = solve(feasibility, starts[s], params.solver);
            total_iterations += r.iterations;
            if (!r.converged) continue;
            r.start_index = s;
            if (!accept(r)) continue;
            best.meta.note = "feasibility restoration";
            SolveReport polished = solve(problem, r.solution, params.solver);
            total_iterations += polished.iterations;
            polished.start_index = s;
            if (polished.converged && accept(polished)) best.meta.note = "feasibility restoration, polished";
        }
    }
    const int tried = static_cast<int>(ms.runs.size());
    if (!have) {
        best = fallback_plan(model, req.previous_plan, req.state, params);
        best.meta.note += "; no verified feasible solution";
        best.meta.worst_bound = verify_plan(model, best, req.others, params).worst_bound;
    } else {
        best.meta.feasible = true;
    }
    best.owner = req.owner;
    best.planned_at = req.planned_at;
    best.meta.starts_tried = tried;
    best.meta.iterations = total_iterations;
    best.meta.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return best;
}

}  // namespace ngmpc
