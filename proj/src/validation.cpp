#include "ngmpc/validation.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>

#include "ngmpc/errors.hpp"
#include "ngmpc/run_log.hpp"

namespace ngmpc {

namespace {

double distance(const TrueState& s, const Position& p) {
    return std::sqrt((s.x - p.x) * (s.x - p.x) + (s.y - p.y) * (s.y - p.y) + (s.z - p.z) * (s.z - p.z));
}

std::vector<Control> check_controls(std::uint64_t seed, int uav, int steps) {
    SplitMix64 rng(derive_seed(seed, static_cast<std::uint64_t>(StreamPurpose::oracle), static_cast<std::uint64_t>(uav)));
    std::uniform_real_distribution<double> speed(0.0, 5.0), climb(-1.0, 1.0), turn(-1.0, 1.0);
    std::vector<Control> u(steps);
    for (Control& c : u) {
        c.v = speed(rng);
        c.z = climb(rng);
        c.psi = turn(rng);
    }
    return u;
}

}  // namespace

MomentCheckAgent compare_moments(const TrueState& start, const std::vector<Control>& controls,
                                 const NoiseModel& noise, const TransitionModel& model, double delta_s,
                                 const MomentCheckOptions& options, std::uint64_t stream_seed) {
    MomentCheckAgent out;
    out.controls = controls;
    MomentRollout prop =
        rollout_moments(model, moments_from_point_state(start.x, start.y, start.z, start.psi), controls);
    const MomentEstimate mc = mc_moment_oracle(start, controls, noise, delta_s, options.samples, stream_seed);
    const std::size_t first = options.final_step_only ? controls.size() : 1;
    for (std::size_t k = first; k <= controls.size(); ++k) {
        for (std::size_t m = 1; m < kBasisSize; ++m) {
            const double p = prop.moments[k].values[m];
            const double s = mc.mean[k - 1].values[m];
            const double se = mc.standard_error[k - 1].values[m];
            const double diff = std::abs(p - s);
            double dev = 0.0;
            if (diff > 1e-9 * (1.0 + std::abs(s))) {
                dev = se > 0.0 ? diff / se : std::numeric_limits<double>::infinity();
            }
            if (dev > out.max_deviation) {
                out.max_deviation = dev;
                out.worst_entry = MomentBasis::instance().monomial(m).label();
                out.worst_step = static_cast<int>(k);
            }
        }
    }
    out.pass = out.max_deviation <= options.threshold;
    out.propagated = std::move(prop.moments);
    return out;
}

MomentCheckResult moments_check(const ScenarioConfig& scenario, const MomentCheckOptions& options) {
    if (options.steps < 1 || options.samples < 2) throw ConfigurationError("moments-check needs steps >= 1 and samples >= 2");
    ChannelTables tables = build_channel_tables(scenario.noise, scenario.params.delta_s);
    if (options.corruption) {
        const TableCorruption& c = *options.corruption;
        TrigMomentTable& t = c.channel == NoiseChannel::speed_v      ? tables.speed
                             : c.channel == NoiseChannel::altitude_z ? tables.climb
                                                                     : tables.heading;
        t = t.with_perturbed_entry(c.powers[0], c.powers[1], c.powers[2], c.offset);
    }
    const TransitionModel model(default_expansion(), tables);
    MomentCheckResult result;
    result.tables = tables;
    for (const AgentConfig& a : scenario.agents) {
        const TrueState start{a.start.x, a.start.y, a.start.z, a.initial_heading()};
        MomentCheckAgent r = compare_moments(start, check_controls(options.seed, a.id, options.steps), scenario.noise,
                                             model, scenario.params.delta_s, options,
                                             derive_seed(options.seed, static_cast<std::uint64_t>(a.id)));
        r.uav = a.id;
        result.pass = result.pass && r.pass;
        result.agents.push_back(std::move(r));
    }
    return result;
}

McValidation mc_validate(const RunLog& log, std::size_t particles, std::uint64_t seed) {
    if (log.steps.empty()) throw ConfigurationError("run log has no steps to validate");
    if (particles < 1) throw ConfigurationError("mc-validate needs at least one particle");
    const ScenarioConfig& sc = log.config;
    McValidation v;
    v.particles = particles;
    v.epsilon = sc.params.epsilon;
    v.min_distance = std::numeric_limits<double>::infinity();
    for (const StepRecord& r : log.steps) {
        std::vector<ParticleSet> sets;
        for (const AgentStepRecord& a : r.agents) {
            sets.push_back(mc_rollout(a.state, a.plan.controls, sc.noise, sc.params.delta_s, particles,
                                      derive_seed(seed, static_cast<std::uint64_t>(r.step)),
                                      static_cast<std::uint64_t>(a.uav)));
        }
        for (std::size_t i = 0; i < sets.size(); ++i) {
            for (std::size_t j = i + 1; j < sets.size(); ++j) {
                const std::vector<DistanceStats> stats = pairwise_distance_stats(sets[i], sets[j], sc.params.d_min);
                for (std::size_t h = 1; h < stats.size(); ++h) {
                    PairStepValidation row;
                    row.step = r.step;
                    row.horizon_step = static_cast<int>(h);
                    row.a = r.agents[i].uav;
                    row.b = r.agents[j].uav;
                    row.stats = stats[h];
                    row.pass = row.stats.violation_fraction < v.epsilon;
                    v.pass = v.pass && row.pass;
                    v.min_distance = std::min(v.min_distance, row.stats.min);
                    if (row.stats.violation_fraction > v.worst_violation || v.rows.empty()) {
                        v.worst_violation = row.stats.violation_fraction;
                        v.worst_step = row.step;
                        v.worst_horizon_step = row.horizon_step;
                        v.worst_a = row.a;
                        v.worst_b = row.b;
                    }
                    v.rows.push_back(row);
                }
            }
        }
    }
    return v;
}

ClearanceHistogram clearance_histogram(const RunLog& log, std::size_t particles, std::uint64_t seed, int step,
                                       int horizon_step, int a, int b, int bins) {
    if (bins < 1 || particles < 1) throw ConfigurationError("histogram needs bins >= 1 and particles >= 1");
    const auto rec = std::find_if(log.steps.begin(), log.steps.end(), [&](const StepRecord& r) { return r.step == step; });
    if (rec == log.steps.end()) throw ConfigurationError("step " + std::to_string(step) + " is not in the run log");
    const ScenarioConfig& sc = log.config;
    auto rollout = [&](int uav) {
        for (const AgentStepRecord& ag : rec->agents) {
            if (ag.uav != uav) continue;
            if (horizon_step < 1 || horizon_step > ag.plan.horizon())
                throw ConfigurationError("horizon step out of range");
            return mc_rollout(ag.state, ag.plan.controls, sc.noise, sc.params.delta_s, particles,
                              derive_seed(seed, static_cast<std::uint64_t>(step)), static_cast<std::uint64_t>(uav));
        }
        throw ConfigurationError("uav " + std::to_string(uav) + " is not in the run log");
    };
    const ParticleSet pa = rollout(a), pb = rollout(b);
    const double d2min = sc.params.d_min * sc.params.d_min;
    std::vector<double> f(particles);
    for (std::size_t i = 0; i < particles; ++i) {
        const double dx = pa.x[horizon_step][i] - pb.x[horizon_step][i];
        const double dy = pa.y[horizon_step][i] - pb.y[horizon_step][i];
        const double dz = pa.z[horizon_step][i] - pb.z[horizon_step][i];
        f[i] = dx * dx + dy * dy + dz * dz - d2min;
    }
    const auto [lo, hi] = std::minmax_element(f.begin(), f.end());
    ClearanceHistogram h{step, horizon_step, a, b, *lo, 0.0, std::vector<std::size_t>(bins, 0)};
    h.width = *hi > *lo ? (*hi - *lo) / bins : 1.0;
    for (double v : f) {
        const auto bin = static_cast<std::size_t>((v - h.low) / h.width);
        ++h.counts[std::min<std::size_t>(bin, bins - 1)];
    }
    return h;
}

void write_histogram_csv(const ClearanceHistogram& h, std::ostream& out) {
    out << std::setprecision(17) << "bin_low,bin_high,count\n";
    for (std::size_t i = 0; i < h.counts.size(); ++i)
        out << h.low + h.width * i << ',' << h.low + h.width * (i + 1) << ',' << h.counts[i] << '\n';
}

void write_tables_csv(const ChannelTables& tables, std::ostream& out) {
    out << std::setprecision(17) << "channel,p,q,r,delta,value\n";
    for (const TrigMomentTable* t : {&tables.speed, &tables.climb, &tables.heading}) {
        for (const auto& [key, value] : t->entries()) {
            out << to_string(t->spec().channel()) << ',' << key[0] << ',' << key[1] << ',' << key[2] << ','
                << t->delta() << ',' << value << '\n';
        }
    }
}

void write_moments_csv(const MomentCheckResult& r, std::ostream& out) {
    const MomentBasis& basis = MomentBasis::instance();
    out << std::setprecision(17) << "uav,step,monomial,value\n";
    for (const MomentCheckAgent& a : r.agents) {
        for (std::size_t k = 0; k < a.propagated.size(); ++k)
            for (std::size_t m = 0; m < kBasisSize; ++m)
                out << a.uav << ',' << k << ',' << basis.monomial(m).label() << ',' << a.propagated[k].values[m] << '\n';
    }
}

void write_mc_csv(const McValidation& v, std::ostream& out) {
    out.precision(17);
    out << "step,horizon_step,pair,min,q01,q25,q50,q75,q99,violation_fraction,pass\n";
    for (const PairStepValidation& r : v.rows) {
        const DistanceStats& s = r.stats;
        out << r.step << ',' << r.horizon_step << ',' << r.a << '-' << r.b << ',' << s.min << ',' << s.q01 << ','
            << s.q25 << ',' << s.q50 << ',' << s.q75 << ',' << s.q99 << ',' << s.violation_fraction << ','
            << (r.pass ? "pass" : "fail") << '\n';
    }
}

RunReport make_report(const RunLog& log, double arrival_radius) {
    if (log.steps.empty()) throw ConfigurationError("run log has no steps to report");
    const ScenarioConfig& sc = log.config;
    const double ds = sc.params.delta_s;
    RunReport rep;
    rep.name = sc.name;
    rep.steps = static_cast<int>(log.steps.size());
    rep.aborted = log.aborted;
    double fastest = std::numeric_limits<double>::infinity();
    double slowest = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < sc.agents.size(); ++i) {
        const AgentConfig& cfg = sc.agents[i];
        AgentReport a;
        a.uav = cfg.id;
        const std::vector<TrueState> hist = state_history(log, i);
        a.arrival_error = distance(hist.back(), cfg.destination);
        std::size_t settle = hist.size();
        for (std::size_t k = hist.size(); k-- > 0;) {
            if (distance(hist[k], cfg.destination) > arrival_radius) break;
            settle = k;
        }
        a.arrival_time = settle < hist.size() ? static_cast<double>(settle) * ds : std::nan("");
        for (std::size_t k = 1; k < hist.size(); ++k) {
            a.path_length += std::hypot(hist[k].x - hist[k - 1].x, hist[k].y - hist[k - 1].y, hist[k].z - hist[k - 1].z);
        }
        long total_it = 0;
        for (const StepRecord& r : log.steps) {
            const PlanMetadata& md = r.agents.at(i).plan.meta;
            a.fallbacks += md.fallback ? 1 : 0;
            total_it += md.iterations;
            a.max_iterations = std::max(a.max_iterations, md.iterations);
            a.worst_bound = std::max(a.worst_bound, md.worst_bound);
        }
        a.mean_iterations = static_cast<double>(total_it) / static_cast<double>(log.steps.size());
        rep.fallbacks += a.fallbacks;
        fastest = std::min(fastest, a.arrival_time);
        slowest = std::max(slowest, a.arrival_time);
        rep.agents.push_back(a);
    }
    const bool all_arrived = std::none_of(rep.agents.begin(), rep.agents.end(),
                                          [](const AgentReport& a) { return std::isnan(a.arrival_time); });
    rep.arrival_spread = all_arrived ? slowest - fastest : std::nan("");
    rep.min_mean_distance = std::numeric_limits<double>::infinity();
    for (const StepRecord& r : log.steps) {
        for (const PairDistance& d : r.mean_distances) {
            auto it = std::find_if(rep.pairs.begin(), rep.pairs.end(),
                                   [&](const PairReport& p) { return p.a == d.a && p.b == d.b; });
            if (it == rep.pairs.end()) {
                rep.pairs.push_back({d.a, d.b, d.distance, r.step});
            } else if (d.distance < it->min_mean_distance) {
                it->min_mean_distance = d.distance;
                it->step_of_min = r.step;
            }
            rep.min_mean_distance = std::min(rep.min_mean_distance, d.distance);
        }
    }
    return rep;
}

void print_report(const RunReport& r, std::ostream& out) {
    std::ostringstream os;
    os << std::fixed;
    os << "run " << (r.name.empty() ? "(unnamed)" : r.name) << ": " << r.steps << " steps"
       << (r.aborted ? " (aborted)" : "") << "\n\n";
    os << std::setw(5) << "uav" << std::setw(12) << "arrival_err" << std::setw(12) << "arrival_s" << std::setw(10)
       << "path_m" << std::setw(11) << "fallbacks" << std::setw(10) << "mean_it" << std::setw(9) << "max_it"
       << std::setw(13) << "worst_bound" << '\n';
    for (const AgentReport& a : r.agents) {
        os << std::setw(5) << a.uav << std::setw(12) << std::setprecision(3) << a.arrival_error << std::setw(12)
           << std::setprecision(2) << a.arrival_time << std::setw(10) << std::setprecision(2) << a.path_length
           << std::setw(11) << a.fallbacks << std::setw(10) << std::setprecision(0) << a.mean_iterations
           << std::setw(9) << a.max_iterations << std::setw(13) << std::setprecision(4) << a.worst_bound << '\n';
    }
    os << '\n' << std::setw(5) << "pair" << std::setw(16) << "min_mean_dist" << std::setw(8) << "step" << '\n';
    for (const PairReport& p : r.pairs) {
        os << std::setw(5) << (std::to_string(p.a) + "-" + std::to_string(p.b)) << std::setw(16) << std::setprecision(3)
           << p.min_mean_distance << std::setw(8) << p.step_of_min << '\n';
    }
    os << "\narrival spread " << std::setprecision(2) << r.arrival_spread << " s, min mean distance "
       << std::setprecision(3) << r.min_mean_distance << " m, fallbacks " << r.fallbacks << '\n';
    out << os.str();
}

void write_report_csv(const RunReport& r, std::ostream& out) {
    out.precision(17);
    out << "kind,uav_a,uav_b,arrival_error,arrival_time,path_length,fallbacks,mean_iterations,max_iterations,"
           "worst_bound,min_mean_distance,step_of_min\n";
    for (const AgentReport& a : r.agents) {
        out << "agent," << a.uav << ",," << a.arrival_error << ',' << a.arrival_time << ',' << a.path_length << ','
            << a.fallbacks << ',' << a.mean_iterations << ',' << a.max_iterations << ',' << a.worst_bound << ",,\n";
    }
    for (const PairReport& p : r.pairs) {
        out << "pair," << p.a << ',' << p.b << ",,,,,,,," << p.min_mean_distance << ',' << p.step_of_min << '\n';
    }
}

}  // namespace ngmpc
