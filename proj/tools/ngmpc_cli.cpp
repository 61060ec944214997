// ngmpc: plan, validate and summarise multi-UAV receding-horizon runs.
//
// Exit codes: 0 success, 1 a check failed, 2 configuration or input error,
// 3 the run aborted on a protocol error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <regex>

#include "CLI11.hpp"
#include "ngmpc/errors.hpp"
#include "ngmpc/run_log.hpp"
#include "ngmpc/scenario.hpp"
#include "ngmpc/validation.hpp"

namespace fs = std::filesystem;
using namespace ngmpc;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitInput = 2;
constexpr int kExitAborted = 3;

std::ofstream open_out(const fs::path& dir, const char* name) {
    fs::create_directories(dir);
    std::ofstream f(dir / name);
    if (!f) throw ConfigurationError("cannot write " + (dir / name).string());
    return f;
}

struct PlanArgs {
    std::string config;
    std::string out = "out";
    std::optional<std::uint64_t> seed;
    std::optional<int> starts;
    std::optional<double> tol_feas;
    std::optional<int> steps;
    bool verbose = false;
};

int cmd_plan(const PlanArgs& a) {
    ScenarioConfig sc = load_scenario(a.config);
    if (a.seed) sc.run.seed = *a.seed;
    if (a.starts) sc.run.starts = *a.starts;
    if (a.tol_feas) sc.params.solver.feasibility_tolerance = *a.tol_feas;
    if (a.steps) sc.run.steps = *a.steps;
    sc.validate();
    ProgressFn progress;
    if (a.verbose) {
        progress = [](int k, const StepRecord& r) {
            double mind = kInfinity;
            for (const PairDistance& d : r.mean_distances) mind = std::min(mind, d.distance);
            std::fprintf(stderr, "step %d: min mean distance %.3f\n", k, mind);
        };
    }
    const RunLog log = run_receding_horizon(sc, sc.run.seed, progress);
    const fs::path out(a.out);
    {
        auto f = open_out(out, "run_log.jsonl");
        write_run_log(log, f);
    }
    {
        auto f = open_out(out, "trajectories.csv");
        write_trajectories_csv(log, f);
    }
    {
        auto f = open_out(out, "distances.csv");
        write_distances_csv(log, f);
    }
    if (log.aborted) {
        std::cerr << "run aborted: " << log.abort_reason << '\n';
        return kExitAborted;
    }
    const RunReport rep = make_report(log);
    std::printf("%s: %d steps, seed %llu\n", sc.name.c_str(), rep.steps, static_cast<unsigned long long>(log.seed));
    for (const AgentReport& ag : rep.agents) std::printf("uav %d arrival error %.3f m\n", ag.uav, ag.arrival_error);
    if (!rep.pairs.empty()) std::printf("min pairwise mean distance %.3f m\n", rep.min_mean_distance);
    std::printf("fallback plans %d\n", rep.fallbacks);
    std::printf("wrote %s\n", (out / "run_log.jsonl").c_str());
    return kExitOk;
}

struct McArgs {
    std::string log;
    std::string out;
    std::size_t particles = 1000;
    std::uint64_t seed = 1;
    std::string histogram;
};

// "step:horizon:a-b" or "worst".
ClearanceHistogram histogram_for(const RunLog& log, const McArgs& a, const McValidation& v) {
    if (a.histogram == "worst")
        return clearance_histogram(log, a.particles, a.seed, v.worst_step, v.worst_horizon_step, v.worst_a, v.worst_b);
    static const std::regex re(R"(^(\d+):(\d+):(\d+)-(\d+)$)");
    std::smatch m;
    if (!std::regex_match(a.histogram, m, re)) throw ConfigurationError("--histogram expects step:horizon:a-b or worst");
    return clearance_histogram(log, a.particles, a.seed, std::stoi(m[1]), std::stoi(m[2]), std::stoi(m[3]),
                               std::stoi(m[4]));
}

int cmd_mc_validate(const McArgs& a) {
    const RunLog log = load_run_log(a.log);
    if (log.aborted) throw ConfigurationError("run log is from an aborted run");
    const McValidation v = mc_validate(log, a.particles, a.seed);
    const fs::path out = a.out.empty() ? fs::path(a.log).parent_path() : fs::path(a.out);
    {
        auto f = open_out(out.empty() ? fs::path(".") : out, "mc_stats.csv");
        write_mc_csv(v, f);
    }
    if (!a.histogram.empty()) {
        const ClearanceHistogram h = histogram_for(log, a, v);
        auto f = open_out(out.empty() ? fs::path(".") : out, "clearance_histogram.csv");
        write_histogram_csv(h, f);
    }
    // One line per pair and global step, summarising its horizon steps.
    std::size_t i = 0;
    while (i < v.rows.size()) {
        const PairStepValidation& first = v.rows[i];
        double worst = 0.0, mind = kInfinity;
        bool pass = true;
        for (; i < v.rows.size() && v.rows[i].step == first.step && v.rows[i].a == first.a && v.rows[i].b == first.b;
             ++i) {
            worst = std::max(worst, v.rows[i].stats.violation_fraction);
            mind = std::min(mind, v.rows[i].stats.min);
            pass = pass && v.rows[i].pass;
        }
        std::printf("step %d pair %d-%d: max violation %.4f min distance %.3f %s\n", first.step, first.a, first.b, worst,
                    mind, pass ? "PASS" : "FAIL");
    }
    std::printf("particles %zu, epsilon %g: worst violation %.4f (step %d, horizon %d, pair %d-%d), "
                "min particle distance %.3f m: %s\n",
                v.particles, v.epsilon, v.worst_violation, v.worst_step, v.worst_horizon_step, v.worst_a, v.worst_b,
                v.min_distance, v.pass ? "PASS" : "FAIL");
    return v.pass ? kExitOk : kExitCheckFailed;
}

struct MomentsArgs {
    std::string config;
    int steps = 10;
    std::size_t samples = 1'000'000;
    std::uint64_t seed = 1;
    std::string corrupt;
    std::string out;
};

TableCorruption parse_corruption(const std::string& s) {
    static const std::regex re(R"(^(speed|climb|heading):(\d+),(\d+),(\d+):([-+0-9.eE]+)$)");
    std::smatch m;
    if (!std::regex_match(s, m, re)) throw ConfigurationError("--corrupt-entry expects channel:p,q,r:offset");
    TableCorruption c;
    c.channel = m[1] == "speed" ? NoiseChannel::speed_v : m[1] == "climb" ? NoiseChannel::altitude_z
                                                                          : NoiseChannel::heading_psi;
    c.powers = {std::stoi(m[2]), std::stoi(m[3]), std::stoi(m[4])};
    c.offset = std::stod(m[5]);
    return c;
}

int cmd_moments_check(const MomentsArgs& a) {
    const ScenarioConfig sc = load_scenario(a.config);
    MomentCheckOptions o;
    o.steps = a.steps;
    o.samples = a.samples;
    o.seed = a.seed;
    if (!a.corrupt.empty()) o.corruption = parse_corruption(a.corrupt);
    const MomentCheckResult r = moments_check(sc, o);
    if (!a.out.empty()) {
        {
            auto f = open_out(a.out, "noise_tables.csv");
            write_tables_csv(*r.tables, f);
        }
        auto f = open_out(a.out, "moments.csv");
        write_moments_csv(r, f);
    }
    for (const MomentCheckAgent& ag : r.agents) {
        std::printf("uav %d: max normalized deviation %.3f", ag.uav, ag.max_deviation);
        if (!ag.worst_entry.empty()) std::printf(" at E[%s] step %d", ag.worst_entry.c_str(), ag.worst_step);
        std::printf(" %s\n", ag.pass ? "PASS" : "FAIL");
    }
    return r.pass ? kExitOk : kExitCheckFailed;
}

struct ReportArgs {
    std::string log;
    std::string out;
};

int cmd_report(const ReportArgs& a) {
    const RunLog log = load_run_log(a.log);
    const RunReport r = make_report(log);
    print_report(r, std::cout);
    const fs::path out = a.out.empty() ? fs::path(a.log).parent_path() : fs::path(a.out);
    auto f = open_out(out.empty() ? fs::path(".") : out, "report.csv");
    write_report_csv(r, f);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Moment-based chance-constrained planning for multiple UAVs"};
    app.require_subcommand(1);

    PlanArgs plan_args;
    auto* plan = app.add_subcommand("plan", "run the receding-horizon scenario and write the run log");
    plan->add_option("--config", plan_args.config, "scenario JSON")->required();
    plan->add_option("--out", plan_args.out, "output directory");
    plan->add_option("--seed", plan_args.seed, "override the master seed");
    plan->add_option("--starts", plan_args.starts, "override the multi-start count");
    plan->add_option("--tol-feas", plan_args.tol_feas, "override the solver feasibility tolerance");
    plan->add_option("--steps", plan_args.steps, "override the number of global steps");
    plan->add_flag("-v,--verbose", plan_args.verbose, "per-step progress on stderr");

    McArgs mc_args;
    auto* mc = app.add_subcommand("mc-validate", "replay logged plans under fresh noise");
    mc->add_option("log,--log", mc_args.log, "run_log.jsonl")->required();
    mc->add_option("--out", mc_args.out, "directory for mc_stats.csv (default: next to the log)");
    mc->add_option("--particles", mc_args.particles, "particles per agent")->check(CLI::PositiveNumber);
    mc->add_option("--seed", mc_args.seed, "particle seed");
    mc->add_option("--histogram", mc_args.histogram,
                   "write clearance_histogram.csv for step:horizon:a-b, or for the worst row with 'worst'");

    MomentsArgs mom_args;
    auto* mom = app.add_subcommand("moments-check", "compare propagated moments with sampling");
    mom->add_option("--config", mom_args.config, "scenario JSON")->required();
    mom->add_option("--steps", mom_args.steps, "control steps")->check(CLI::PositiveNumber);
    mom->add_option("--particles,--samples", mom_args.samples, "Monte Carlo samples")->check(CLI::Range(2.0, 1e9));
    mom->add_option("--seed", mom_args.seed, "sampling seed");
    mom->add_option("--out", mom_args.out, "directory for noise_tables.csv and moments.csv");
    mom->add_option("--corrupt-entry", mom_args.corrupt, "test hook: channel:p,q,r:offset added to one table entry");

    ReportArgs rep_args;
    auto* rep = app.add_subcommand("report", "summarise a run log");
    rep->add_option("log,--log", rep_args.log, "run_log.jsonl")->required();
    rep->add_option("--out", rep_args.out, "directory for report.csv (default: next to the log)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitInput;
    }

    try {
        if (*plan) return cmd_plan(plan_args);
        if (*mc) return cmd_mc_validate(mc_args);
        if (*mom) return cmd_moments_check(mom_args);
        if (*rep) return cmd_report(rep_args);
    } catch (const ConfigurationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInput;
    } catch (const ProtocolError& e) {
        std::cerr << "protocol error: " << e.what() << '\n';
        return kExitAborted;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInput;
    }
    return kExitInput;
}
