#include "ngmpc/validation.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "ngmpc/errors.hpp"
#include "ngmpc/run_log.hpp"

using namespace ngmpc;

namespace {

ScenarioConfig two_agents() {
    ScenarioConfig s = crossing_scenario(0.1);
    s.agents.resize(2);
    s.run.steps = 2;
    return s;
}

// Hand-built log: one agent moving 1 m per step along x towards (5, 0, 0).
RunLog straight_line_log(int steps) {
    RunLog log;
    log.config = crossing_scenario(0.1);
    log.config.agents.resize(1);
    log.config.agents[0].start = {0, 0, 0};
    log.config.agents[0].destination = {5, 0, 0};
    for (int k = 0; k < steps; ++k) {
        StepRecord r;
        r.step = k;
        AgentStepRecord a;
        a.uav = 1;
        a.state = {std::min<double>(k, 5), 0, 0, 0};
        a.plan.meta.iterations = 10 * (k + 1);
        r.agents.push_back(a);
        log.steps.push_back(r);
    }
    log.final_states = {{std::min<double>(steps, 5), 0, 0, 0}};
    return log;
}

}  // namespace

TEST(MomentsCheck, ReferenceNoisePasses) {
    MomentCheckOptions o;
    o.samples = 200'000;
    const MomentCheckResult r = moments_check(crossing_scenario(0.1), o);
    ASSERT_EQ(r.agents.size(), 4u);
    for (const MomentCheckAgent& a : r.agents) {
        EXPECT_TRUE(a.pass) << "uav " << a.uav << " deviation " << a.max_deviation << " at " << a.worst_entry;
        EXPECT_EQ(a.controls.size(), 10u);
    }
    EXPECT_TRUE(r.pass);
}

TEST(MomentsCheck, ZeroNoiseIsExact) {
    ScenarioConfig s = crossing_scenario(0.1);
    s.noise = NoiseModel::zero();
    MomentCheckOptions o;
    o.samples = 16;
    const MomentCheckResult r = moments_check(s, o);
    for (const MomentCheckAgent& a : r.agents) EXPECT_EQ(a.max_deviation, 0.0);
    EXPECT_TRUE(r.pass);
}

TEST(MomentsCheck, CorruptedTableIsCaughtAndNamed) {
    MomentCheckOptions o;
    o.samples = 100'000;
    o.corruption = TableCorruption{NoiseChannel::speed_v, {1, 0, 0}, 0.01};
    const MomentCheckResult r = moments_check(crossing_scenario(0.1), o);
    EXPECT_FALSE(r.pass);
    for (const MomentCheckAgent& a : r.agents) {
        EXPECT_FALSE(a.pass);
        EXPECT_FALSE(a.worst_entry.empty());
    }
    o.corruption = TableCorruption{NoiseChannel::speed_v, {9, 0, 0}, 0.01};
    EXPECT_THROW(moments_check(crossing_scenario(0.1), o), ConfigurationError);
}

TEST(McValidate, ShapesAndMonotoneQuantiles) {
    const ScenarioConfig s = two_agents();
    const RunLog log = run_receding_horizon(s, 5);
    const McValidation v = mc_validate(log, 500, 9);
    EXPECT_EQ(v.rows.size(), 2u * 1u * 10u);
    EXPECT_EQ(v.particles, 500u);
    EXPECT_EQ(v.epsilon, 0.1);
    for (const PairStepValidation& r : v.rows) {
        const DistanceStats& d = r.stats;
        EXPECT_LE(d.min, d.q01);
        EXPECT_LE(d.q01, d.q25);
        EXPECT_LE(d.q25, d.q50);
        EXPECT_LE(d.q50, d.q75);
        EXPECT_LE(d.q75, d.q99);
        EXPECT_GE(d.violation_fraction, 0.0);
        EXPECT_EQ(r.pass, d.violation_fraction < 0.1);
    }
    EXPECT_TRUE(v.pass);
    const McValidation again = mc_validate(log, 500, 9);
    EXPECT_EQ(again.min_distance, v.min_distance);
    std::ostringstream csv;
    write_mc_csv(v, csv);
    EXPECT_EQ(csv.str().substr(0, csv.str().find('\n')),
              "step,horizon_step,pair,min,q01,q25,q50,q75,q99,violation_fraction,pass");
}

TEST(McValidate, ZeroNoiseHasNoViolations) {
    ScenarioConfig s = two_agents();
    s.noise = NoiseModel::zero();
    const McValidation v = mc_validate(run_receding_horizon(s, 5), 50, 1);
    EXPECT_EQ(v.worst_violation, 0.0);
    for (const PairStepValidation& r : v.rows) EXPECT_EQ(r.stats.min, r.stats.q99);
    EXPECT_TRUE(v.pass);
}

TEST(McValidate, RejectsEmptyLog) {
    RunLog empty;
    empty.config = two_agents();
    EXPECT_THROW(mc_validate(empty, 10, 1), ConfigurationError);
}

TEST(Report, ArrivalTimeAndPathLength) {
    const RunReport r = make_report(straight_line_log(8));
    ASSERT_EQ(r.agents.size(), 1u);
    const AgentReport& a = r.agents[0];
    EXPECT_DOUBLE_EQ(a.arrival_error, 0.0);
    // Within 1 m from x = 4, reached at index 4.
    EXPECT_DOUBLE_EQ(a.arrival_time, 0.4);
    EXPECT_DOUBLE_EQ(a.path_length, 5.0);
    EXPECT_DOUBLE_EQ(a.mean_iterations, 45.0);
    EXPECT_EQ(a.max_iterations, 80);
    EXPECT_TRUE(r.pairs.empty());
    EXPECT_DOUBLE_EQ(r.arrival_spread, 0.0);
}

TEST(Report, NeverArrivingIsNaN) {
    const RunReport r = make_report(straight_line_log(2));
    EXPECT_TRUE(std::isnan(r.agents[0].arrival_time));
    EXPECT_DOUBLE_EQ(r.agents[0].arrival_error, 3.0);
    EXPECT_TRUE(std::isnan(r.arrival_spread));
}

TEST(Report, PairMinimaAndTable) {
    const RunLog log = run_receding_horizon(two_agents(), 5);
    const RunReport r = make_report(log);
    ASSERT_EQ(r.pairs.size(), 1u);
    double expect = kInfinity;
    for (const StepRecord& s : log.steps) expect = std::min(expect, s.mean_distances[0].distance);
    EXPECT_EQ(r.pairs[0].min_mean_distance, expect);
    std::ostringstream table, csv;
    print_report(r, table);
    write_report_csv(r, csv);
    EXPECT_NE(table.str().find("arrival_err"), std::string::npos);
    const std::string rows = csv.str();
    EXPECT_EQ(std::count(rows.begin(), rows.end(), '\n'), 1 + 2 + 1);
}

TEST(Report, EmptyLogIsAnError) {
    RunLog empty;
    empty.config = two_agents();
    EXPECT_THROW(make_report(empty), ConfigurationError);
}
