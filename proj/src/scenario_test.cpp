#include "ngmpc/scenario.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "ngmpc/errors.hpp"

using namespace ngmpc;
using nlohmann::json;

namespace {

std::filesystem::path config_dir() { return std::filesystem::path(NGMPC_SOURCE_DIR) / "configs"; }

void expect_crossing_constants(const ScenarioConfig& s, double eps) {
    ASSERT_EQ(s.agents.size(), 4u);
    const Position dest[4] = {{0, 25, 0}, {0, -25, 0}, {25, 0, 0}, {-25, 0, 0}};
    const Position start[4] = {{0, -25, 0}, {0, 25, 0}, {-25, 0, 0}, {25, 0, 0}};
    for (int i = 0; i < 4; ++i) {
        EXPECT_EQ(s.agents[i].id, i + 1);
        EXPECT_EQ(s.agents[i].destination, dest[i]);
        EXPECT_EQ(s.agents[i].start, start[i]);
        EXPECT_EQ(s.agents[i].heading_policy, HeadingPolicy::face_destination);
    }
    EXPECT_EQ(s.params.epsilon, eps);
    EXPECT_EQ(s.params.d_min, 10.0);
    EXPECT_EQ(s.params.delta_s, 0.1);
    EXPECT_EQ(s.params.horizon, 10);
    EXPECT_EQ(s.params.w, 0.1);
    EXPECT_EQ(s.params.bounds.v_min, 0.0);
    EXPECT_EQ(s.params.bounds.v_max, 10.0);
    EXPECT_EQ(s.params.bounds.z_min, -10.0);
    EXPECT_EQ(s.params.bounds.z_max, 10.0);
    EXPECT_DOUBLE_EQ(s.params.bounds.psi_min, -M_PI);
    EXPECT_DOUBLE_EQ(s.params.bounds.psi_max, M_PI);
    EXPECT_EQ(s.params.dv_max, 1.0);
    EXPECT_EQ(s.params.dz_max, 1.0);
    EXPECT_EQ(s.run.steps, 80);
    EXPECT_EQ(s.run.particles, 1000);
    EXPECT_EQ(s.noise, NoiseModel::reference());
    const auto& beta = std::get<BetaDistribution>(s.noise.speed.distribution());
    EXPECT_EQ(beta.alpha, 1.0);
    EXPECT_EQ(beta.beta, 3.0);
    const auto& gauss = std::get<GaussianDistribution>(s.noise.climb.distribution());
    EXPECT_EQ(gauss.mean, 0.0);
    EXPECT_EQ(gauss.std, 0.3);
    const auto& uni = std::get<UniformDistribution>(s.noise.heading.distribution());
    EXPECT_EQ(uni.low, -0.1);
    EXPECT_EQ(uni.high, 0.1);
}

}  // namespace

TEST(Scenario, BundledCrossingConfigsMatchGolden) {
    expect_crossing_constants(load_scenario(config_dir() / "crossing_eps01.json"), 0.1);
    expect_crossing_constants(load_scenario(config_dir() / "crossing_eps001.json"), 0.01);
    EXPECT_EQ(load_scenario(config_dir() / "crossing_eps01.json"), crossing_scenario(0.1));
    EXPECT_EQ(load_scenario(config_dir() / "crossing_eps001.json"), crossing_scenario(0.01));
}

TEST(Scenario, RoundTripIsIdentity) {
    for (const char* name : {"crossing_eps01.json", "crossing_eps001.json", "single_agent.json", "zero_noise.json"}) {
        const ScenarioConfig a = load_scenario(config_dir() / name);
        const ScenarioConfig b = scenario_from_json(to_json(a));
        EXPECT_EQ(a, b) << name;
        EXPECT_EQ(to_json(a), to_json(b)) << name;
    }
    ScenarioConfig c = crossing_scenario(0.1);
    c.agents[2].heading_policy = HeadingPolicy::fixed;
    c.agents[2].heading = 0.75;
    c.params.solver.kkt_tolerance = 3e-5;
    c.run.seed = 123456789012345ull;
    c.noise.climb = NoiseSpec::uniform(NoiseChannel::altitude_z, -0.2, 0.4);
    EXPECT_EQ(scenario_from_json(to_json(c)), c);
}

TEST(Scenario, InitialHeadingFacesDestination) {
    const ScenarioConfig s = crossing_scenario(0.1);
    EXPECT_DOUBLE_EQ(s.agents[0].initial_heading(), M_PI / 2);
    EXPECT_DOUBLE_EQ(s.agents[1].initial_heading(), -M_PI / 2);
    EXPECT_DOUBLE_EQ(s.agents[2].initial_heading(), 0.0);
    EXPECT_DOUBLE_EQ(std::abs(s.agents[3].initial_heading()), M_PI);
}

TEST(Scenario, RejectsDuplicateAndUnsortedIds) {
    json j = to_json(crossing_scenario(0.1));
    j["agents"][1]["id"] = 1;
    EXPECT_THROW(scenario_from_json(j), ConfigurationError);
    j = to_json(crossing_scenario(0.1));
    std::swap(j["agents"][0], j["agents"][1]);
    EXPECT_THROW(scenario_from_json(j), ConfigurationError);
}

TEST(Scenario, RejectsBadValues) {
    const json base = to_json(crossing_scenario(0.1));
    auto with = [&](const json::json_pointer& ptr, const json& v) {
        json j = base;
        j[ptr] = v;
        return j;
    };
    EXPECT_THROW(scenario_from_json(with("/params/epsilon"_json_pointer, 0.0)), ConfigurationError);
    EXPECT_THROW(scenario_from_json(with("/params/epsilon"_json_pointer, 1.0)), ConfigurationError);
    EXPECT_THROW(scenario_from_json(with("/params/d_min"_json_pointer, -1.0)), ConfigurationError);
    EXPECT_THROW(scenario_from_json(with("/params/horizon"_json_pointer, 0)), ConfigurationError);
    EXPECT_THROW(scenario_from_json(with("/params/bounds/v"_json_pointer, json::array({5.0, 1.0}))), ConfigurationError);
    EXPECT_THROW(scenario_from_json(with("/run/steps"_json_pointer, 0)), ConfigurationError);
    EXPECT_THROW(scenario_from_json(with("/run/particles"_json_pointer, 1.5)), ConfigurationError);
    EXPECT_THROW(scenario_from_json(with("/noise/speed/type"_json_pointer, "cauchy")), ConfigurationError);
    EXPECT_THROW(scenario_from_json(with("/agents/0/start"_json_pointer, json::array({1.0, 2.0}))), ConfigurationError);
    EXPECT_THROW(scenario_from_json(with("/params/typo"_json_pointer, 1.0)), ConfigurationError);
    EXPECT_THROW(scenario_from_json(with("/agents"_json_pointer, json::array())), ConfigurationError);
    EXPECT_THROW(load_scenario(config_dir() / "does_not_exist.json"), ConfigurationError);
}

TEST(Scenario, DefaultsFillMissingSections) {
    const json j = {{"agents", json::array({{{"id", 7}, {"start", {0, 0, 0}}, {"destination", {10, 0, 0}}}})}};
    const ScenarioConfig s = scenario_from_json(j);
    EXPECT_EQ(s.agents.size(), 1u);
    EXPECT_EQ(s.params.horizon, 10);
    EXPECT_EQ(s.noise, NoiseModel::reference());
    EXPECT_EQ(s.index_of(7), 0u);
    EXPECT_THROW(s.index_of(3), ConfigurationError);
}
