#pragma once

// Experiment description: agents, noise, planner limits, run length and
// seeds. Stored as a JSON document; see README for the schema.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "ngmpc/control.hpp"
#include "ngmpc/noise_moments.hpp"
#include "ngmpc/planner.hpp"

namespace ngmpc {

enum class HeadingPolicy { face_destination, fixed };

struct AgentConfig {
    int id = 0;
    Position start;
    Position destination;
    HeadingPolicy heading_policy = HeadingPolicy::face_destination;
    double heading = 0.0;  // rad, used with HeadingPolicy::fixed

    double initial_heading() const;
    bool operator==(const AgentConfig&) const = default;
};

struct RunConfig {
    int steps = 80;
    std::uint64_t seed = 1;
    int particles = 1000;
    int starts = 4;

    bool operator==(const RunConfig&) const = default;
};

struct ScenarioConfig {
    std::string name;
    std::vector<AgentConfig> agents;  // ascending id = planning order
    NoiseModel noise = NoiseModel::reference();
    PlannerParams params;             // previous_control is ignored; runs start at rest
    RunConfig run;

    // Throws ConfigurationError.
    void validate() const;
    std::size_t index_of(int agent_id) const;
};

bool operator==(const ScenarioConfig& a, const ScenarioConfig& b);

// Parsing validates; errors carry the offending key.
ScenarioConfig scenario_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ScenarioConfig& s);
ScenarioConfig load_scenario(const std::filesystem::path& path);
void save_scenario(const ScenarioConfig& s, const std::filesystem::path& path);

nlohmann::json to_json(const NoiseSpec& spec);
NoiseSpec noise_spec_from_json(NoiseChannel channel, const nlohmann::json& j);

// Four UAVs on a 25 m circle swapping to the opposite point.
ScenarioConfig crossing_scenario(double epsilon);

}  // namespace ngmpc
