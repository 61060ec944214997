#include "ngmpc/scenario.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <variant>
#include <sstream>

#include "ngmpc/errors.hpp"

namespace ngmpc {

using nlohmann::json;

namespace {

[[noreturn]] void config_error(const std::string& where, const std::string& what) {
    throw ConfigurationError(where + ": " + what);
}

void reject_unknown(const json& j, const std::string& where, std::initializer_list<const char*> keys) {
    if (!j.is_object()) config_error(where, "expected an object");
    for (const auto& [k, _] : j.items()) {
        bool known = false;
        for (const char* key : keys) known = known || k == key;
        if (!known) config_error(where, "unknown key '" + k + "'");
    }
}

double number(const json& j, const std::string& where) {
    if (!j.is_number()) config_error(where, "expected a number");
    return j.get<double>();
}

template <class T>
T integer(const json& j, const std::string& where) {
    if (!j.is_number_integer() && !j.is_number_unsigned()) config_error(where, "expected an integer");
    return j.get<T>();
}

template <class Fn>
void optional(const json& j, const char* key, Fn&& fn) {
    if (j.contains(key)) fn(j.at(key));
}

Position position(const json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 3) config_error(where, "expected [x, y, z]");
    return {number(j[0], where), number(j[1], where), number(j[2], where)};
}

json to_json(const Position& p) { return json::array({p.x, p.y, p.z}); }

std::pair<double, double> range(const json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 2) config_error(where, "expected [low, high]");
    return {number(j[0], where), number(j[1], where)};
}

}  // namespace

double AgentConfig::initial_heading() const {
    if (heading_policy == HeadingPolicy::fixed) return heading;
    const double dx = destination.x - start.x;
    const double dy = destination.y - start.y;
    return (dx == 0.0 && dy == 0.0) ? 0.0 : std::atan2(dy, dx);
}

void ScenarioConfig::validate() const {
    if (agents.empty()) config_error("agents", "at least one agent is required");
    for (std::size_t i = 0; i < agents.size(); ++i) {
        if (i > 0 && agents[i].id <= agents[i - 1].id) {
            config_error("agents", agents[i].id == agents[i - 1].id
                                       ? "duplicate id " + std::to_string(agents[i].id)
                                       : "ids must be sorted ascending (planning order)");
        }
        const AgentConfig& a = agents[i];
        for (double v : {a.start.x, a.start.y, a.start.z, a.destination.x, a.destination.y, a.destination.z, a.heading}) {
            if (!std::isfinite(v)) config_error("agents", "non-finite coordinate for agent " + std::to_string(a.id));
        }
    }
    noise.validate();
    params.validate();
    if (run.steps < 1) config_error("run.steps", "must be at least 1");
    if (run.particles < 1) config_error("run.particles", "must be at least 1");
    if (run.starts < 1) config_error("run.starts", "must be at least 1");
    const SolverOptions& s = params.solver;
    if (!(s.feasibility_tolerance > 0 && s.kkt_tolerance > 0)) config_error("solver", "tolerances must be positive");
    if (s.max_outer_iterations < 1 || s.max_inner_iterations < 1) {
        config_error("solver", "iteration caps must be positive");
    }
    if (!(s.initial_penalty > 0 && s.max_penalty >= s.initial_penalty)) config_error("solver", "bad penalty range");
}

std::size_t ScenarioConfig::index_of(int agent_id) const {
    for (std::size_t i = 0; i < agents.size(); ++i) {
        if (agents[i].id == agent_id) return i;
    }
    throw ConfigurationError("unknown agent id " + std::to_string(agent_id));
}

bool operator==(const ScenarioConfig& a, const ScenarioConfig& b) {
    auto solver_eq = [](const SolverOptions& x, const SolverOptions& y) {
        return x.feasibility_tolerance == y.feasibility_tolerance && x.kkt_tolerance == y.kkt_tolerance &&
               x.max_outer_iterations == y.max_outer_iterations && x.max_inner_iterations == y.max_inner_iterations &&
               x.initial_penalty == y.initial_penalty && x.max_penalty == y.max_penalty;
    };
    const PlannerParams& p = a.params;
    const PlannerParams& q = b.params;
    return a.name == b.name && a.agents == b.agents && a.noise.speed == b.noise.speed &&
           a.noise.climb == b.noise.climb && a.noise.heading == b.noise.heading && a.run == b.run &&
           p.horizon == q.horizon && p.delta_s == q.delta_s && p.w == q.w && p.d_min == q.d_min &&
           p.epsilon == q.epsilon && p.bounds == q.bounds && p.dv_max == q.dv_max && p.dz_max == q.dz_max &&
           solver_eq(p.solver, q.solver);
}

json to_json(const NoiseSpec& spec) {
    return std::visit(
        [](const auto& d) -> json {
            using D = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<D, BetaDistribution>) {
                return {{"type", "beta"}, {"alpha", d.alpha}, {"beta", d.beta}, {"low", d.low}, {"high", d.high}};
            } else if constexpr (std::is_same_v<D, UniformDistribution>) {
                return {{"type", "uniform"}, {"low", d.low}, {"high", d.high}};
            } else {
                return {{"type", "gaussian"}, {"mean", d.mean}, {"std", d.std}};
            }
        },
        spec.distribution());
}

NoiseSpec noise_spec_from_json(NoiseChannel channel, const json& j) {
    const std::string where = "noise." + to_string(channel);
    if (!j.is_object() || !j.contains("type") || !j.at("type").is_string()) config_error(where, "missing 'type'");
    const std::string type = j.at("type").get<std::string>();
    auto req = [&](const char* k) {
        if (!j.contains(k)) config_error(where, std::string("missing '") + k + "'");
        return number(j.at(k), where + "." + k);
    };
    if (type == "beta") {
        reject_unknown(j, where, {"type", "alpha", "beta", "low", "high"});
        double low = 0.0, high = 1.0;
        optional(j, "low", [&](const json& v) { low = number(v, where + ".low"); });
        optional(j, "high", [&](const json& v) { high = number(v, where + ".high"); });
        return NoiseSpec::beta(channel, req("alpha"), req("beta"), low, high);
    }
    if (type == "uniform") {
        reject_unknown(j, where, {"type", "low", "high"});
        return NoiseSpec::uniform(channel, req("low"), req("high"));
    }
    if (type == "gaussian") {
        reject_unknown(j, where, {"type", "mean", "std"});
        return NoiseSpec::gaussian(channel, req("mean"), req("std"));
    }
    config_error(where, "unknown distribution type '" + type + "'");
}

ScenarioConfig scenario_from_json(const json& j) {
    reject_unknown(j, "config", {"name", "agents", "noise", "params", "run", "solver"});
    ScenarioConfig s;
    optional(j, "name", [&](const json& v) {
        if (!v.is_string()) config_error("name", "expected a string");
        s.name = v.get<std::string>();
    });
    if (!j.contains("agents") || !j.at("agents").is_array()) config_error("agents", "expected a list");
    for (const json& a : j.at("agents")) {
        const std::string where = "agents[" + std::to_string(s.agents.size()) + "]";
        reject_unknown(a, where, {"id", "start", "destination", "heading"});
        AgentConfig ac;
        if (!a.contains("id") || !a.contains("start") || !a.contains("destination")) {
            config_error(where, "id, start and destination are required");
        }
        ac.id = integer<int>(a.at("id"), where + ".id");
        ac.start = position(a.at("start"), where + ".start");
        ac.destination = position(a.at("destination"), where + ".destination");
        optional(a, "heading", [&](const json& h) {
            if (h.is_string()) {
                if (h.get<std::string>() != "face_destination") config_error(where + ".heading", "unknown policy");
            } else {
                ac.heading_policy = HeadingPolicy::fixed;
                ac.heading = number(h, where + ".heading");
            }
        });
        s.agents.push_back(ac);
    }
    optional(j, "noise", [&](const json& n) {
        reject_unknown(n, "noise", {"speed", "climb", "heading"});
        optional(n, "speed", [&](const json& v) { s.noise.speed = noise_spec_from_json(NoiseChannel::speed_v, v); });
        optional(n, "climb", [&](const json& v) { s.noise.climb = noise_spec_from_json(NoiseChannel::altitude_z, v); });
        optional(n, "heading",
                 [&](const json& v) { s.noise.heading = noise_spec_from_json(NoiseChannel::heading_psi, v); });
    });
    optional(j, "params", [&](const json& p) {
        reject_unknown(p, "params", {"horizon", "delta_s", "w", "d_min", "epsilon", "bounds", "rate_limits"});
        PlannerParams& pp = s.params;
        optional(p, "horizon", [&](const json& v) { pp.horizon = integer<int>(v, "params.horizon"); });
        optional(p, "delta_s", [&](const json& v) { pp.delta_s = number(v, "params.delta_s"); });
        optional(p, "w", [&](const json& v) { pp.w = number(v, "params.w"); });
        optional(p, "d_min", [&](const json& v) { pp.d_min = number(v, "params.d_min"); });
        optional(p, "epsilon", [&](const json& v) { pp.epsilon = number(v, "params.epsilon"); });
        optional(p, "bounds", [&](const json& b) {
            reject_unknown(b, "params.bounds", {"v", "z", "psi"});
            optional(b, "v", [&](const json& v) { std::tie(pp.bounds.v_min, pp.bounds.v_max) = range(v, "params.bounds.v"); });
            optional(b, "z", [&](const json& v) { std::tie(pp.bounds.z_min, pp.bounds.z_max) = range(v, "params.bounds.z"); });
            optional(b, "psi",
                     [&](const json& v) { std::tie(pp.bounds.psi_min, pp.bounds.psi_max) = range(v, "params.bounds.psi"); });
        });
        optional(p, "rate_limits", [&](const json& r) {
            reject_unknown(r, "params.rate_limits", {"v", "z"});
            optional(r, "v", [&](const json& v) { pp.dv_max = number(v, "params.rate_limits.v"); });
            optional(r, "z", [&](const json& v) { pp.dz_max = number(v, "params.rate_limits.z"); });
        });
    });
    optional(j, "run", [&](const json& r) {
        reject_unknown(r, "run", {"steps", "seed", "particles", "starts"});
        optional(r, "steps", [&](const json& v) { s.run.steps = integer<int>(v, "run.steps"); });
        optional(r, "seed", [&](const json& v) { s.run.seed = integer<std::uint64_t>(v, "run.seed"); });
        optional(r, "particles", [&](const json& v) { s.run.particles = integer<int>(v, "run.particles"); });
        optional(r, "starts", [&](const json& v) { s.run.starts = integer<int>(v, "run.starts"); });
    });
    optional(j, "solver", [&](const json& o) {
        reject_unknown(o, "solver", {"feasibility_tolerance", "kkt_tolerance", "max_outer_iterations",
                                     "max_inner_iterations", "initial_penalty", "max_penalty"});
        SolverOptions& so = s.params.solver;
        optional(o, "feasibility_tolerance", [&](const json& v) { so.feasibility_tolerance = number(v, "solver.feasibility_tolerance"); });
        optional(o, "kkt_tolerance", [&](const json& v) { so.kkt_tolerance = number(v, "solver.kkt_tolerance"); });
        optional(o, "max_outer_iterations", [&](const json& v) { so.max_outer_iterations = integer<int>(v, "solver.max_outer_iterations"); });
        optional(o, "max_inner_iterations", [&](const json& v) { so.max_inner_iterations = integer<int>(v, "solver.max_inner_iterations"); });
        optional(o, "initial_penalty", [&](const json& v) { so.initial_penalty = number(v, "solver.initial_penalty"); });
        optional(o, "max_penalty", [&](const json& v) { so.max_penalty = number(v, "solver.max_penalty"); });
    });
    s.validate();
    return s;
}

json to_json(const ScenarioConfig& s) {
    json agents = json::array();
    for (const AgentConfig& a : s.agents) {
        json aj = {{"id", a.id}, {"start", to_json(a.start)}, {"destination", to_json(a.destination)}};
        if (a.heading_policy == HeadingPolicy::fixed) {
            aj["heading"] = a.heading;
        } else {
            aj["heading"] = "face_destination";
        }
        agents.push_back(aj);
    }
    const PlannerParams& p = s.params;
    const SolverOptions& o = p.solver;
    return {
        {"name", s.name},
        {"agents", agents},
        {"noise", {{"speed", to_json(s.noise.speed)}, {"climb", to_json(s.noise.climb)}, {"heading", to_json(s.noise.heading)}}},
        {"params",
         {{"horizon", p.horizon},
          {"delta_s", p.delta_s},
          {"w", p.w},
          {"d_min", p.d_min},
          {"epsilon", p.epsilon},
          {"bounds",
           {{"v", {p.bounds.v_min, p.bounds.v_max}},
            {"z", {p.bounds.z_min, p.bounds.z_max}},
            {"psi", {p.bounds.psi_min, p.bounds.psi_max}}}},
          {"rate_limits", {{"v", p.dv_max}, {"z", p.dz_max}}}}},
        {"run", {{"steps", s.run.steps}, {"seed", s.run.seed}, {"particles", s.run.particles}, {"starts", s.run.starts}}},
        {"solver",
         {{"feasibility_tolerance", o.feasibility_tolerance},
          {"kkt_tolerance", o.kkt_tolerance},
          {"max_outer_iterations", o.max_outer_iterations},
          {"max_inner_iterations", o.max_inner_iterations},
          {"initial_penalty", o.initial_penalty},
          {"max_penalty", o.max_penalty}}},
    };
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigurationError("cannot open config " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigurationError("config " + path.string() + " is not valid JSON: " + e.what());
    }
    return scenario_from_json(j);
}

void save_scenario(const ScenarioConfig& s, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw ConfigurationError("cannot write config " + path.string());
    out << to_json(s).dump(2) << '\n';
}

ScenarioConfig crossing_scenario(double epsilon) {
    ScenarioConfig s;
    s.name = epsilon == 0.1 ? "crossing_eps01" : epsilon == 0.01 ? "crossing_eps001" : "crossing";
    const Position dest[4] = {{0, 25, 0}, {0, -25, 0}, {25, 0, 0}, {-25, 0, 0}};
    for (int i = 0; i < 4; ++i) {
        AgentConfig a;
        a.id = i + 1;
        a.destination = dest[i];
        a.start = {0.0 - dest[i].x, 0.0 - dest[i].y, 0.0 - dest[i].z};
        s.agents.push_back(a);
    }
    s.params.epsilon = epsilon;
    s.validate();
    return s;
}

}  // namespace ngmpc
