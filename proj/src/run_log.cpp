#include "ngmpc/run_log.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include "json.hpp"
#include "ngmpc/errors.hpp"

namespace ngmpc {

using nlohmann::json;

namespace {

json triple(const Control& u) { return json::array({u.v, u.z, u.psi}); }
json triple(const NoiseSample& w) { return json::array({w.v, w.z, w.psi}); }
json quad(const TrueState& s) { return json::array({s.x, s.y, s.z, s.psi}); }

[[noreturn]] void corrupt(const std::string& what) { throw ConfigurationError("run log: " + what); }

const json& field(const json& j, const char* key) {
    if (!j.is_object() || !j.contains(key)) corrupt(std::string("missing field '") + key + "'");
    return j.at(key);
}

std::vector<double> numbers(const json& j, std::size_t n, const char* what) {
    if (!j.is_array() || j.size() != n) corrupt(std::string("bad ") + what);
    std::vector<double> out;
    for (const json& v : j) {
        if (!v.is_number()) corrupt(std::string("non-numeric ") + what);
        out.push_back(v.get<double>());
    }
    return out;
}

Control control_from(const json& j) {
    const auto v = numbers(j, 3, "control");
    return {v[0], v[1], v[2]};
}

TrueState state_from(const json& j) {
    const auto v = numbers(j, 4, "state");
    return {v[0], v[1], v[2], v[3]};
}

std::vector<Control> controls_from(const json& j) {
    if (!j.is_array()) corrupt("bad control list");
    std::vector<Control> out;
    for (const json& u : j) out.push_back(control_from(u));
    return out;
}

json plan_to_json(const HorizonPlan& p) {
    json controls = json::array(), slacks = json::array(), moments = json::array();
    for (const Control& u : p.controls) controls.push_back(triple(u));
    for (const Control& u : p.slacks) slacks.push_back(triple(u));
    for (const MomentVector& m : p.moments) moments.push_back(m.values);
    const PlanMetadata& md = p.meta;
    return {{"owner", p.owner},
            {"planned_at", p.planned_at},
            {"controls", controls},
            {"slacks", slacks},
            {"moments", moments},
            {"meta",
             {{"fallback", md.fallback},
              {"feasible", md.feasible},
              {"objective", md.objective},
              {"max_violation", md.max_violation},
              {"worst_bound", md.worst_bound},
              {"iterations", md.iterations},
              {"starts_tried", md.starts_tried},
              {"winning_start", md.winning_start},
              {"note", md.note}}}};
}

HorizonPlan plan_from_json(const json& j) {
    HorizonPlan p;
    p.owner = field(j, "owner").get<int>();
    p.planned_at = field(j, "planned_at").get<int>();
    p.controls = controls_from(field(j, "controls"));
    p.slacks = controls_from(field(j, "slacks"));
    const json& ms = field(j, "moments");
    if (!ms.is_array() || ms.size() != p.controls.size() + 1) corrupt("plan moments do not match the horizon");
    for (std::size_t k = 0; k < ms.size(); ++k) {
        const auto v = numbers(ms[k], kBasisSize, "moment vector");
        MomentVector m;
        std::copy(v.begin(), v.end(), m.values.begin());
        m.time_step = static_cast<int>(k);
        p.moments.push_back(m);
    }
    const json& md = field(j, "meta");
    p.meta.fallback = field(md, "fallback").get<bool>();
    p.meta.feasible = field(md, "feasible").get<bool>();
    p.meta.objective = field(md, "objective").get<double>();
    p.meta.max_violation = field(md, "max_violation").get<double>();
    p.meta.worst_bound = field(md, "worst_bound").get<double>();
    p.meta.iterations = field(md, "iterations").get<int>();
    p.meta.starts_tried = field(md, "starts_tried").get<int>();
    p.meta.winning_start = field(md, "winning_start").get<int>();
    p.meta.note = field(md, "note").get<std::string>();
    return p;
}

json step_to_json(const StepRecord& r) {
    json agents = json::array();
    for (const AgentStepRecord& a : r.agents) {
        json consumed = json::array();
        for (const ConsumedPlan& c : a.consumed) consumed.push_back({c.sender, c.planned_at});
        agents.push_back({{"uav", a.uav},
                          {"state", quad(a.state)},
                          {"applied", triple(a.applied)},
                          {"noise", triple(a.noise)},
                          {"consumed", consumed},
                          {"plan", plan_to_json(a.plan)}});
    }
    json distances = json::array();
    for (const PairDistance& d : r.mean_distances) distances.push_back({d.a, d.b, d.distance});
    return {{"type", "step"}, {"step", r.step}, {"agents", agents}, {"mean_distances", distances}};
}

StepRecord step_from_json(const json& j) {
    StepRecord r;
    r.step = field(j, "step").get<int>();
    for (const json& a : field(j, "agents")) {
        AgentStepRecord ar;
        ar.uav = field(a, "uav").get<int>();
        ar.state = state_from(field(a, "state"));
        ar.applied = control_from(field(a, "applied"));
        const auto w = numbers(field(a, "noise"), 3, "noise sample");
        ar.noise = {w[0], w[1], w[2]};
        for (const json& c : field(a, "consumed")) {
            if (!c.is_array() || c.size() != 2) corrupt("bad consumed entry");
            ar.consumed.push_back({c[0].get<int>(), c[1].get<int>()});
        }
        ar.plan = plan_from_json(field(a, "plan"));
        r.agents.push_back(std::move(ar));
    }
    for (const json& d : field(j, "mean_distances")) {
        if (!d.is_array() || d.size() != 3) corrupt("bad distance entry");
        r.mean_distances.push_back({d[0].get<int>(), d[1].get<int>(), d[2].get<double>()});
    }
    return r;
}

}  // namespace

void write_run_log(const RunLog& log, std::ostream& out) {
    out << json{{"type", "header"}, {"format", kRunLogFormat}, {"seed", log.seed}, {"config", to_json(log.config)}}.dump()
        << '\n';
    for (const StepRecord& r : log.steps) out << step_to_json(r).dump() << '\n';
    json finals = json::array();
    for (const TrueState& s : log.final_states) finals.push_back(quad(s));
    out << json{{"type", "end"}, {"aborted", log.aborted}, {"abort_reason", log.abort_reason}, {"final_states", finals}}
               .dump()
        << '\n';
}

void save_run_log(const RunLog& log, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw ConfigurationError("cannot write run log " + path.string());
    write_run_log(log, out);
}

RunLog read_run_log(std::istream& in) {
    RunLog log;
    std::string line;
    bool header = false, end = false;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        if (end) corrupt("records after the end record");
        json j;
        try {
            j = json::parse(line);
            const std::string type = field(j, "type").get<std::string>();
            if (type == "header") {
                if (header) corrupt("duplicate header");
                if (field(j, "format").get<int>() != kRunLogFormat) corrupt("unsupported format");
                log.seed = field(j, "seed").get<std::uint64_t>();
                log.config = scenario_from_json(field(j, "config"));
                header = true;
            } else if (!header) {
                corrupt("missing header");
            } else if (type == "step") {
                log.steps.push_back(step_from_json(j));
                if (log.steps.back().step != static_cast<int>(log.steps.size()) - 1) corrupt("steps out of order");
            } else if (type == "end") {
                log.aborted = field(j, "aborted").get<bool>();
                log.abort_reason = field(j, "abort_reason").get<std::string>();
                for (const json& s : field(j, "final_states")) log.final_states.push_back(state_from(s));
                end = true;
            } else {
                corrupt("unknown record type '" + type + "'");
            }
        } catch (const json::exception& e) {
            corrupt("line " + std::to_string(line_no) + ": " + e.what());
        } catch (const ConfigurationError& e) {
            throw ConfigurationError(std::string(e.what()) + " (line " + std::to_string(line_no) + ")");
        }
    }
    if (!header) corrupt("empty log");
    if (!end) corrupt("truncated log (no end record)");
    if (log.final_states.size() != log.config.agents.size()) corrupt("final states do not match the agents");
    for (const StepRecord& r : log.steps) {
        if (r.agents.size() != log.config.agents.size()) corrupt("step " + std::to_string(r.step) + " agent count");
    }
    return log;
}

RunLog load_run_log(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigurationError("cannot open run log " + path.string());
    return read_run_log(in);
}

std::vector<TrueState> state_history(const RunLog& log, std::size_t agent) {
    std::vector<TrueState> out;
    for (const StepRecord& r : log.steps) out.push_back(r.agents.at(agent).state);
    out.push_back(log.final_states.at(agent));
    return out;
}

void write_trajectories_csv(const RunLog& log, std::ostream& out) {
    out.precision(17);
    out << "step,uav,x,y,z,psi,u_v,u_z,u_psi\n";
    for (const StepRecord& r : log.steps) {
        for (const AgentStepRecord& a : r.agents) {
            out << r.step << ',' << a.uav << ',' << a.state.x << ',' << a.state.y << ',' << a.state.z << ','
                << a.state.psi << ',' << a.applied.v << ',' << a.applied.z << ',' << a.applied.psi << '\n';
        }
    }
    for (std::size_t i = 0; i < log.final_states.size(); ++i) {
        const TrueState& s = log.final_states[i];
        out << log.steps.size() << ',' << log.config.agents[i].id << ',' << s.x << ',' << s.y << ',' << s.z << ','
            << s.psi << ",,,\n";
    }
}

void write_distances_csv(const RunLog& log, std::ostream& out) {
    out.precision(17);
    out << "step,uav_a,uav_b,mean_distance\n";
    for (const StepRecord& r : log.steps) {
        for (const PairDistance& d : r.mean_distances) out << r.step << ',' << d.a << ',' << d.b << ',' << d.distance << '\n';
    }
}

}  // namespace ngmpc
