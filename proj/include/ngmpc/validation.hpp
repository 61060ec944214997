#pragma once

// Checks on finished runs and on the moment machinery: propagated moments
// against sampling, Monte Carlo replay of logged plans, and run summaries.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ngmpc/coordinator.hpp"

namespace ngmpc {

// Replaces one mixed trigonometric table entry before propagation. Only used
// to show that the moment check catches a wrong table.
struct TableCorruption {
    NoiseChannel channel = NoiseChannel::speed_v;
    TrigPowers powers{};
    double offset = 0.0;
};

struct MomentCheckOptions {
    int steps = 10;
    std::size_t samples = 1'000'000;
    std::uint64_t seed = 1;
    bool final_step_only = false;
    double threshold = 4.0;  // in standard errors
    std::optional<TableCorruption> corruption;
};

struct MomentCheckAgent {
    int uav = 0;
    std::vector<Control> controls;
    double max_deviation = 0.0;  // |propagated - sampled| / SE, worst entry
    std::string worst_entry;     // monomial label
    int worst_step = 0;
    bool pass = true;
    std::vector<MomentVector> propagated;  // m_0..m_K
};

struct MomentCheckResult {
    std::vector<MomentCheckAgent> agents;
    std::optional<ChannelTables> tables;  // as used, including any corruption
    bool pass = true;
};

// Per agent, a control sequence drawn from (seed, agent id) inside moderate
// ranges, propagated from the agent's start and compared entry by entry with
// a Monte Carlo estimate. Entries whose sampled standard error vanishes must
// agree to 1e-9 relative.
MomentCheckResult moments_check(const ScenarioConfig& scenario, const MomentCheckOptions& options);

// Propagated against Monte Carlo moments for one control sequence.
MomentCheckAgent compare_moments(const TrueState& start, const std::vector<Control>& controls,
                                 const NoiseModel& noise, const TransitionModel& model, double delta_s,
                                 const MomentCheckOptions& options, std::uint64_t stream_seed);

struct PairStepValidation {
    int step = 0;          // global step of the plans
    int horizon_step = 0;  // 1..T
    int a = 0;
    int b = 0;
    DistanceStats stats;
    bool pass = true;  // violation fraction strictly below epsilon
};

struct McValidation {
    std::vector<PairStepValidation> rows;
    std::size_t particles = 0;
    double epsilon = 0.0;
    double worst_violation = 0.0;
    int worst_step = 0;
    int worst_horizon_step = 0;
    int worst_a = 0;
    int worst_b = 0;
    double min_distance = 0.0;  // over all particles, pairs and horizons
    bool pass = true;
};

// For every logged step, rolls each agent's plan out from its logged state
// under fresh noise and measures pairwise particle distances per horizon
// step. Particle streams depend on (seed, step, agent id, particle).
// Throws ConfigurationError on an empty or aborted log.
McValidation mc_validate(const RunLog& log, std::size_t particles, std::uint64_t seed);

void write_mc_csv(const McValidation& v, std::ostream& out);

// Histogram of the sampled clearance d^2 - d_min^2 for one pair at one
// horizon step, on the same particle streams as mc_validate.
struct ClearanceHistogram {
    int step = 0;
    int horizon_step = 0;
    int a = 0;
    int b = 0;
    double low = 0.0;
    double width = 0.0;
    std::vector<std::size_t> counts;
};

ClearanceHistogram clearance_histogram(const RunLog& log, std::size_t particles, std::uint64_t seed, int step,
                                       int horizon_step, int a, int b, int bins = 40);
// bin_low,bin_high,count
void write_histogram_csv(const ClearanceHistogram& h, std::ostream& out);

// channel,p,q,r,delta,value
void write_tables_csv(const ChannelTables& tables, std::ostream& out);
// uav,step,monomial,value
void write_moments_csv(const MomentCheckResult& r, std::ostream& out);

struct AgentReport {
    int uav = 0;
    double arrival_error = 0.0;  // final distance to the destination, m
    double arrival_time = 0.0;   // s; NaN when the agent never settles within the radius
    double path_length = 0.0;    // m, along the logged states
    int fallbacks = 0;
    double mean_iterations = 0.0;
    int max_iterations = 0;
    double worst_bound = 0.0;
};

struct PairReport {
    int a = 0;
    int b = 0;
    double min_mean_distance = 0.0;
    int step_of_min = 0;
};

struct RunReport {
    std::string name;
    int steps = 0;
    bool aborted = false;
    std::vector<AgentReport> agents;
    std::vector<PairReport> pairs;
    double arrival_spread = 0.0;  // slowest minus fastest arrival time, s
    double min_mean_distance = 0.0;
    int fallbacks = 0;
};

// Arrival time is the first logged time from which the agent stays within
// arrival_radius of its destination until the end of the run.
RunReport make_report(const RunLog& log, double arrival_radius = 1.0);
void print_report(const RunReport& r, std::ostream& out);
// kind,uav_a,uav_b,arrival_error,arrival_time,path_length,fallbacks,mean_iterations,max_iterations,worst_bound,min_mean_distance,step_of_min
void write_report_csv(const RunReport& r, std::ostream& out);

}  // namespace ngmpc
