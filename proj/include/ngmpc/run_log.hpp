#pragma once

// RunLog persistence. The log is JSON Lines:
//   {"type":"header","format":1,"seed":...,"config":{...}}
//   {"type":"step","step":k,"agents":[...],"mean_distances":[[a,b,d],...]}   (one per step)
//   {"type":"end","aborted":false,"abort_reason":"","final_states":[[x,y,z,psi],...]}
// Doubles are written with round-trip precision and no wall-clock fields are
// stored, so equal runs produce byte-identical files.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "ngmpc/coordinator.hpp"

namespace ngmpc {

inline constexpr int kRunLogFormat = 1;

void write_run_log(const RunLog& log, std::ostream& out);
void save_run_log(const RunLog& log, const std::filesystem::path& path);

// Throws ConfigurationError on unreadable, truncated or malformed logs.
RunLog read_run_log(std::istream& in);
RunLog load_run_log(const std::filesystem::path& path);

// step,uav,x,y,z,psi,u_v,u_z,u_psi; the row for step K holds the final state
// with empty control cells.
void write_trajectories_csv(const RunLog& log, std::ostream& out);
// step,uav_a,uav_b,mean_distance
void write_distances_csv(const RunLog& log, std::ostream& out);

// Positions at times 0, ds, ..., K ds of one agent (index in planning order).
std::vector<TrueState> state_history(const RunLog& log, std::size_t agent);

}  // namespace ngmpc
