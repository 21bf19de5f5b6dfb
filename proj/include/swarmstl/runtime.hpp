#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "swarmstl/planner.hpp"
#include "swarmstl/scenario.hpp"
#include "swarmstl/stl.hpp"

namespace swarmstl::rt {

struct Trace {
  int dim = 2;
  double dt = 0.0;
  std::vector<double> t;
  std::vector<int> swarm_ids;   // per swarm
  std::vector<int> swarm_of;    // per agent: swarm position
  std::vector<int> local_index;  // per agent: index inside its swarm
  std::vector<Mat> pos, vel;     // per sample: d x N
  // Only present for simulated traces.
  std::vector<std::vector<int>> segment;   // per sample, per swarm: active shape index k
  std::vector<std::vector<Mat>> shapes;    // per swarm, per k
  struct Transition {
    double t;
    int swarm, k;  // shape k -> k + 1
    Mat pos;       // d x |N_s| after the remap
  };
  std::vector<Transition> transitions;

  int num_agents() const { return static_cast<int>(swarm_of.size()); }
  int num_samples() const { return static_cast<int>(t.size()); }
  bool has_shapes() const { return !shapes.empty(); }
  Vec centroid(int sample, int swarm) const;
};

// End of the simulated window: t0 + max(T, horizon of the scenario formula).
double trace_end(const Scenario& sc);
double min_segment_duration(const plan::PlanPath& path);
double default_dt(const plan::PlanPath& path, const Scenario& sc);
double max_dt(const plan::PlanPath& path, const Scenario& sc);

// Executes the plan with every agent applying the centroid control.
// dt <= 0 selects default_dt. The grid is adjusted to end exactly at trace_end.
Trace simulate(const plan::PlanPath& path, const Scenario& sc, double dt = 0.0);

struct ConjunctVerdict {
  std::string formula;
  bool satisfied = false;
};

struct StlReport {
  bool satisfied = false;
  std::vector<ConjunctVerdict> conjuncts;
};

// Discrete-time semantics on the sample grid with swarm predicates counted per sample.
StlReport monitor_stl(const Trace& tr, const stl::FormulaPtr& f, const std::map<std::string, Polytope>& regions);

struct SafetyReport {
  double min_distance = 1e300;
  double first_distance_violation = -1;  // time, -1 if none
  double min_obstacle_margin = 1e300;
  double first_obstacle_violation = -1;
  double max_membership = 0.0;  // only with shapes
  double first_membership_violation = -1;
  double min_transition_distance = 1e300;
  double max_transition_membership = 0.0;
  double first_transition_violation = -1;
  bool distance_ok = true, obstacle_ok = true, membership_ok = true, transition_ok = true;
  bool ok() const { return distance_ok && obstacle_ok && membership_ok && transition_ok; }
};

inline constexpr double kDistanceTol = 1e-9;
inline constexpr double kObstacleTol = 1e-9;
inline constexpr double kMembershipTol = 1e-9;

SafetyReport monitor_safety(const Trace& tr, const Scenario& sc);

void write_trace_csv(std::ostream& os, const Trace& tr);
// Throws std::runtime_error with the offending line on malformed input.
Trace read_trace_csv(std::istream& is, const Scenario& sc);

// Gives a CSV trace the plan's shapes so membership can be monitored.
void attach_shapes(Trace& tr, const plan::PlanPath& path);

std::string report_json(const StlReport& stl, const SafetyReport& safety);

}  // namespace swarmstl::rt
