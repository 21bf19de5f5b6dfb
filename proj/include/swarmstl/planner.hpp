#pragma once

#include <map>
#include <string>
#include <vector>

#include "swarmstl/encoder.hpp"
#include "swarmstl/ellipsoid_solver.hpp"
#include "swarmstl/milp.hpp"
#include "swarmstl/scenario.hpp"
#include "swarmstl/stl.hpp"

namespace swarmstl::plan {

struct Waypoint {
  double t = 0.0;
  Vec p;
  Mat sigma;  // shape used on the segment ending here (initial shape at k = 0)
};

struct SwarmPath {
  int id = 0;
  std::vector<Waypoint> waypoints;
};

struct PlanPath {
  double epsilon = 0.0;
  std::vector<SwarmPath> swarms;
  // F/U witness times in lifted-formula preorder; NaN where unused
  std::vector<double> witnesses;
};

std::string to_json(const PlanPath& p);
PlanPath path_from_json(const std::string& text);

struct Options {
  int tau_max = 0;  // 0 = scenario value
  long node_limit = 20000;
  double milp_time_limit = 120.0;
  long stall_nodes = 2000;
  long restart_nodes = 0;
  // Iterations after the first rerun the MILP with randomized restarts (seed = iteration).
  long retry_restart_nodes = 300;
  bool most_fractional = false;
  bool guided = true;
  int max_lazy_rounds = 60;
  bool lazy = true;
  ell::Options ellipsoid;
};

struct IterationLog {
  int iteration = 0;
  std::string milp_status;
  long nodes = 0;
  int lazy_rounds = 0;
  int groups_active = 0;
  double eps_milp = 0.0;
  std::string ellipsoid_status;
  double eps_ellipsoid = 0.0;
  double milp_seconds = 0.0;
  double ellipsoid_seconds = 0.0;
};

struct Certificate {
  std::map<std::string, double> worst;  // family -> worst slack
  bool ok = true;
  std::string first_failure;
};

enum class Status { Success, Failure };

struct PlanResult {
  Status status = Status::Failure;
  std::string reason;  // failure reason; failures are "unknown", never "unsatisfiable"
  bool has_path = false;
  PlanPath path;
  int iterations = 0;
  std::vector<IterationLog> log;
  Certificate certificate;
  enc::BigMAudit big_m;
};

// Alternate the MILP and ellipsoid stages until eps >= 0 or tau_max.
PlanResult plan(const Scenario& sc, const stl::FormulaPtr& formula, const Options& opt = {});

// Direct re-evaluation of every constraint family of a path.
Certificate audit_path(const PlanPath& path, const Scenario& sc, const stl::LiftedPtr& lifted,
                       double tol = 1e-6);

stl::LiftedPtr lift_for(const Scenario& sc, const stl::FormulaPtr& formula);

}  // namespace swarmstl::plan
