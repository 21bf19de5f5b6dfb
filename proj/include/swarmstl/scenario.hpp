#pragma once

#include <Eigen/Dense>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace swarmstl {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

struct AgentState {
  Vec p;
  Vec v;
};

// a.p + b >= 0
struct Halfspace {
  Vec a;
  double b = 0.0;
};

// {p : F_r p + g_r >= 0 for all r}
struct Polytope {
  std::vector<Halfspace> rows;

  bool contains(const Vec& p, double tol = 0.0) const;
  // min_r (F_r p + g_r); >= 0 inside
  double value(const Vec& p) const;
};

struct SwarmSpec {
  int id = 0;
  int segments = 1;
  std::vector<AgentState> agents;
  std::optional<Mat> sigma_init;

  int size() const { return static_cast<int>(agents.size()); }
  Vec centroid() const;
};

struct PlannerConstants {
  double eta = 0.05;
  double zeta = 0.01;
  double chi = 1.0;
  double xi = 2.0;
  double horizon = 10.0;
  double t0 = 0.0;
  int tau_max = 5;
  double big_m = 0.0;
  bool big_m_given = false;
};

struct Scenario {
  int dimension = 2;
  PlannerConstants constants;
  std::vector<SwarmSpec> swarms;
  // safe polytopes: every agent must stay inside each of them
  std::vector<Polytope> obstacles;
  std::map<std::string, Polytope> regions;
  std::string formula;

  int total_agents() const;
  std::vector<int> swarm_sizes() const;
  // global agent index of agent i in swarm s (swarm-major order)
  int agent_index(int s, int i) const;
};

struct ScenarioError : std::runtime_error {
  ScenarioError(const std::string& path, const std::string& msg)
      : std::runtime_error(path + ": " + msg), field(path) {}
  std::string field;
};

Scenario load_scenario(const std::string& json_text);
Scenario load_scenario_file(const std::string& path);
std::string serialize_scenario(const Scenario& s);

// Throws ScenarioError when an invariant is broken.
void check_invariants(const Scenario& s);

struct InitialReport {
  struct Pair {
    int swarm, i, j;
    double distance;
  };
  struct Outside {
    int swarm, i;
    double value;  // (p - c)^T Sigma^-1 (p - c)
  };
  std::vector<Pair> close_pairs;
  std::vector<Outside> outside;
  std::vector<int> moving_swarms;  // nonzero initial velocities
  bool ok() const { return close_pairs.empty() && outside.empty(); }
};

InitialReport validate_initial_configuration(const Scenario& s);

// Ellipsoid shape used before the first segment.
Mat initial_sigma(const Scenario& sc, int s);

struct Box {
  Vec lo, hi;
  double diameter() const { return (hi - lo).norm(); }
};

// Bounding box of initial agents plus every bounded region and obstacle.
Box workspace_box(const Scenario& s);

// Default big-M: 1e3 * (workspace diameter + chi * T).
double default_big_m(const Scenario& s);

// true if the polytope has a feasible point (LP check)
bool polytope_nonempty(const Polytope& poly, int dim);

}  // namespace swarmstl
