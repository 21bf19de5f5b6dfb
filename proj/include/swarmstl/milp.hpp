#pragma once

#include <functional>
#include <ostream>
#include <vector>

#include "swarmstl/lp.hpp"

namespace swarmstl::milp {

enum class Status { Optimal, Infeasible, NodeLimit, NumericalFailure };

const char* to_string(Status s);

struct Options {
  lp::Options lp;
  double int_tol = 1e-6;
  long node_limit = 20000;
  std::ostream* node_log = nullptr;  // one line per solved node
  bool warm_start = true;
  // Depth-first search (rounding direction first) until the first incumbent,
  // then best-bound.
  bool dive_first = false;
  double time_limit = 0.0;  // seconds, 0 = none; reported as NodeLimit
  // Stop once this many nodes pass without improving the incumbent (0 = never).
  long stall_nodes = 0;
  // Preferred binary values for the dive (indexed by column; empty = rounding direction).
  std::vector<double> guide;
  // While diving without an incumbent, start a fresh dive from the root after this
  // many nodes (0 = never); the interval grows by half each time. Later dives
  // deviate from the preferred direction at random with a growing probability.
  long restart_nodes = 0;
  unsigned seed = 1;
  bool most_fractional = false;
};

struct Result {
  Status status = Status::Infeasible;
  bool has_incumbent = false;
  std::vector<double> x;
  double objective = -lp::kInf;
  double best_bound = lp::kInf;
  long nodes = 0;
};

// Branch-and-bound: best-bound node selection, depth-first tie-break,
// branching on the lowest-index fractional binary with the 0-branch first.
// Integral leaves are re-solved with binaries fixed exactly.
Result solve_milp(const lp::Problem& p, const std::vector<int>& binaries, const Options& opt = {});

// Exhaustive enumeration oracle (2^|binaries| LP solves).
Result enumerate(const lp::Problem& p, const std::vector<int>& binaries, const lp::Options& opt = {});

}  // namespace swarmstl::milp
