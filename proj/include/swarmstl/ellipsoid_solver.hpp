#pragma once

#include <vector>

#include "swarmstl/encoder.hpp"

namespace swarmstl::ell {

struct Options {
  int stages = 8;
  int newton_per_stage = 200;
  double t_init = 1.0;
  double t_factor = 10.0;
  double diag_min = 1e-6;
};

enum class Status { Optimal, WarmStart, Infeasible };
const char* to_string(Status s);

struct Result {
  Status status = Status::Infeasible;
  std::vector<Mat> sigma;  // per free ellipsoid
  double epsilon = 0.0;
  int newton_steps = 0;
};

// Largest eps allowed by the rows for fixed shapes (capped); -inf if a row without eps fails.
double epsilon_of(const enc::EllipsoidProblem& p, const std::vector<Mat>& sigma);

// Largest violation of volume, spacing and positivity constraints (0 when all hold).
double shape_violation(const enc::EllipsoidProblem& p, const std::vector<Mat>& sigma, double diag_min = 1e-6);

// Maximize eps by a log-barrier method over lower-triangular factors.
// Falls back to the warm start when the barrier result is not better.
Result solve_ellipsoids(const enc::EllipsoidProblem& p, const Options& opt = {});

}  // namespace swarmstl::ell
