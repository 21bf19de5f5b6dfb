#pragma once

#include <cmath>
#include <json.hpp>
#include <random>
#include <string>
#include <vector>

#include "swarmstl/runtime.hpp"
#include "swarmstl/scenario.hpp"

namespace testing {

using nlohmann::json;

inline std::string scenario_path(const std::string& name) { return std::string(SWARMSTL_SCENARIO_DIR) + "/" + name; }

inline json box_json(double x0, double x1, double y0, double y1) {
  return {{"rows",
           {{{"a", {1, 0}}, {"b", -x0}},
            {{"a", {-1, 0}}, {"b", x1}},
            {{"a", {0, 1}}, {"b", -y0}},
            {{"a", {0, -1}}, {"b", y1}}}}};
}

inline json constants_json(double horizon = 10.0, int tau_max = 3) {
  return {{"eta", 0.05}, {"zeta", 0.01}, {"chi", 1.0}, {"xi", 1.5}, {"horizon", horizon}, {"t0", 0.0},
          {"tau_max", tau_max}};
}

// Agents on a circle of radius r around c (a single agent sits at c).
inline json swarm_json(int id, int segments, double cx, double cy, int n, double r = 0.03, double sigma = 0.01) {
  json agents = json::array();
  for (int i = 0; i < n; ++i) {
    double a = 2 * 3.14159265358979323846 * i / n;
    double x = n == 1 ? cx : cx + r * std::cos(a), y = n == 1 ? cy : cy + r * std::sin(a);
    agents.push_back({{"p", {x, y}}, {"v", {0, 0}}});
  }
  return {{"id", id}, {"segments", segments}, {"agents", agents}, {"sigma_init", {sigma, 0, 0, sigma}}};
}

inline json arena_json() { return json::array({box_json(0, 10, 0, 10)}); }

// Trace with one swarm of agents whose positions are given per sample.
inline swarmstl::rt::Trace make_trace(double dt, const std::vector<std::vector<swarmstl::Vec>>& samples) {
  swarmstl::rt::Trace tr;
  tr.dim = static_cast<int>(samples.front().front().size());
  tr.dt = dt;
  const int n = static_cast<int>(samples.front().size());
  tr.swarm_ids = {1};
  for (int a = 0; a < n; ++a) {
    tr.swarm_of.push_back(0);
    tr.local_index.push_back(a);
  }
  for (std::size_t i = 0; i < samples.size(); ++i) {
    tr.t.push_back(dt * static_cast<double>(i));
    swarmstl::Mat P(tr.dim, n), V = swarmstl::Mat::Zero(tr.dim, n);
    for (int a = 0; a < n; ++a) P.col(a) = samples[i][a];
    tr.pos.push_back(P);
    tr.vel.push_back(V);
  }
  return tr;
}

inline swarmstl::Vec v2(double x, double y) {
  swarmstl::Vec v(2);
  v << x, y;
  return v;
}

}  // namespace testing
