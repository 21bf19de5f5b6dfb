#include "swarmstl/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

#include "swarmstl/log.hpp"
#include "swarmstl/lp.hpp"

namespace swarmstl {

using json = nlohmann::json;

bool Polytope::contains(const Vec& p, double tol) const { return value(p) >= -tol; }

double Polytope::value(const Vec& p) const {
  double v = lp::kInf;
  for (auto& r : rows) v = std::min(v, r.a.dot(p) + r.b);
  return v;
}

Vec SwarmSpec::centroid() const {
  const int d = agents.empty() ? 0 : static_cast<int>(agents[0].p.size());
  Vec c = Vec::Zero(d);
  // extended accumulation so the result is the correctly rounded mean in practice
  for (int j = 0; j < d; ++j) {
    long double acc = 0;
    for (auto& a : agents) acc += a.p[j];
    c[j] = static_cast<double>(acc / static_cast<long double>(agents.size()));
  }
  return c;
}

int Scenario::total_agents() const {
  int n = 0;
  for (auto& s : swarms) n += s.size();
  return n;
}

std::vector<int> Scenario::swarm_sizes() const {
  std::vector<int> out;
  for (auto& s : swarms) out.push_back(s.size());
  return out;
}

int Scenario::agent_index(int s, int i) const {
  int base = 0;
  for (int k = 0; k < s; ++k) base += swarms[k].size();
  return base + i;
}

namespace {

const json& need(const json& j, const char* key, const std::string& path) {
  if (!j.is_object() || !j.contains(key)) throw ScenarioError(path + "." + key, "missing field");
  return j.at(key);
}

double num(const json& j, const std::string& path) {
  if (!j.is_number()) throw ScenarioError(path, "expected a number");
  double v = j.get<double>();
  if (!std::isfinite(v)) throw ScenarioError(path, "not finite");
  return v;
}

Vec vec(const json& j, int dim, const std::string& path) {
  if (!j.is_array()) throw ScenarioError(path, "expected an array");
  if (static_cast<int>(j.size()) != dim)
    throw ScenarioError(path, "expected " + std::to_string(dim) + " entries, got " + std::to_string(j.size()));
  Vec v(dim);
  for (int i = 0; i < dim; ++i) v[i] = num(j[i], path + "[" + std::to_string(i) + "]");
  return v;
}

Polytope polytope(const json& j, int dim, const std::string& path) {
  const json& rows = need(j, "rows", path);
  if (!rows.is_array() || rows.empty()) throw ScenarioError(path + ".rows", "expected a nonempty array");
  Polytope poly;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::string rp = path + ".rows[" + std::to_string(r) + "]";
    Halfspace h;
    h.a = vec(need(rows[r], "a", rp), dim, rp + ".a");
    h.b = num(need(rows[r], "b", rp), rp + ".b");
    if (h.a.norm() == 0.0) throw ScenarioError(rp + ".a", "zero normal");
    poly.rows.push_back(h);
  }
  if (!polytope_nonempty(poly, dim)) throw ScenarioError(path, "region is empty");
  return poly;
}

json vec_json(const Vec& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

json poly_json(const Polytope& p) {
  json rows = json::array();
  for (auto& r : p.rows) rows.push_back({{"a", vec_json(r.a)}, {"b", r.b}});
  return {{"rows", rows}};
}

}  // namespace

bool polytope_nonempty(const Polytope& poly, int dim) {
  lp::Problem p;
  for (int i = 0; i < dim; ++i) p.add_col(-lp::kInf, lp::kInf);
  for (auto& r : poly.rows) {
    lp::Coeffs c;
    for (int i = 0; i < dim; ++i) c.emplace_back(i, r.a[i]);
    p.add_row(c, -r.b, lp::kInf);
  }
  return lp::solve_lp(p).status == lp::Status::Optimal;
}

Mat initial_sigma(const Scenario& sc, int s) {
  const auto& sw = sc.swarms[s];
  if (sw.sigma_init) return *sw.sigma_init;
  const int d = sc.dimension;
  const auto& c = sc.constants;
  double r = std::pow(c.xi * sw.size() * std::pow(c.zeta, d), 2.0 / d);
  return r * Mat::Identity(d, d);
}

void check_invariants(const Scenario& s) {
  const auto& c = s.constants;
  if (s.dimension < 1) throw ScenarioError("$.dimension", "must be >= 1");
  if (!(c.eta >= 0)) throw ScenarioError("$.constants.eta", "must be >= 0");
  if (!(c.zeta > 0)) throw ScenarioError("$.constants.zeta", "must be > 0");
  if (!(c.chi > 0)) throw ScenarioError("$.constants.chi", "must be > 0");
  if (!(c.xi > 1)) throw ScenarioError("$.constants.xi", "must be > 1");
  if (!(c.horizon > 0)) throw ScenarioError("$.constants.horizon", "must be > 0");
  if (c.tau_max < 1) throw ScenarioError("$.constants.tau_max", "must be >= 1");
  if (!(c.big_m > 0)) throw ScenarioError("$.constants.big_m", "must be > 0");
  if (s.swarms.empty()) throw ScenarioError("$.swarms", "at least one swarm required");
  std::set<int> ids;
  for (std::size_t k = 0; k < s.swarms.size(); ++k) {
    const auto& sw = s.swarms[k];
    std::string path = "$.swarms[" + std::to_string(k) + "]";
    if (!ids.insert(sw.id).second) throw ScenarioError(path + ".id", "duplicate swarm id");
    if (sw.agents.empty()) throw ScenarioError(path + ".agents", "swarm has no agents");
    if (sw.segments < 0) throw ScenarioError(path + ".segments", "must be >= 0");
    for (std::size_t i = 0; i < sw.agents.size(); ++i) {
      const auto& a = sw.agents[i];
      if (a.p.size() != s.dimension || a.v.size() != s.dimension)
        throw ScenarioError(path + ".agents[" + std::to_string(i) + "]", "dimension mismatch");
    }
    if (sw.sigma_init) {
      const Mat& m = *sw.sigma_init;
      if (m.rows() != s.dimension || m.cols() != s.dimension)
        throw ScenarioError(path + ".sigma_init", "must be d x d");
      if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12)
        throw ScenarioError(path + ".sigma_init", "must be symmetric");
      Eigen::SelfAdjointEigenSolver<Mat> es(m);
      if (es.eigenvalues().minCoeff() <= 0) throw ScenarioError(path + ".sigma_init", "must be positive definite");
    }
  }
}

Scenario load_scenario(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ScenarioError("$", std::string("malformed JSON: ") + e.what());
  }
  Scenario s;
  const json& dim = need(j, "dimension", "$");
  if (!dim.is_number_integer()) throw ScenarioError("$.dimension", "expected an integer");
  s.dimension = dim.get<int>();
  if (s.dimension < 1) throw ScenarioError("$.dimension", "must be >= 1");
  const int d = s.dimension;

  const json& cj = need(j, "constants", "$");
  auto& c = s.constants;
  c.eta = num(need(cj, "eta", "$.constants"), "$.constants.eta");
  c.zeta = num(need(cj, "zeta", "$.constants"), "$.constants.zeta");
  c.chi = num(need(cj, "chi", "$.constants"), "$.constants.chi");
  c.xi = num(need(cj, "xi", "$.constants"), "$.constants.xi");
  c.horizon = num(need(cj, "horizon", "$.constants"), "$.constants.horizon");
  if (cj.contains("t0")) c.t0 = num(cj["t0"], "$.constants.t0");
  if (cj.contains("tau_max")) {
    if (!cj["tau_max"].is_number_integer()) throw ScenarioError("$.constants.tau_max", "expected an integer");
    c.tau_max = cj["tau_max"].get<int>();
  }
  if (cj.contains("big_m") && !cj["big_m"].is_null()) {
    c.big_m = num(cj["big_m"], "$.constants.big_m");
    c.big_m_given = true;
  }

  const json& sj = need(j, "swarms", "$");
  if (!sj.is_array()) throw ScenarioError("$.swarms", "expected an array");
  for (std::size_t k = 0; k < sj.size(); ++k) {
    std::string path = "$.swarms[" + std::to_string(k) + "]";
    SwarmSpec sw;
    const json& idj = need(sj[k], "id", path);
    if (!idj.is_number_integer()) throw ScenarioError(path + ".id", "expected an integer");
    sw.id = idj.get<int>();
    const json& segj = need(sj[k], "segments", path);
    if (!segj.is_number_integer()) throw ScenarioError(path + ".segments", "expected an integer");
    sw.segments = segj.get<int>();
    const json& aj = need(sj[k], "agents", path);
    if (!aj.is_array()) throw ScenarioError(path + ".agents", "expected an array");
    for (std::size_t i = 0; i < aj.size(); ++i) {
      std::string ap = path + ".agents[" + std::to_string(i) + "]";
      AgentState a;
      a.p = vec(need(aj[i], "p", ap), d, ap + ".p");
      a.v = aj[i].contains("v") ? vec(aj[i]["v"], d, ap + ".v") : Vec::Zero(d);
      sw.agents.push_back(a);
    }
    if (sj[k].contains("sigma_init") && !sj[k]["sigma_init"].is_null()) {
      const json& m = sj[k]["sigma_init"];
      std::string mp = path + ".sigma_init";
      Mat sig(d, d);
      if (m.is_array() && static_cast<int>(m.size()) == d * d && (d == 1 || !m[0].is_array())) {
        for (int r = 0; r < d; ++r)
          for (int q = 0; q < d; ++q) sig(r, q) = num(m[r * d + q], mp);
      } else if (m.is_array() && static_cast<int>(m.size()) == d) {
        for (int r = 0; r < d; ++r) {
          Vec row = vec(m[r], d, mp + "[" + std::to_string(r) + "]");
          sig.row(r) = row.transpose();
        }
      } else {
        throw ScenarioError(mp, "expected d*d row-major entries");
      }
      sw.sigma_init = sig;
    }
    s.swarms.push_back(std::move(sw));
  }

  if (j.contains("obstacles")) {
    const json& oj = j["obstacles"];
    if (!oj.is_array()) throw ScenarioError("$.obstacles", "expected an array");
    for (std::size_t k = 0; k < oj.size(); ++k)
      s.obstacles.push_back(polytope(oj[k], d, "$.obstacles[" + std::to_string(k) + "]"));
  }
  if (j.contains("regions")) {
    const json& rj = j["regions"];
    if (!rj.is_object()) throw ScenarioError("$.regions", "expected an object");
    for (auto it = rj.begin(); it != rj.end(); ++it)
      s.regions[it.key()] = polytope(it.value(), d, "$.regions." + it.key());
  }
  if (j.contains("formula")) {
    if (!j["formula"].is_string()) throw ScenarioError("$.formula", "expected a string");
    s.formula = j["formula"].get<std::string>();
  }
  if (!c.big_m_given) c.big_m = default_big_m(s);

  check_invariants(s);
  for (auto& sw : s.swarms)
    if (sw.segments == 0) spdlog::warn("swarm {} has 0 segments; it stays at its start", sw.id);

  InitialReport rep = validate_initial_configuration(s);
  if (!rep.close_pairs.empty()) {
    const auto& p = rep.close_pairs.front();
    throw ScenarioError("$.swarms[" + std::to_string(p.swarm) + "].agents",
                        "agents " + std::to_string(p.i) + " and " + std::to_string(p.j) +
                            " are closer than zeta");
  }
  if (!rep.outside.empty()) {
    const auto& o = rep.outside.front();
    throw ScenarioError("$.swarms[" + std::to_string(o.swarm) + "].agents[" + std::to_string(o.i) + "]",
                        "agent lies outside the initial ellipsoid");
  }
  return s;
}

Scenario load_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return load_scenario(ss.str());
}

std::string serialize_scenario(const Scenario& s) {
  json j;
  j["dimension"] = s.dimension;
  const auto& c = s.constants;
  j["constants"] = {{"eta", c.eta},         {"zeta", c.zeta}, {"chi", c.chi},
                    {"xi", c.xi},           {"horizon", c.horizon}, {"t0", c.t0},
                    {"tau_max", c.tau_max}, {"big_m", c.big_m}};
  json sw = json::array();
  for (auto& w : s.swarms) {
    json agents = json::array();
    for (auto& a : w.agents) agents.push_back({{"p", vec_json(a.p)}, {"v", vec_json(a.v)}});
    json o = {{"id", w.id}, {"segments", w.segments}, {"agents", agents}};
    if (w.sigma_init) {
      json m = json::array();
      for (int r = 0; r < w.sigma_init->rows(); ++r)
        for (int q = 0; q < w.sigma_init->cols(); ++q) m.push_back((*w.sigma_init)(r, q));
      o["sigma_init"] = m;
    }
    sw.push_back(o);
  }
  j["swarms"] = sw;
  json obs = json::array();
  for (auto& o : s.obstacles) obs.push_back(poly_json(o));
  j["obstacles"] = obs;
  json reg = json::object();
  for (auto& [name, p] : s.regions) reg[name] = poly_json(p);
  j["regions"] = reg;
  j["formula"] = s.formula;
  return j.dump(2);
}

InitialReport validate_initial_configuration(const Scenario& s) {
  InitialReport rep;
  const double zeta = s.constants.zeta;
  for (int k = 0; k < static_cast<int>(s.swarms.size()); ++k) {
    const auto& sw = s.swarms[k];
    const int n = sw.size();
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) {
        double dist = (sw.agents[i].p - sw.agents[j].p).norm();
        if (dist < zeta) rep.close_pairs.push_back({k, i, j, dist});
      }
    Vec c = sw.centroid();
    Mat sig = initial_sigma(s, k);
    Eigen::LDLT<Mat> ldlt(sig);
    bool moving = false;
    for (int i = 0; i < n; ++i) {
      Vec dp = sw.agents[i].p - c;
      double q = dp.dot(ldlt.solve(dp));
      if (q > 1.0 + 1e-12) rep.outside.push_back({k, i, q});
      if (sw.agents[i].v.size() && sw.agents[i].v.norm() > 0) moving = true;
    }
    if (moving) rep.moving_swarms.push_back(k);
  }
  return rep;
}

Box workspace_box(const Scenario& s) {
  const int d = s.dimension;
  Box box{Vec::Constant(d, lp::kInf), Vec::Constant(d, -lp::kInf)};
  for (auto& sw : s.swarms)
    for (auto& a : sw.agents) {
      box.lo = box.lo.cwiseMin(a.p);
      box.hi = box.hi.cwiseMax(a.p);
    }
  auto include = [&](const Polytope& poly) {
    lp::Problem p;
    for (int i = 0; i < d; ++i) p.add_col(-lp::kInf, lp::kInf);
    for (auto& r : poly.rows) {
      lp::Coeffs c;
      for (int i = 0; i < d; ++i) c.emplace_back(i, r.a[i]);
      p.add_row(c, -r.b, lp::kInf);
    }
    Vec lo(d), hi(d);
    for (int i = 0; i < d; ++i) {
      for (double sign : {1.0, -1.0}) {
        std::fill(p.obj.begin(), p.obj.end(), 0.0);
        p.obj[i] = sign;
        auto r = lp::solve_lp(p);
        if (r.status != lp::Status::Optimal) return;
        (sign > 0 ? hi : lo)[i] = r.x[i];
      }
    }
    box.lo = box.lo.cwiseMin(lo);
    box.hi = box.hi.cwiseMax(hi);
  };
  for (auto& o : s.obstacles) include(o);
  for (auto& [name, r] : s.regions) include(r);
  return box;
}

double default_big_m(const Scenario& s) {
  return 1e3 * (workspace_box(s).diameter() + s.constants.chi * s.constants.horizon);
}

}  // namespace swarmstl
