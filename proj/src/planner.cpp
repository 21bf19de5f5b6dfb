#include "swarmstl/planner.hpp"

#include <spdlog/spdlog.h>

#include <chrono>
#include <cmath>
#include <functional>
#include <json.hpp>
#include <limits>
#include <stdexcept>

#include "swarmstl/geometry.hpp"

namespace swarmstl::plan {

using json = nlohmann::json;
using stl::Lifted;
using LK = Lifted::Kind;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
const double kNaN = std::numeric_limits<double>::quiet_NaN();

double seconds_since(std::chrono::steady_clock::time_point t) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
}

json mat_json(const Mat& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json r = json::array();
    for (int j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
    rows.push_back(r);
  }
  return rows;
}

PlanPath make_path(const enc::Instance& inst, const std::vector<double>& x, const std::vector<Mat>& sigmas,
                   double eps) {
  PlanPath p;
  p.epsilon = eps;
  const auto& sc = inst.scenario;
  for (int s = 0; s < static_cast<int>(sc.swarms.size()); ++s) {
    SwarmPath sp;
    sp.id = sc.swarms[s].id;
    for (int k = 0; k <= sc.swarms[s].segments; ++k) {
      Waypoint w;
      w.t = inst.time[s][k].eval(x);
      w.p = Vec(sc.dimension);
      for (int i = 0; i < sc.dimension; ++i) w.p[i] = inst.pos[s][k][i].eval(x);
      w.sigma = sigmas[inst.ell_id[s][k]];
      sp.waypoints.push_back(std::move(w));
    }
    p.swarms.push_back(std::move(sp));
  }
  for (int c : inst.witness_cols) p.witnesses.push_back(c >= 0 ? x[c] : kNaN);
  return p;
}

}  // namespace

std::string to_json(const PlanPath& p) {
  json j;
  j["epsilon"] = p.epsilon;
  json sw = json::array();
  for (auto& s : p.swarms) {
    json wps = json::array();
    for (auto& w : s.waypoints) {
      json wj;
      wj["t"] = w.t;
      wj["p"] = std::vector<double>(w.p.data(), w.p.data() + w.p.size());
      wj["sigma"] = mat_json(w.sigma);
      wps.push_back(wj);
    }
    sw.push_back({{"id", s.id}, {"waypoints", wps}});
  }
  j["swarms"] = sw;
  json wit = json::array();
  for (double w : p.witnesses) wit.push_back(std::isfinite(w) ? json(w) : json(nullptr));
  j["witnesses"] = wit;
  return j.dump(2) + "\n";
}

PlanPath path_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("plan file is not valid JSON: ") + e.what());
  }
  try {
    PlanPath p;
    p.epsilon = j.at("epsilon").get<double>();
    for (auto& s : j.at("swarms")) {
      SwarmPath sp;
      sp.id = s.at("id").get<int>();
      for (auto& w : s.at("waypoints")) {
        Waypoint wp;
        wp.t = w.at("t").get<double>();
        auto pv = w.at("p").get<std::vector<double>>();
        wp.p = Eigen::Map<Vec>(pv.data(), static_cast<Eigen::Index>(pv.size()));
        const auto& sg = w.at("sigma");
        const int d = static_cast<int>(sg.size());
        wp.sigma = Mat(d, d);
        for (int a = 0; a < d; ++a) {
          if (static_cast<int>(sg[a].size()) != d) throw std::runtime_error("sigma must be square");
          for (int b = 0; b < d; ++b) wp.sigma(a, b) = sg[a][b].get<double>();
        }
        if (wp.p.size() != d) throw std::runtime_error("waypoint and sigma dimensions differ");
        sp.waypoints.push_back(std::move(wp));
      }
      p.swarms.push_back(std::move(sp));
    }
    if (j.contains("witnesses"))
      for (auto& w : j.at("witnesses")) p.witnesses.push_back(w.is_null() ? kNaN : w.get<double>());
    return p;
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("malformed plan file: ") + e.what());
  }
}

stl::LiftedPtr lift_for(const Scenario& sc, const stl::FormulaPtr& formula) {
  return stl::lift(stl::to_nnf(formula), sc.swarm_sizes());
}

PlanResult plan(const Scenario& sc, const stl::FormulaPtr& formula, const Options& opt) {
  PlanResult res;
  stl::LiftedPtr lifted;
  try {
    lifted = lift_for(sc, formula);
  } catch (const stl::LiftError& e) {
    res.reason = std::string("lift failed: ") + e.what();
    return res;
  }
  enc::Instance inst = enc::encode(sc, lifted);
  spdlog::info("encoded {} columns ({} binaries), {} rows, {} lazy groups", inst.cols.size(), inst.num_binaries(),
               inst.rows.size(), inst.groups.size());
  std::vector<Mat> sigmas = enc::initial_sigmas(inst);
  const int tau_max = opt.tau_max > 0 ? opt.tau_max : sc.constants.tau_max;
  std::vector<char> mask(inst.groups.size(), opt.lazy ? 0 : 1);
  double best = -kInf;
  std::vector<double> guide;

  for (int it = 1; it <= tau_max; ++it) {
    res.iterations = it;
    IterationLog L;
    L.iteration = it;
    auto t1 = std::chrono::steady_clock::now();
    std::vector<double> x;
    milp::Result mr;
    bool stage_ok = false;
    // eps >= 0 first: same optimum whenever the true one is >= 0, and the LPs can prune
    double eps_floor = 0.0;
    for (;;) {
      ++L.lazy_rounds;
      std::vector<int> bins;
      lp::Problem P = enc::build_milp(inst, sigmas, &mask, &bins);
      P.col_lo[inst.eps_col] = eps_floor;
      milp::Options mo;
      mo.node_limit = opt.node_limit;
      mo.dive_first = true;
      mo.time_limit = opt.milp_time_limit;
      mo.stall_nodes = opt.stall_nodes;
      if (opt.guided) mo.guide = guide;
      mo.restart_nodes = it > 1 && opt.retry_restart_nodes > 0 ? opt.retry_restart_nodes : opt.restart_nodes;
      mo.seed = static_cast<unsigned>(it);
      mo.most_fractional = opt.most_fractional;
      mr = milp::solve_milp(P, bins, mo);
      L.nodes += mr.nodes;
      spdlog::debug("iteration {} round {}: {} rows, {} binaries, eps floor {}, {} nodes, status {}, eps {}", it,
                    L.lazy_rounds, P.num_rows(), bins.size(), eps_floor, mr.nodes, milp::to_string(mr.status),
                    mr.objective);
      if (!mr.has_incumbent) {
        if (eps_floor == -kInf) break;
        eps_floor = -kInf;
        continue;
      }
      x = mr.x;
      guide = x;
      std::vector<int> viol;
      for (int g = 0; g < static_cast<int>(inst.groups.size()); ++g)
        if (!mask[g] && enc::group_slack(inst, g, x, sigmas) < -1e-7) viol.push_back(g);
      if (viol.empty()) {
        stage_ok = true;
        break;
      }
      if (L.lazy_rounds >= opt.max_lazy_rounds) std::fill(mask.begin(), mask.end(), 1);
      else
        for (int g : viol) mask[g] = 1;
      for (int g : viol) enc::assign_group(inst, g, guide, sigmas);
    }
    L.milp_status = milp::to_string(mr.status);
    for (char m : mask) L.groups_active += m;
    if (!stage_ok) {
      L.milp_seconds = seconds_since(t1);
      res.log.push_back(L);
      res.reason = mr.status == milp::Status::Infeasible
                       ? (it == 1 ? "stage-1 MILP infeasible under the initial ellipsoids"
                                  : "stage-1 MILP infeasible")
                       : std::string("stage-1 MILP ended without a solution (") + milp::to_string(mr.status) + ")";
      break;
    }
    for (int g = 0; g < static_cast<int>(inst.groups.size()); ++g)
      if (!mask[g]) enc::assign_group(inst, g, x, sigmas);
    {
      lp::Problem full = enc::build_milp(inst, sigmas);
      for (int j : inst.binaries()) full.col_lo[j] = full.col_hi[j] = std::round(x[j]);
      lp::Result fr = lp::solve_lp(full);
      if (fr.status == lp::Status::Optimal) {
        for (int j : inst.binaries()) fr.x[j] = std::round(x[j]);
        x = fr.x;
      } else {
        spdlog::warn("final stage-1 LP returned {}", lp::to_string(fr.status));
      }
    }
    L.eps_milp = x[inst.eps_col];
    L.milp_seconds = seconds_since(t1);

    auto t2 = std::chrono::steady_clock::now();
    enc::EllipsoidProblem ep = enc::build_ellipsoid_problem(inst, x, sigmas);
    ell::Result er = ell::solve_ellipsoids(ep, opt.ellipsoid);
    L.ellipsoid_status = ell::to_string(er.status);
    double eps2 = L.eps_milp;
    if (er.status != ell::Status::Infeasible) {
      for (std::size_t v = 0; v < ep.var_ells.size(); ++v) sigmas[ep.var_ells[v]] = er.sigma[v];
      eps2 = er.epsilon;
    }
    L.eps_ellipsoid = eps2;
    L.ellipsoid_seconds = seconds_since(t2);
    res.log.push_back(L);
    spdlog::info("iteration {}: stage-1 eps {:.6g} ({} nodes, {} lazy rounds), stage-2 eps {:.6g} ({})", it,
                 L.eps_milp, L.nodes, L.lazy_rounds, eps2, L.ellipsoid_status);

    PlanPath path = make_path(inst, x, sigmas, eps2);
    if (eps2 > best || !res.has_path) {
      best = eps2;
      res.path = path;
      res.has_path = true;
      res.big_m = enc::audit_big_m(inst, x, sigmas);
    }
    if (eps2 >= 0) {
      res.path = path;
      res.big_m = enc::audit_big_m(inst, x, sigmas);
      res.certificate = audit_path(path, sc, lifted);
      if (res.certificate.ok && res.big_m.ok) {
        res.status = Status::Success;
        res.reason.clear();
      } else {
        res.reason = res.certificate.ok ? "big-M audit failed" : "audit failed: " + res.certificate.first_failure;
      }
      break;
    }
  }
  if (res.status != Status::Success && res.reason.empty())
    res.reason = "tau_max reached with eps < 0 (outcome unknown)";
  if (res.status != Status::Success && res.has_path && res.certificate.worst.empty())
    res.certificate = audit_path(res.path, sc, lifted);
  return res;
}

namespace {

struct SegView {
  Vec p0, p1;
  Mat sigma;
  double t_start, t_end;
  bool open_end;
};

std::vector<SegView> seg_views(const SwarmPath& sp) {
  std::vector<SegView> out;
  const auto& w = sp.waypoints;
  if (w.size() == 1) {
    out.push_back({w[0].p, w[0].p, w[0].sigma, w[0].t, kInf, true});
    return out;
  }
  for (std::size_t k = 1; k < w.size(); ++k)
    out.push_back({w[k - 1].p, w[k].p, w[k].sigma, w[k - 1].t, w[k].t, k + 1 == w.size()});
  return out;
}

double face_margin(const Halfspace& h, double sign, const Vec& p, const Mat& sigma, double eta, double eps) {
  const double na = h.a.norm();
  return sign * (h.a.dot(p) + h.b) - std::sqrt(std::max(0.0, h.a.dot(sigma * h.a))) - (eta + eps) * na;
}

double atom_slack(const SegView& g, const Polytope& poly, bool negated, double eta, double eps) {
  if (!negated) {
    double v = kInf;
    for (auto& h : poly.rows)
      v = std::min({v, face_margin(h, 1, g.p0, g.sigma, eta, eps), face_margin(h, 1, g.p1, g.sigma, eta, eps)});
    return v;
  }
  double v = -kInf;
  for (auto& h : poly.rows)
    v = std::max(v, std::min(face_margin(h, -1, g.p0, g.sigma, eta, eps), face_margin(h, -1, g.p1, g.sigma, eta, eps)));
  return v;
}

}  // namespace

Certificate audit_path(const PlanPath& path, const Scenario& sc, const stl::LiftedPtr& lifted, double tol) {
  Certificate cert;
  const auto prm = enc::encoding_params(sc, lifted);
  const auto& c = sc.constants;
  const double eps = path.epsilon;
  const int d = sc.dimension;
  auto note = [&](const std::string& fam, double v) {
    auto it = cert.worst.find(fam);
    if (it == cert.worst.end()) cert.worst[fam] = v;
    else it->second = std::min(it->second, v);
  };
  for (const char* f : {"time_progression", "reachability", "initial", "obstacle", "inter_swarm", "stl", "volume",
                        "spacing"})
    cert.worst[f] = kInf;

  if (path.swarms.size() != sc.swarms.size()) {
    cert.ok = false;
    cert.first_failure = "swarm count mismatch";
    return cert;
  }
  std::vector<std::vector<SegView>> segs;
  for (std::size_t s = 0; s < sc.swarms.size(); ++s) {
    const auto& sw = sc.swarms[s];
    const auto& w = path.swarms[s].waypoints;
    if (static_cast<int>(w.size()) != sw.segments + 1) {
      cert.ok = false;
      cert.first_failure = "waypoint count mismatch for swarm " + std::to_string(sw.id);
      return cert;
    }
    // initial waypoint
    note("initial", -(w[0].p - sw.centroid()).cwiseAbs().maxCoeff());
    note("initial", -std::abs(w[0].t - c.t0));
    note("initial", -(w[0].sigma - initial_sigma(sc, static_cast<int>(s))).cwiseAbs().maxCoeff());
    for (int k = 1; k <= sw.segments; ++k) {
      note("time_progression", w[k].t - w[k - 1].t - prm.rho);
      note("reachability", c.chi * (w[k].t - w[k - 1].t) - (w[k].p - w[k - 1].p).lpNorm<1>());
      const Mat& S = w[k].sigma;
      Eigen::SelfAdjointEigenSolver<Mat> es(S, Eigen::EigenvaluesOnly);
      if (es.eigenvalues().minCoeff() <= 0) note("volume", -kInf);
      else note("volume", geom::log_det(S) - geom::volume_rhs(c.xi, sw.size(), c.zeta, d));
    }
    if (sw.segments > 0) note("time_progression", c.t0 + c.horizon - w.back().t);
    segs.push_back(seg_views(path.swarms[s]));
    for (auto& g : segs.back())
      for (auto& poly : sc.obstacles)
        for (auto& h : poly.rows)
          note("obstacle", std::min(face_margin(h, 1, g.p0, g.sigma, c.eta, eps),
                                    face_margin(h, 1, g.p1, g.sigma, c.eta, eps)));
    // spacing after each transition
    if (sw.size() >= 2 && sw.segments > 0) {
      Mat w0 = geom::inv_sqrtm(w[0].sigma);
      for (int k = 1; k <= sw.segments; ++k) {
        Mat M = geom::sqrtm(w[k].sigma) * w0;
        for (int i = 0; i < sw.size(); ++i)
          for (int j = i + 1; j < sw.size(); ++j)
            note("spacing", (M * (sw.agents[i].p - sw.agents[j].p)).norm() - c.zeta);
      }
    }
  }
  // inter-swarm pairs
  for (std::size_t s1 = 0; s1 < segs.size(); ++s1)
    for (std::size_t s2 = s1 + 1; s2 < segs.size(); ++s2)
      for (auto& g1 : segs[s1])
        for (auto& g2 : segs[s2]) {
          double best = -kInf;
          if (!g1.open_end) best = std::max(best, g2.t_start - g1.t_end - prm.delta);
          if (!g2.open_end) best = std::max(best, g1.t_start - g2.t_end - prm.delta);
          geom::Segment a{g1.p0, g1.p1, g1.sigma}, b{g2.p0, g2.p1, g2.sigma};
          best = std::max(best, geom::separation_margin(a, b, c.eta, c.zeta, eps, d));
          note("inter_swarm", best);
        }
  // swarm-STL through the witness times
  if (lifted) {
    int counter = 0;
    std::map<const Lifted*, int> ids;
    std::function<void(const stl::LiftedPtr&)> number = [&](const stl::LiftedPtr& f) {
      ids.emplace(f.get(), counter++);
      for (auto& k : f->kids) number(k);
    };
    number(lifted);
    std::function<double(const stl::LiftedPtr&, double, double)> eval = [&](const stl::LiftedPtr& f, double lo,
                                                                               double hi) -> double {
      switch (f->kind) {
        case LK::True: return kInf;
        case LK::False: return -kInf;
        case LK::Atom: {
          const Polytope& poly = sc.regions.at(f->region);
          double v = kInf;
          for (auto& g : segs[f->swarm]) {
            bool before = !g.open_end && g.t_end + prm.delta <= lo + tol;
            bool after = hi + prm.delta <= g.t_start + tol;
            if (before || after) continue;
            v = std::min(v, atom_slack(g, poly, f->negated, c.eta, eps));
          }
          return v;
        }
        case LK::And: {
          double v = kInf;
          for (auto& k : f->kids) v = std::min(v, eval(k, lo, hi));
          return v;
        }
        case LK::Or: {
          double v = -kInf;
          for (auto& k : f->kids) v = std::max(v, eval(k, lo, hi));
          return v;
        }
        case LK::Always: return eval(f->kids[0], lo + f->a, hi + f->b);
        case LK::Eventually:
        case LK::Until: {
          const int id = ids.at(f.get());
          if (id >= static_cast<int>(path.witnesses.size()) || !std::isfinite(path.witnesses[id])) return -kInf;
          const double tau = path.witnesses[id];
          const double w = enc::witness_width(prm, f->a, f->b);
          double v = std::min(tau - (hi + f->a), (lo + f->b) - (tau + w));
          if (f->kind == LK::Eventually) return std::min(v, eval(f->kids[0], tau, tau + w));
          return std::min({v, eval(f->kids[1], tau, tau + w), eval(f->kids[0], lo, tau + w)});
        }
      }
      return -kInf;
    };
    note("stl", eval(lifted, c.t0, c.t0));
  }
  for (auto& [fam, v] : cert.worst)
    if (v < -tol) {
      cert.ok = false;
      if (cert.first_failure.empty()) cert.first_failure = fam;
    }
  return cert;
}

}  // namespace swarmstl::plan
