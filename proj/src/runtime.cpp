#include "swarmstl/runtime.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <json.hpp>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "swarmstl/encoder.hpp"
#include "swarmstl/geometry.hpp"

namespace swarmstl::rt {

using json = nlohmann::json;

Vec Trace::centroid(int sample, int swarm) const {
  Vec c = Vec::Zero(dim);
  int n = 0;
  for (int a = 0; a < num_agents(); ++a)
    if (swarm_of[a] == swarm) {
      c += pos[sample].col(a);
      ++n;
    }
  return n > 0 ? Vec(c / n) : c;
}

double trace_end(const Scenario& sc) {
  const auto& c = sc.constants;
  double h = 0.0;
  if (!sc.formula.empty()) {
    auto ctx = stl::context_for(sc);
    h = stl::horizon(stl::parse(sc.formula, &ctx));
  }
  return c.t0 + std::max(c.horizon, h);
}

double min_segment_duration(const plan::PlanPath& path) {
  double m = std::numeric_limits<double>::infinity();
  for (auto& sp : path.swarms)
    for (std::size_t k = 1; k < sp.waypoints.size(); ++k)
      m = std::min(m, sp.waypoints[k].t - sp.waypoints[k - 1].t);
  return m;
}

namespace {

double resolution(const plan::PlanPath& path, const Scenario& sc) {
  double r = enc::encoding_params(sc).rho;
  double m = min_segment_duration(path);
  if (m > 0 && std::isfinite(m)) r = std::min(r, m);
  return r;
}

void check_path(const plan::PlanPath& path, const Scenario& sc) {
  if (path.swarms.size() != sc.swarms.size())
    throw std::invalid_argument("plan has " + std::to_string(path.swarms.size()) + " swarms, scenario has " +
                                std::to_string(sc.swarms.size()));
  for (std::size_t s = 0; s < path.swarms.size(); ++s) {
    const auto& w = path.swarms[s].waypoints;
    if (w.empty()) throw std::invalid_argument("swarm " + std::to_string(s) + " has no waypoints");
    for (auto& wp : w) {
      if (wp.p.size() != sc.dimension || wp.sigma.rows() != sc.dimension || wp.sigma.cols() != sc.dimension)
        throw std::invalid_argument("plan dimension does not match scenario dimension " +
                                    std::to_string(sc.dimension));
    }
    for (std::size_t k = 1; k < w.size(); ++k) {
      double dur = w[k].t - w[k - 1].t;
      double disp = (w[k].p - w[k - 1].p).norm();
      if (dur < 0) throw std::invalid_argument("waypoint times decrease in swarm " + std::to_string(s));
      if (dur <= 0 && disp > 0)
        throw std::invalid_argument("degenerate segment " + std::to_string(k) + " of swarm " + std::to_string(s) +
                                    ": zero duration with nonzero displacement");
    }
  }
}

// Advances one swarm from `cur` to `to` with exact double-integrator updates.
// Centroid profile per segment: smoothstep x(tau) = 3 tau^2 - 2 tau^3 along the chord.
struct SwarmSim {
  const plan::SwarmPath* sp;
  Mat P, V;  // d x n
  double cur;
  std::size_t next;  // next waypoint index whose time is still ahead

  void integrate(double to) {
    const auto& w = sp->waypoints;
    while (cur < to) {
      // active segment: next in [1, K] with w[next-1].t <= cur < w[next].t
      if (next >= w.size() || next == 0) {
        P += V * (to - cur);
        cur = to;
        return;
      }
      double ta = w[next - 1].t, tb = w[next].t;
      double stop = std::min(to, tb);
      double dur = tb - ta;
      double h = stop - cur;
      if (dur > 0 && h > 0) {
        Vec dp = w[next].p - w[next - 1].p;
        double tau = (cur - ta) / dur;
        Vec u0 = dp * ((6.0 - 12.0 * tau) / (dur * dur));
        Vec j = dp * (-12.0 / (dur * dur * dur));
        Vec dpos = u0 * (h * h / 2) + j * (h * h * h / 6);
        Vec dvel = u0 * h + j * (h * h / 2);
        P += V * h;
        P.colwise() += dpos;
        V.colwise() += dvel;
      }
      cur = stop;
      if (cur >= tb) break;  // caller handles the waypoint event
    }
  }
};

void remap(Mat& P, Mat& V, const Mat& from, const Mat& to) {
  Vec c = P.rowwise().mean();
  Mat M = geom::sqrtm(to) * geom::inv_sqrtm(from);
  Mat off = P.colwise() - c;
  P = (M * off).colwise() + c;
  V.setZero();
}

}  // namespace

double default_dt(const plan::PlanPath& path, const Scenario& sc) { return resolution(path, sc) / 50.0; }

double max_dt(const plan::PlanPath& path, const Scenario& sc) { return resolution(path, sc) / 10.0; }

Trace simulate(const plan::PlanPath& path, const Scenario& sc, double dt) {
  check_path(path, sc);
  const int d = sc.dimension;
  const double t0 = sc.constants.t0;
  const double tend = trace_end(sc);
  const double lim = max_dt(path, sc);
  if (dt <= 0) dt = default_dt(path, sc);
  if (dt > lim * (1 + 1e-12))
    throw std::invalid_argument("dt = " + std::to_string(dt) + " exceeds min segment duration / 10 = " +
                                std::to_string(lim) + "; pass --dt " + std::to_string(lim) + " or smaller");
  const long n = std::max(1L, static_cast<long>(std::ceil((tend - t0) / dt - 1e-9)));
  dt = (tend - t0) / static_cast<double>(n);

  Trace tr;
  tr.dim = d;
  tr.dt = dt;
  const int S = static_cast<int>(sc.swarms.size());
  for (int s = 0; s < S; ++s) {
    tr.swarm_ids.push_back(sc.swarms[s].id);
    for (int i = 0; i < sc.swarms[s].size(); ++i) {
      tr.swarm_of.push_back(s);
      tr.local_index.push_back(i);
    }
  }
  tr.shapes.resize(S);
  std::vector<SwarmSim> sims(S);
  for (int s = 0; s < S; ++s) {
    const auto& sw = sc.swarms[s];
    const auto& w = path.swarms[s].waypoints;
    for (auto& wp : w) tr.shapes[s].push_back(wp.sigma);
    auto& sim = sims[s];
    sim.sp = &path.swarms[s];
    sim.P.resize(d, sw.size());
    sim.V.resize(d, sw.size());
    for (int i = 0; i < sw.size(); ++i) {
      sim.P.col(i) = sw.agents[i].p;
      sim.V.col(i) = sw.agents[i].v;
    }
    sim.cur = t0;
    sim.next = 1;
    if (w.size() == 1) sim.V.setZero();  // no segments: the swarm rests at its start
    if (w.size() > 1) {
      remap(sim.P, sim.V, w[0].sigma, w[1].sigma);
      tr.transitions.push_back({t0, s, 0, sim.P});
    }
  }

  const int N = tr.num_agents();
  tr.t.reserve(n + 1);
  tr.pos.reserve(n + 1);
  tr.vel.reserve(n + 1);
  for (long i = 0; i <= n; ++i) {
    double t = i == n ? tend : t0 + dt * static_cast<double>(i);
    Mat P(d, N), V(d, N);
    std::vector<int> seg(S);
    int col = 0;
    for (int s = 0; s < S; ++s) {
      auto& sim = sims[s];
      const auto& w = sim.sp->waypoints;
      const std::size_t K = w.size() - 1;
      while (sim.next <= K && w[sim.next].t <= t) {
        sim.integrate(w[sim.next].t);
        if (sim.next < K) {
          remap(sim.P, sim.V, w[sim.next].sigma, w[sim.next + 1].sigma);
          tr.transitions.push_back({w[sim.next].t, s, static_cast<int>(sim.next), sim.P});
        } else {
          sim.V.setZero();
        }
        ++sim.next;
      }
      sim.integrate(t);
      seg[s] = K == 0 ? 0 : static_cast<int>(std::min(sim.next, K));
      P.middleCols(col, sim.P.cols()) = sim.P;
      V.middleCols(col, sim.V.cols()) = sim.V;
      col += static_cast<int>(sim.P.cols());
    }
    tr.t.push_back(t);
    tr.pos.push_back(std::move(P));
    tr.vel.push_back(std::move(V));
    tr.segment.push_back(std::move(seg));
  }
  return tr;
}

// ---------------------------------------------------------------- STL monitor

namespace {

struct Evaluator {
  const Trace& tr;
  const std::map<std::string, Polytope>& regions;
  double dt;
  int n;

  long lo_index(double a) const { return static_cast<long>(std::ceil((a - 1e-9) / dt)); }
  long hi_index(double b) const { return static_cast<long>(std::floor((b + 1e-9) / dt)); }

  void check_interval(double a, double b) const {
    if (b - a < dt - 1e-12)
      throw std::invalid_argument("temporal interval [" + std::to_string(a) + "," + std::to_string(b) +
                                  "] is shorter than the sample step " + std::to_string(dt));
  }

  std::vector<char> eval(const stl::FormulaPtr& f) const {
    using stl::Op;
    std::vector<char> out(n, 0);
    switch (f->op) {
      case Op::True:
        std::fill(out.begin(), out.end(), 1);
        break;
      case Op::False:
        break;
      case Op::Pred: {
        auto it = regions.find(f->region);
        if (it == regions.end()) throw std::invalid_argument("unknown region '" + f->region + "'");
        int need = std::max(1, f->n_mu);
        for (int i = 0; i < n; ++i) {
          int cnt = 0;
          for (int a = 0; a < tr.num_agents(); ++a)
            if (it->second.value(tr.pos[i].col(a)) >= 0) ++cnt;
          out[i] = cnt >= need;
        }
        break;
      }
      case Op::Not: {
        auto k = eval(f->kids[0]);
        for (int i = 0; i < n; ++i) out[i] = !k[i];
        break;
      }
      case Op::And:
      case Op::Or: {
        bool is_and = f->op == Op::And;
        std::fill(out.begin(), out.end(), is_and ? 1 : 0);
        for (auto& kid : f->kids) {
          auto k = eval(kid);
          for (int i = 0; i < n; ++i) out[i] = is_and ? (out[i] && k[i]) : (out[i] || k[i]);
        }
        break;
      }
      case Op::Always:
      case Op::Eventually: {
        check_interval(f->a, f->b);
        auto k = eval(f->kids[0]);
        // prefix count of true samples
        std::vector<long> pre(n + 1, 0);
        for (int i = 0; i < n; ++i) pre[i + 1] = pre[i] + k[i];
        long la = lo_index(f->a), lb = hi_index(f->b);
        for (int i = 0; i < n; ++i) {
          long lo = std::min<long>(i + la, n), hi = std::min<long>(i + lb, n - 1);
          long cnt = hi >= lo ? pre[hi + 1] - pre[lo] : 0;
          long len = hi >= lo ? hi - lo + 1 : 0;
          out[i] = f->op == Op::Always ? cnt == len : cnt > 0;
        }
        break;
      }
      case Op::Until: {
        check_interval(f->a, f->b);
        auto k1 = eval(f->kids[0]);
        auto k2 = eval(f->kids[1]);
        std::vector<long> pre(n + 1, 0);
        for (int i = 0; i < n; ++i) pre[i + 1] = pre[i] + k2[i];
        std::vector<long> first_false(n + 1, n);
        for (int i = n - 1; i >= 0; --i) first_false[i] = k1[i] ? first_false[i + 1] : i;
        long la = lo_index(f->a), lb = hi_index(f->b);
        for (int i = 0; i < n; ++i) {
          long lo = std::min<long>(i + la, n);
          long hi = std::min<long>({i + lb, n - 1, first_false[i] - 1});
          out[i] = hi >= lo && pre[hi + 1] - pre[lo] > 0;
        }
        break;
      }
    }
    return out;
  }
};

}  // namespace

StlReport monitor_stl(const Trace& tr, const stl::FormulaPtr& f, const std::map<std::string, Polytope>& regions) {
  if (tr.num_samples() < 2) throw std::invalid_argument("trace needs at least two samples");
  const double span = tr.t.back() - tr.t.front();
  const double h = stl::horizon(f);
  if (h > span + 1e-9)
    throw std::invalid_argument("formula horizon " + std::to_string(h) + " is beyond the trace horizon " +
                                std::to_string(span));
  Evaluator ev{tr, regions, tr.dt > 0 ? tr.dt : tr.t[1] - tr.t[0], tr.num_samples()};
  StlReport rep;
  rep.satisfied = true;
  for (auto& c : stl::conjuncts(f)) {
    bool ok = ev.eval(c)[0] != 0;
    rep.conjuncts.push_back({stl::to_string(c), ok});
    rep.satisfied = rep.satisfied && ok;
  }
  return rep;
}

// ------------------------------------------------------------- safety monitor

SafetyReport monitor_safety(const Trace& tr, const Scenario& sc) {
  SafetyReport r;
  const double zeta = sc.constants.zeta;
  const int N = tr.num_agents();
  const int S = static_cast<int>(tr.swarm_ids.size());

  std::vector<std::vector<Mat>> inv;
  if (tr.has_shapes()) {
    inv.resize(S);
    for (int s = 0; s < S; ++s)
      for (auto& m : tr.shapes[s]) inv[s].push_back(m.inverse());
  }

  for (int i = 0; i < tr.num_samples(); ++i) {
    const Mat& P = tr.pos[i];
    const double t = tr.t[i];
    for (int a = 0; a < N; ++a)
      for (int b = a + 1; b < N; ++b) {
        double dist = (P.col(a) - P.col(b)).norm();
        r.min_distance = std::min(r.min_distance, dist);
        if (dist < zeta - kDistanceTol && r.distance_ok) {
          r.distance_ok = false;
          r.first_distance_violation = t;
        }
      }
    for (auto& obs : sc.obstacles)
      for (int a = 0; a < N; ++a) {
        double v = obs.value(P.col(a));
        r.min_obstacle_margin = std::min(r.min_obstacle_margin, v);
        if (v < -kObstacleTol && r.obstacle_ok) {
          r.obstacle_ok = false;
          r.first_obstacle_violation = t;
        }
      }
    if (tr.has_shapes()) {
      for (int s = 0; s < S; ++s) {
        Vec c = tr.centroid(i, s);
        const Mat& Si = inv[s][tr.segment[i][s]];
        for (int a = 0; a < N; ++a) {
          if (tr.swarm_of[a] != s) continue;
          Vec off = P.col(a) - c;
          double q = off.dot(Si * off);
          r.max_membership = std::max(r.max_membership, q);
          if (q > 1 + kMembershipTol && r.membership_ok) {
            r.membership_ok = false;
            r.first_membership_violation = t;
          }
        }
      }
    }
  }

  for (auto& ev : tr.transitions) {
    const Mat& P = ev.pos;
    Vec c = P.rowwise().mean();
    const Mat& Si = inv[ev.swarm][ev.k + 1];
    bool bad = false;
    for (int a = 0; a < P.cols(); ++a) {
      for (int b = a + 1; b < P.cols(); ++b) {
        double dist = (P.col(a) - P.col(b)).norm();
        r.min_transition_distance = std::min(r.min_transition_distance, dist);
        bad = bad || dist < zeta - kDistanceTol;
      }
      Vec off = P.col(a) - c;
      double q = off.dot(Si * off);
      r.max_transition_membership = std::max(r.max_transition_membership, q);
      bad = bad || q > 1 + kMembershipTol;
    }
    if (bad && r.transition_ok) {
      r.transition_ok = false;
      r.first_transition_violation = ev.t;
    }
  }
  return r;
}

// ------------------------------------------------------------------------ I/O

void write_trace_csv(std::ostream& os, const Trace& tr) {
  os << "t,swarm,agent";
  for (int i = 1; i <= tr.dim; ++i) os << ",p_" << i;
  for (int i = 1; i <= tr.dim; ++i) os << ",v_" << i;
  os << "\n" << std::setprecision(17);
  for (int k = 0; k < tr.num_samples(); ++k)
    for (int a = 0; a < tr.num_agents(); ++a) {
      os << tr.t[k] << ',' << tr.swarm_ids[tr.swarm_of[a]] << ',' << tr.local_index[a];
      for (int i = 0; i < tr.dim; ++i) os << ',' << tr.pos[k](i, a);
      for (int i = 0; i < tr.dim; ++i) os << ',' << tr.vel[k](i, a);
      os << '\n';
    }
}

namespace {

[[noreturn]] void csv_error(long line, const std::string& msg) {
  throw std::runtime_error("trace line " + std::to_string(line) + ": " + msg);
}

double parse_num(const std::string& s, long line) {
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    csv_error(line, "not a number: '" + s + "'");
  }
  if (used != s.size() || !std::isfinite(v)) csv_error(line, "not a number: '" + s + "'");
  return v;
}

}  // namespace

Trace read_trace_csv(std::istream& is, const Scenario& sc) {
  Trace tr;
  const int d = sc.dimension;
  tr.dim = d;
  std::map<int, int> swarm_pos;
  std::map<std::pair<int, int>, int> agent_col;
  for (int s = 0; s < static_cast<int>(sc.swarms.size()); ++s) {
    tr.swarm_ids.push_back(sc.swarms[s].id);
    swarm_pos[sc.swarms[s].id] = s;
    for (int i = 0; i < sc.swarms[s].size(); ++i) {
      agent_col[{s, i}] = tr.num_agents();
      tr.swarm_of.push_back(s);
      tr.local_index.push_back(i);
    }
  }
  const int N = tr.num_agents();

  std::string line;
  long ln = 1;
  if (!std::getline(is, line)) csv_error(1, "empty trace");
  {
    std::ostringstream want;
    want << "t,swarm,agent";
    for (int i = 1; i <= d; ++i) want << ",p_" << i;
    for (int i = 1; i <= d; ++i) want << ",v_" << i;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != want.str()) csv_error(1, "header must be '" + want.str() + "'");
  }

  std::vector<char> seen;
  auto finish_sample = [&](long at) {
    if (tr.t.empty()) return;
    for (int a = 0; a < N; ++a)
      if (!seen[a]) csv_error(at, "sample t=" + std::to_string(tr.t.back()) + " is missing agents");
  };
  while (std::getline(is, line)) {
    ++ln;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (static_cast<int>(f.size()) != 3 + 2 * d)
      csv_error(ln, "expected " + std::to_string(3 + 2 * d) + " fields, got " + std::to_string(f.size()));
    double t = parse_num(f[0], ln);
    double sid = parse_num(f[1], ln), aid = parse_num(f[2], ln);
    if (sid != std::floor(sid) || aid != std::floor(aid)) csv_error(ln, "swarm and agent must be integers");
    auto sp = swarm_pos.find(static_cast<int>(sid));
    if (sp == swarm_pos.end()) csv_error(ln, "unknown swarm " + f[1]);
    auto ac = agent_col.find({sp->second, static_cast<int>(aid)});
    if (ac == agent_col.end()) csv_error(ln, "unknown agent " + f[2] + " in swarm " + f[1]);
    if (tr.t.empty() || t != tr.t.back()) {
      if (!tr.t.empty() && t <= tr.t.back()) csv_error(ln, "time does not increase");
      finish_sample(ln);
      tr.t.push_back(t);
      tr.pos.push_back(Mat::Zero(d, N));
      tr.vel.push_back(Mat::Zero(d, N));
      seen.assign(N, 0);
    }
    int a = ac->second;
    if (seen[a]) csv_error(ln, "duplicate row for agent " + f[2] + " of swarm " + f[1]);
    seen[a] = 1;
    for (int i = 0; i < d; ++i) {
      tr.pos.back()(i, a) = parse_num(f[3 + i], ln);
      tr.vel.back()(i, a) = parse_num(f[3 + d + i], ln);
    }
  }
  finish_sample(ln);
  if (tr.num_samples() < 2) csv_error(ln, "trace needs at least two samples");
  tr.dt = tr.t[1] - tr.t[0];
  for (int k = 2; k < tr.num_samples(); ++k)
    if (std::abs(tr.t[k] - tr.t[k - 1] - tr.dt) > 1e-6 * std::max(1.0, tr.dt))
      throw std::runtime_error("trace samples are not uniformly spaced near t=" + std::to_string(tr.t[k]));
  return tr;
}

void attach_shapes(Trace& tr, const plan::PlanPath& path) {
  const int S = static_cast<int>(tr.swarm_ids.size());
  if (static_cast<int>(path.swarms.size()) != S)
    throw std::invalid_argument("plan has " + std::to_string(path.swarms.size()) + " swarms, trace has " +
                                std::to_string(S));
  tr.shapes.assign(S, {});
  tr.transitions.clear();
  for (int s = 0; s < S; ++s)
    for (auto& wp : path.swarms[s].waypoints) {
      if (wp.sigma.rows() != tr.dim) throw std::invalid_argument("plan dimension does not match trace");
      tr.shapes[s].push_back(wp.sigma);
    }
  tr.segment.assign(tr.num_samples(), std::vector<int>(S, 0));
  for (int i = 0; i < tr.num_samples(); ++i)
    for (int s = 0; s < S; ++s) {
      const auto& w = path.swarms[s].waypoints;
      const int K = static_cast<int>(w.size()) - 1;
      int k = 1;
      while (k <= K && w[k].t <= tr.t[i]) ++k;
      tr.segment[i][s] = K == 0 ? 0 : std::min(k, K);
    }
}

std::string report_json(const StlReport& stl, const SafetyReport& sf) {
  auto when = [](double t) { return t < 0 ? json(nullptr) : json(t); };
  auto num = [](double v) { return std::abs(v) >= 1e299 ? json(nullptr) : json(v); };
  json j;
  j["ok"] = stl.satisfied && sf.ok();
  json c = json::array();
  for (auto& v : stl.conjuncts) c.push_back({{"formula", v.formula}, {"satisfied", v.satisfied}});
  j["stl"] = {{"satisfied", stl.satisfied}, {"conjuncts", c}};
  j["safety"] = {
      {"ok", sf.ok()},
      {"pairwise_distance", {{"ok", sf.distance_ok}, {"min", num(sf.min_distance)},
                             {"first_violation", when(sf.first_distance_violation)}}},
      {"obstacle", {{"ok", sf.obstacle_ok}, {"min_margin", num(sf.min_obstacle_margin)},
                    {"first_violation", when(sf.first_obstacle_violation)}}},
      {"membership", {{"ok", sf.membership_ok}, {"max", sf.max_membership},
                      {"first_violation", when(sf.first_membership_violation)}}},
      {"transition", {{"ok", sf.transition_ok}, {"min_distance", num(sf.min_transition_distance)},
                      {"max_membership", sf.max_transition_membership},
                      {"first_violation", when(sf.first_transition_violation)}}},
  };
  return j.dump(2) + "\n";
}

}  // namespace swarmstl::rt
