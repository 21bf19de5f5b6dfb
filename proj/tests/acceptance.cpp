// Acceptance suite: prints one PASS/FAIL line per criterion, exit code 1 if any fails.
#include <spdlog/spdlog.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "support.hpp"
#include "swarmstl/geometry.hpp"
#include "swarmstl/log.hpp"
#include "swarmstl/milp.hpp"
#include "swarmstl/planner.hpp"
#include "swarmstl/runtime.hpp"

using namespace swarmstl;
using testing::json;

namespace {

constexpr double kPi = 3.14159265358979323846;

// pinned tolerances
constexpr double kStlcgBudget = 300.0;
constexpr double kWallBudget = 600.0;
constexpr double kScaleFactor = 2.0;
constexpr double kDriftTol = 1e-9;
constexpr double kMilpTol = 1e-6;
constexpr double kSupportTol = 1e-3;
constexpr double kSeparationTol = 1e-6;
constexpr double kAuditTol = 1e-6;

struct Verdict {
  bool pass = true;
  std::string detail;
};

std::vector<std::pair<int, Verdict>> verdicts;

void report(int id, const char* name, const Verdict& v) {
  std::printf("[%s] criterion %d %s: %s\n", v.pass ? "PASS" : "FAIL", id, name, v.detail.c_str());
  std::fflush(stdout);
  verdicts.push_back({id, v});
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
}

// Shared state for criteria 6 and 8.
struct PlanRecord {
  std::string name;
  int tau_max;
  plan::PlanResult res;
};
std::vector<PlanRecord> records;

struct EndToEnd {
  bool planned = false, stl_ok = false, safety_ok = false;
  double seconds = 0.0;
  plan::PlanResult res;
  rt::SafetyReport safety;
};

EndToEnd end_to_end(const std::string& name, const Scenario& sc) {
  EndToEnd e;
  auto ctx = stl::context_for(sc);
  auto f = stl::parse(sc.formula, &ctx);
  auto t = std::chrono::steady_clock::now();
  e.res = plan::plan(sc, f);
  e.seconds = seconds_since(t);
  records.push_back({name, sc.constants.tau_max, e.res});
  e.planned = e.res.status == plan::Status::Success && e.res.path.epsilon >= 0;
  if (!e.planned) return e;
  auto tr = rt::simulate(e.res.path, sc);
  e.stl_ok = rt::monitor_stl(tr, f, sc.regions).satisfied;
  e.safety = rt::monitor_safety(tr, sc);
  e.safety_ok = e.safety.ok();
  return e;
}

std::string describe(const EndToEnd& e) {
  if (!e.planned)
    return "plan failed after " + std::to_string(e.res.iterations) + " iterations (" + e.res.reason + ", eps " +
           fmt("%.4g", e.res.path.epsilon) + ") in " + fmt("%.1f s", e.seconds);
  return "eps " + fmt("%.4g", e.res.path.epsilon) + ", " + fmt("%.1f s", e.seconds) + ", stl " +
         (e.stl_ok ? "ok" : "VIOLATED") + ", safety " + (e.safety_ok ? "ok" : "VIOLATED");
}

// ------------------------------------------------------------------------- 1

Verdict criterion1() {
  Scenario sc = load_scenario_file(testing::scenario_path("stlcg1.json"));
  Verdict v;
  bool shape = sc.swarms.size() == 1 && sc.swarms[0].size() == 5 && sc.swarms[0].segments == 9 &&
               sc.constants.eta == 0.05 && sc.constants.zeta == 0.01 && sc.swarms[0].sigma_init &&
               (*sc.swarms[0].sigma_init - 0.01 * Mat::Identity(2, 2)).norm() == 0.0;
  auto e = end_to_end("stlcg-1", sc);
  v.pass = shape && e.planned && e.stl_ok && e.safety_ok && e.seconds < kStlcgBudget;
  v.detail = describe(e) + fmt(", min distance %.4g", e.safety.min_distance);
  if (!shape) v.detail += ", scenario does not match the benchmark sizes";
  return v;
}

// ------------------------------------------------------------------------- 2

// Every atom over `region` refers to a swarm with at least `need` agents.
bool assigned_by_size(const stl::LiftedPtr& f, const std::string& region, int need, const std::vector<int>& sizes,
                      int& found) {
  if (f->kind == stl::Lifted::Kind::Atom && f->region == region && !f->negated) {
    ++found;
    return sizes[f->swarm] >= need;
  }
  bool ok = true;
  for (auto& k : f->kids) ok = assigned_by_size(k, region, need, sizes, found) && ok;
  return ok;
}

Verdict criterion2() {
  Verdict v;
  Scenario sc = load_scenario_file(testing::scenario_path("wall1.json"));
  Scenario sx = load_scenario_file(testing::scenario_path("wall1_x2.json"));
  const bool sizes = sc.swarm_sizes() == std::vector<int>{20, 5, 15, 30};
  bool ks = true;
  for (auto& s : sc.swarms) ks = ks && s.segments == 6;

  auto ctx = stl::context_for(sc);
  auto lifted = plan::lift_for(sc, stl::parse(sc.formula, &ctx));
  bool goals = true;
  const std::vector<std::pair<std::string, int>> need{{"G1", 20}, {"G2", 5}, {"G3", 25}, {"G4", 10}};
  for (auto& [g, n] : need) {
    int found = 0;
    goals = assigned_by_size(lifted, g, n, sc.swarm_sizes(), found) && found > 0 && goals;
  }
  int g3 = 0;
  assigned_by_size(lifted, "G3", 25, sc.swarm_sizes(), g3);

  auto a = end_to_end("wall-1", sc);
  auto b = end_to_end("wall-1 x2", sx);
  const bool a_ok = a.planned && a.stl_ok && a.safety_ok && a.seconds < kWallBudget;
  const bool b_ok = b.planned && b.stl_ok && b.safety_ok && b.seconds < kWallBudget;
  const bool scale = a_ok && b_ok && b.seconds <= kScaleFactor * a.seconds && a.seconds <= kScaleFactor * b.seconds;
  v.pass = sizes && ks && goals && g3 == 1 && a_ok && b_ok && scale;
  v.detail = "wall-1: " + describe(a) + "; doubled agents: " + describe(b) + fmt("; time ratio %.2f", b.seconds / a.seconds);
  if (!goals || g3 != 1) v.detail += "; goal assignment not cardinality-feasible";
  return v;
}

// ------------------------------------------------------------------------- 3

Mat random_spd(std::mt19937& rng, double lo, double hi) {
  std::uniform_real_distribution<double> ev(lo, hi), ang(0, kPi);
  double t = ang(rng);
  Mat R(2, 2);
  R << std::cos(t), -std::sin(t), std::sin(t), std::cos(t);
  Mat D = Mat::Zero(2, 2);
  D(0, 0) = ev(rng);
  D(1, 1) = ev(rng);
  return R * D * R.transpose();
}

Verdict criterion3() {
  std::mt19937 rng(2024);
  std::uniform_real_distribution<double> u(-1, 1), step(-2, 2), dur(0.5, 4.0);
  std::uniform_int_distribution<int> ns(2, 12), ks(1, 5);
  double worst_d = 0, worst_m = 0;
  long segments = 0, min_samples = 1L << 40;
  const int configs = 100;
  for (int c = 0; c < configs; ++c) {
    const int n = ns(rng), K = ks(rng);
    Mat S0 = random_spd(rng, 0.002, 0.08);
    Mat L = geom::sqrtm(S0);
    std::vector<Vec> q;
    while (static_cast<int>(q.size()) < n) {
      Vec p = testing::v2(u(rng), u(rng));
      bool ok = p.squaredNorm() <= 1;
      for (auto& w : q) ok = ok && (L * (p - w)).norm() > 0.02;
      if (ok) q.push_back(p);
    }
    Vec mean = Vec::Zero(2);
    for (auto& p : q) mean += p / n;
    double r = 0;
    for (auto& p : q) r = std::max(r, (p - mean).norm());
    json agents = json::array();
    for (auto& p : q) {
      Vec x = testing::v2(5, 5) + L * (p - mean) * (0.95 / r);
      agents.push_back({{"p", {x[0], x[1]}}, {"v", {0, 0}}});
    }
    json doc = {{"dimension", 2},
                {"constants", testing::constants_json(4.0 * K + 1, 3)},
                {"swarms",
                 {{{"id", 1}, {"segments", K}, {"agents", agents}, {"sigma_init", {S0(0, 0), S0(0, 1), S0(1, 0), S0(1, 1)}}}}},
                {"obstacles", json::array()},
                {"regions", json::object()},
                {"formula", "True"}};
    Scenario sc = load_scenario(doc.dump());
    plan::PlanPath path;
    plan::SwarmPath sp;
    sp.id = 1;
    double t = 0;
    Vec p = sc.swarms[0].centroid();
    sp.waypoints.push_back({t, p, S0});
    for (int k = 1; k <= K; ++k) {
      t += dur(rng);
      p += testing::v2(step(rng), step(rng));
      sp.waypoints.push_back({t, p, random_spd(rng, 0.002, 0.08)});
    }
    path.swarms.push_back(sp);
    auto tr = rt::simulate(path, sc);
    std::vector<long> per_seg(K + 1, 0);
    for (int k = 0; k < tr.num_samples(); ++k) {
      const int seg = tr.segment[k][0];
      if (tr.t[k] <= sp.waypoints[K].t) ++per_seg[seg];
      const rt::Trace::Transition* ref = nullptr;
      for (auto& e : tr.transitions)
        if (e.k == seg - 1) ref = &e;
      if (!ref) return {false, "missing transition record"};
      const Mat& S = tr.shapes[0][seg];
      const Vec c0 = ref->pos.rowwise().mean();
      const Vec ck = tr.centroid(k, 0);
      for (int a = 0; a < n; ++a) {
        worst_m = std::max(worst_m, std::abs(geom::membership(tr.pos[k].col(a), ck, S) -
                                             geom::membership(ref->pos.col(a), c0, S)));
        for (int b = a + 1; b < n; ++b)
          worst_d = std::max(worst_d, std::abs((tr.pos[k].col(a) - tr.pos[k].col(b)).norm() -
                                               (ref->pos.col(a) - ref->pos.col(b)).norm()));
      }
    }
    for (int k = 1; k <= K; ++k) min_samples = std::min(min_samples, per_seg[k]);
    segments += K;
  }
  Verdict v;
  v.pass = worst_d <= kDriftTol && worst_m <= kDriftTol && min_samples >= 50;
  v.detail = std::to_string(configs) + " configurations, " + std::to_string(segments) + " segments, >= " +
             std::to_string(min_samples) + " samples per segment, distance drift " + fmt("%.2e", worst_d) +
             ", membership drift " + fmt("%.2e", worst_m);
  return v;
}

// ------------------------------------------------------------------------- 4

struct RandomMilp {
  lp::Problem p;
  std::vector<int> bins;
};

// Mixed structure: knapsack rows, big-M gated rows and covers over bounded columns.
RandomMilp random_milp(std::mt19937& rng, int nbin) {
  std::uniform_real_distribution<double> u(-1.0, 1.0), pos(0.1, 1.0);
  std::uniform_int_distribution<int> pick(0, nbin - 1), ncont(1, 4);
  RandomMilp m;
  const int nc = ncont(rng);
  std::vector<int> cont;
  for (int j = 0; j < nc; ++j) cont.push_back(m.p.add_col(-3 * pos(rng), 3 * pos(rng), u(rng)));
  for (int b = 0; b < nbin; ++b) m.bins.push_back(m.p.add_col(0, 1, u(rng)));
  // knapsack
  lp::Coeffs knap;
  double cap = 0;
  for (int b : m.bins) {
    double w = pos(rng);
    knap.push_back({b, w});
    cap += w;
  }
  m.p.add_row(knap, -lp::kInf, cap * std::uniform_real_distribution<double>(0.2, 0.8)(rng));
  // gated rows: sum a x >= c - M (1 - z)
  for (int r = 0; r < nbin; ++r) {
    lp::Coeffs cs;
    for (int j : cont) cs.push_back({j, u(rng)});
    const int z = m.bins[pick(rng)];
    const double c = u(rng), M = 20;
    cs.push_back({z, -M});
    m.p.add_row(cs, c - M, lp::kInf);
  }
  // covers
  for (int r = 0; r < 2; ++r) {
    int a = pick(rng), b = pick(rng);
    if (a == b) continue;
    m.p.add_row({{m.bins[a], 1}, {m.bins[b], 1}}, 1, lp::kInf);
  }
  // dense mixed row
  lp::Coeffs cs;
  for (int j : cont) cs.push_back({j, u(rng)});
  for (int b : m.bins) cs.push_back({b, 0.5 * u(rng)});
  m.p.add_row(cs, -lp::kInf, std::uniform_real_distribution<double>(-1, 2)(rng));
  return m;
}

Verdict criterion4() {
  std::mt19937 rng(777);
  std::uniform_int_distribution<int> nb(1, 12);
  int n = 0, feasible = 0, mismatches = 0;
  double worst = 0;
  for (; n < 60; ++n) {
    auto m = random_milp(rng, nb(rng));
    auto oracle = milp::enumerate(m.p, m.bins);
    milp::Options best_first;
    best_first.node_limit = 1L << 20;
    milp::Options dive = best_first;
    dive.dive_first = true;
    for (const auto& opt : {best_first, dive}) {
      auto r = milp::solve_milp(m.p, m.bins, opt);
      if (!oracle.has_incumbent) {
        mismatches += r.status != milp::Status::Infeasible;
        continue;
      }
      if (r.status != milp::Status::Optimal) {
        ++mismatches;
        continue;
      }
      const double d = std::abs(r.objective - oracle.objective);
      worst = std::max(worst, d);
      mismatches += d > kMilpTol || lp::max_violation(m.p, r.x) > kMilpTol;
    }
    feasible += oracle.has_incumbent;
  }
  Verdict v;
  v.pass = mismatches == 0 && n >= 50 && feasible >= 25;
  v.detail = std::to_string(n) + " instances (" + std::to_string(feasible) + " feasible, <= 12 binaries), " +
             std::to_string(mismatches) + " mismatches, worst objective gap " + fmt("%.2e", worst);
  return v;
}

// ------------------------------------------------------------------------- 5

Verdict criterion5() {
  std::mt19937 rng(55);
  std::uniform_real_distribution<double> u(-3, 3);
  const int samples = 1000000;
  double worst_support = 0;
  for (int pair = 0; pair < 100; ++pair) {
    geom::Ellipsoid e{testing::v2(u(rng), u(rng)), random_spd(rng, 0.01, 2.0)};
    Vec a = testing::v2(u(rng), u(rng));
    const double b = u(rng);
    Mat L = geom::sqrtm(e.shape);
    double best = 1e300;
    for (int i = 0; i < samples; ++i) {
      const double t = 2 * kPi * i / samples;
      best = std::min(best, a.dot(e.center + L * testing::v2(std::cos(t), std::sin(t))) + b);
    }
    worst_support = std::max(worst_support, std::abs(best - geom::support_min(e, a, b)));
  }

  // boundary points of both swept regions: chord point + eta circle + ellipse boundary
  std::uniform_real_distribution<double> pos(0, 4), lam(0, 1), ang(0, 2 * kPi), eta_d(0, 0.1);
  auto swept = [&](const geom::Segment& s, const Mat& L, double eta) {
    const double l = lam(rng), t1 = ang(rng), t2 = ang(rng);
    return Vec((1 - l) * s.p0 + l * s.p1 + eta * testing::v2(std::cos(t1), std::sin(t1)) +
               L * testing::v2(std::cos(t2), std::sin(t2)));
  };
  int pairs = 0, violations = 0;
  double worst_gap = 1e300;
  const double zeta = 0.01;
  while (pairs < 50) {
    geom::Segment s1{testing::v2(pos(rng), pos(rng)), testing::v2(pos(rng), pos(rng)), random_spd(rng, 0.001, 0.05)};
    geom::Segment s2{testing::v2(pos(rng), pos(rng)), testing::v2(pos(rng), pos(rng)), random_spd(rng, 0.001, 0.05)};
    const double eta = eta_d(rng);
    const double m0 = geom::separation_margin(s1, s2, eta, zeta, 0, 2);
    if (m0 < 0) continue;
    const double eps = m0 / std::sqrt(2.0);  // margin exactly zero at this eps
    Mat L1 = geom::sqrtm(s1.sigma), L2 = geom::sqrtm(s2.sigma);
    double dmin = 1e300;
    for (int i = 0; i < 20000; ++i) dmin = std::min(dmin, (swept(s1, L1, eta) - swept(s2, L2, eta)).norm());
    worst_gap = std::min(worst_gap, dmin - (zeta + eps));
    violations += dmin < zeta + eps - kSeparationTol;
    ++pairs;
  }
  Verdict v;
  v.pass = worst_support <= kSupportTol && violations == 0;
  v.detail = "support_min vs 1e6-point boundary minimum on 100 pairs: worst gap " + fmt("%.2e", worst_support) +
             "; separation margin on " + std::to_string(pairs) + " pairs: " + std::to_string(violations) +
             " violations, smallest sampled slack " + fmt("%.3g", worst_gap);
  return v;
}

// ------------------------------------------------------------------------- 7

json box(double x0, double y0, double w, double h) { return testing::box_json(x0, x0 + w, y0, y0 + h); }

json micro_doc(std::mt19937& rng, int idx) {
  std::uniform_real_distribution<double> u(1.0, 9.0), side(1.2, 2.0);
  std::uniform_int_distribution<int> nsw(1, 2), nk(1, 3), na(1, 3), form(0, 5);
  const int S = nsw(rng);
  json swarms = json::array();
  std::vector<Vec> starts;
  int max_size = 0;
  for (int s = 0; s < S; ++s) {
    Vec c;
    bool ok;
    do {
      c = testing::v2(u(rng), u(rng));
      ok = true;
      for (auto& o : starts) ok = ok && (c - o).norm() > 2.0;
    } while (!ok);
    starts.push_back(c);
    const int n = na(rng);
    max_size = std::max(max_size, n);
    swarms.push_back(testing::swarm_json(10 + s, nk(rng), c[0], c[1], n));
  }
  // goal and hazard regions away from the starts
  auto away = [&](double w, double h) {
    for (;;) {
      double x = std::uniform_real_distribution<double>(0.3, 9.7 - w)(rng);
      double y = std::uniform_real_distribution<double>(0.3, 9.7 - h)(rng);
      bool ok = true;
      for (auto& c : starts) ok = ok && (c[0] < x - 0.5 || c[0] > x + w + 0.5 || c[1] < y - 0.5 || c[1] > y + h + 0.5);
      if (ok) return box(x, y, w, h);
    }
  };
  json regions = {{"A", away(side(rng), side(rng))}, {"R", away(side(rng), side(rng))}};
  std::uniform_int_distribution<int> need(1, max_size);
  const std::string n = std::to_string(need(rng));
  static const char* templates[] = {"F[0,12] A{N}",
                                    "G[0,12] !R{1}",
                                    "F[0,12] G[0,2] A{N}",
                                    "F[0,12] A{N} & G[0,12] !R{1}",
                                    "G[0,12] (!R{1} | !A{1})",
                                    "F[2,10] A{N} | F[0,12] G[0,1] R{1}"};
  std::string f = templates[form(rng)];
  for (auto p = f.find('N'); p != std::string::npos; p = f.find('N')) f.replace(p, 1, n);
  (void)idx;
  return {{"dimension", 2},
          {"constants", testing::constants_json(12.0, 3)},
          {"swarms", swarms},
          {"obstacles", testing::arena_json()},
          {"regions", regions},
          {"formula", f}};
}

Verdict criterion7() {
  std::mt19937 rng(4242);
  int accepted = 0, counterexamples = 0, scenarios = 0;
  std::string first;
  while (scenarios < 20) {
    json doc = micro_doc(rng, scenarios);
    Scenario sc;
    try {
      sc = load_scenario(doc.dump());
    } catch (const ScenarioError&) {
      continue;
    }
    ++scenarios;
    auto e = end_to_end("micro " + std::to_string(scenarios), sc);
    if (!e.planned) continue;
    ++accepted;
    if (!e.stl_ok || !e.safety_ok) {
      ++counterexamples;
      if (first.empty()) first = sc.formula;
    }
  }
  Verdict v;
  v.pass = counterexamples == 0 && accepted > 0;
  v.detail = std::to_string(scenarios) + " micro-scenarios, " + std::to_string(accepted) +
             " plans accepted by the encoder, " + std::to_string(counterexamples) + " rejected by the monitor";
  if (!first.empty()) v.detail += " (first: " + first + ")";
  return v;
}

// ------------------------------------------------------------------------- 6, 8

Verdict criterion6() {
  int successes = 0, bad = 0;
  std::string first;
  for (auto& r : records) {
    if (r.res.status != plan::Status::Success) continue;
    ++successes;
    bool ok = r.res.big_m.ok && r.res.big_m.disjunctions_failed == 0;
    for (auto& [fam, s] : r.res.certificate.worst) ok = ok && s >= -kAuditTol;
    if (!ok) {
      ++bad;
      if (first.empty()) first = r.name;
    }
  }
  Verdict v;
  v.pass = bad == 0 && successes > 0;
  v.detail = std::to_string(successes) + " successful plans audited, " + std::to_string(bad) + " failed";
  if (!first.empty()) v.detail += " (first: " + first + ")";
  return v;
}

Verdict criterion8() {
  // crafted scenarios without an eps >= 0 plan
  auto crafted = [](std::string formula, json swarms, json regions) {
    return json{{"dimension", 2},
                {"constants", testing::constants_json(10.0, 3)},
                {"swarms", swarms},
                {"obstacles", testing::arena_json()},
                {"regions", regions},
                {"formula", formula}};
  };
  json one = {testing::swarm_json(1, 3, 2, 2, 3)};
  const std::vector<std::pair<std::string, json>> cases{
      {"unreachable goal", crafted("F[0,2] A{3}", one, {{"A", box(8, 8, 1, 1)}})},
      {"goal inside hazard", crafted("F[0,10] A{3} & G[0,10] !R{1}", one, {{"A", box(5, 5, 1, 1)}, {"R", box(4, 4, 3, 3)}})},
      {"contradiction", crafted("G[0,10] !A{1} & F[0,10] A{1}", one, {{"A", box(5, 5, 1, 1)}})},
      {"goal outside arena", crafted("F[0,10] A{1}", one, {{"A", box(12, 12, 1, 1)}})},
      {"no swarm large enough",
       crafted("F[0,10] A{3}", {testing::swarm_json(1, 2, 2, 2, 2), testing::swarm_json(2, 2, 8, 2, 2)},
               {{"A", box(5, 5, 1, 1)}})},
  };
  int crafted_ok = 0;
  for (auto& [name, doc] : cases) {
    Scenario sc = load_scenario(doc.dump());
    auto ctx = stl::context_for(sc);
    auto res = plan::plan(sc, stl::parse(sc.formula, &ctx));
    records.push_back({name, sc.constants.tau_max, res});
    crafted_ok += res.status == plan::Status::Failure && !res.reason.empty();
  }
  int definite = 0;
  for (auto& r : records) {
    const bool status_ok =
        r.res.status == plan::Status::Success ? r.res.reason.empty() && r.res.path.epsilon >= 0 : !r.res.reason.empty();
    definite += status_ok && r.res.iterations <= r.tau_max;
  }
  Verdict v;
  v.pass = definite == static_cast<int>(records.size()) && crafted_ok == static_cast<int>(cases.size());
  v.detail = std::to_string(definite) + "/" + std::to_string(records.size()) +
             " planner runs returned a definite status within tau_max; " + std::to_string(crafted_ok) + "/" +
             std::to_string(cases.size()) + " crafted infeasible scenarios reported failure";
  return v;
}

}  // namespace

int main() {
  init_logging();
  if (!std::getenv("SWARMSTL_LOG")) spdlog::set_level(spdlog::level::err);
  report(3, "drift invariants", criterion3());
  report(4, "MILP oracle equivalence", criterion4());
  report(5, "geometry oracles", criterion5());
  report(1, "stlcg-1 end-to-end", criterion1());
  report(7, "monitor-encoder agreement", criterion7());
  report(2, "wall-1 end-to-end", criterion2());
  report(6, "encoder soundness audit", criterion6());
  report(8, "termination", criterion8());
  int failed = 0;
  for (auto& [id, v] : verdicts) failed += !v.pass;
  std::printf("%d/%zu criteria passed\n", static_cast<int>(verdicts.size()) - failed, verdicts.size());
  return failed == 0 ? 0 : 1;
}
