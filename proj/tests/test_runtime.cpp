#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "support.hpp"
#include "swarmstl/geometry.hpp"
#include "swarmstl/runtime.hpp"

using namespace swarmstl;
using testing::json;

namespace {

constexpr double kPi = 3.14159265358979323846;

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

// One swarm of n agents inside Sigma0 around (5, 5) with a K-segment random path.
struct Config {
  Scenario sc;
  plan::PlanPath path;
};

Config random_config(std::mt19937& rng, int n, int K) {
  std::uniform_real_distribution<double> u(-1, 1), step(-1.5, 1.5), dur(1.0, 3.0);
  Mat S0 = random_spd(rng, 0.005, 0.05);
  Mat L = geom::sqrtm(S0);
  // unit-disk offsets, recentred and scaled so every agent sits strictly inside Sigma0
  std::vector<Vec> q;
  while (static_cast<int>(q.size()) < n) {
    Vec v = testing::v2(u(rng), u(rng));
    bool spaced = v.squaredNorm() <= 1;
    for (auto& w : q) spaced = spaced && (L * (v - w)).norm() > 0.05;
    if (spaced) q.push_back(v);
  }
  Vec mean = Vec::Zero(2);
  for (auto& v : q) mean += v / n;
  double r = 0;
  for (auto& v : q) r = std::max(r, (v - mean).norm());
  json agents = json::array();
  for (auto& v : q) {
    Vec p = testing::v2(5, 5) + L * (v - mean) * (r > 0 ? 0.9 / r : 0.0);
    agents.push_back({{"p", {p[0], p[1]}}, {"v", {0, 0}}});
  }
  json sw = {{"id", 1}, {"segments", K}, {"agents", agents}, {"sigma_init", {S0(0, 0), S0(0, 1), S0(1, 0), S0(1, 1)}}};
  json doc = {{"dimension", 2},
              {"constants", testing::constants_json(3.0 * K + 1, 3)},
              {"swarms", {sw}},
              {"obstacles", json::array()},
              {"regions", json::object()},
              {"formula", "True"}};
  Config c{load_scenario(doc.dump()), {}};
  plan::SwarmPath sp;
  sp.id = 1;
  double t = 0;
  Vec p = c.sc.swarms[0].centroid();
  sp.waypoints.push_back({t, p, S0});
  for (int k = 1; k <= K; ++k) {
    t += dur(rng);
    p += testing::v2(step(rng), step(rng));
    sp.waypoints.push_back({t, p, random_spd(rng, 0.005, 0.05)});
  }
  c.path.swarms.push_back(sp);
  return c;
}

double membership_of(const rt::Trace& tr, int k, int a, const Mat& S) {
  Vec c = tr.centroid(k, 0);
  return geom::membership(tr.pos[k].col(a), c, S);
}

}  // namespace

TEST_CASE("single agent follows the smoothstep profile") {
  std::mt19937 rng(1);
  auto c = random_config(rng, 1, 3);
  auto tr = rt::simulate(c.path, c.sc);
  const auto& w = c.path.swarms[0].waypoints;
  for (int k = 0; k < tr.num_samples(); ++k)
    for (std::size_t j = 1; j < w.size(); ++j) {
      if (std::abs(tr.t[k] - w[j].t) < 1e-12) {
        CHECK((tr.pos[k].col(0) - w[j].p).norm() <= 1e-9);
        CHECK(tr.vel[k].col(0).norm() <= 1e-9);
      }
      const double ta = w[j - 1].t, tb = w[j].t;
      if (tr.t[k] > ta && tr.t[k] < tb) {
        const double s = (tr.t[k] - ta) / (tb - ta);
        const Vec expect = w[j - 1].p + (3 * s * s - 2 * s * s * s) * (w[j].p - w[j - 1].p);
        CHECK((tr.pos[k].col(0) - expect).norm() <= 1e-9);
      }
    }
  CHECK(tr.t.back() == doctest::Approx(rt::trace_end(c.sc)));
  CHECK((tr.pos.back().col(0) - w.back().p).norm() <= 1e-9);
}

TEST_CASE("pairwise distances and membership stay fixed along each segment") {
  std::mt19937 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    auto c = random_config(rng, 5, 3);
    auto tr = rt::simulate(c.path, c.sc);
    const int N = tr.num_agents();
    double worst_d = 0, worst_m = 0;
    for (int k = 0; k < tr.num_samples(); ++k) {
      const int seg = tr.segment[k][0];
      const rt::Trace::Transition* ref = nullptr;
      for (auto& e : tr.transitions)
        if (e.k == seg - 1) ref = &e;
      REQUIRE(ref);
      const Mat& S = tr.shapes[0][seg];
      const Vec c0 = ref->pos.rowwise().mean();
      for (int a = 0; a < N; ++a) {
        worst_m = std::max(worst_m, std::abs(membership_of(tr, k, a, S) - geom::membership(ref->pos.col(a), c0, S)));
        for (int b = a + 1; b < N; ++b)
          worst_d = std::max(worst_d, std::abs((tr.pos[k].col(a) - tr.pos[k].col(b)).norm() -
                                               (ref->pos.col(a) - ref->pos.col(b)).norm()));
      }
    }
    CHECK(worst_d <= 1e-9);
    CHECK(worst_m <= 1e-9);
    CHECK(rt::monitor_safety(tr, c.sc).membership_ok);
  }
}

TEST_CASE("transitions keep the centroid and the membership value") {
  std::mt19937 rng(3);
  auto c = random_config(rng, 6, 2);
  auto tr = rt::simulate(c.path, c.sc);
  const auto& agents = c.sc.swarms[0].agents;
  Vec c0 = c.sc.swarms[0].centroid();
  for (auto& e : tr.transitions) {
    const Mat& from = tr.shapes[0][e.k];
    const Mat& to = tr.shapes[0][e.k + 1];
    if (e.k == 0) {
      CHECK((Vec(e.pos.rowwise().mean()) - c0).norm() <= 1e-12);
      for (int a = 0; a < e.pos.cols(); ++a)
        CHECK(geom::membership(e.pos.col(a), c0, to) ==
              doctest::Approx(geom::membership(agents[a].p, c0, from)).epsilon(1e-9));
    }
  }
}

TEST_CASE("time step limits") {
  std::mt19937 rng(4);
  auto c = random_config(rng, 2, 2);
  const double lim = rt::max_dt(c.path, c.sc);
  CHECK(rt::default_dt(c.path, c.sc) == doctest::Approx(lim / 5));
  CHECK_THROWS_AS(rt::simulate(c.path, c.sc, 2 * lim), std::invalid_argument);
  CHECK_NOTHROW(rt::simulate(c.path, c.sc, lim));
  auto bad = c.path;
  bad.swarms[0].waypoints[2].t = bad.swarms[0].waypoints[1].t;
  CHECK_THROWS_AS(rt::simulate(bad, c.sc), std::invalid_argument);
}

TEST_CASE("swarm predicates count agents") {
  Polytope half;
  half.rows = {{testing::v2(1, 0), 0.0}};
  std::map<std::string, Polytope> reg{{"A", half}};
  std::vector<Vec> at{testing::v2(0.5, 0), testing::v2(-0.1, 0), testing::v2(0.2, 0)};
  auto tr = testing::make_trace(0.5, {at, at});
  CHECK(rt::monitor_stl(tr, stl::pred("A", 2), reg).satisfied);
  CHECK_FALSE(rt::monitor_stl(tr, stl::pred("A", 3), reg).satisfied);
  CHECK(rt::monitor_stl(tr, stl::negate(stl::pred("A", 3)), reg).satisfied);
  CHECK_THROWS(rt::monitor_stl(tr, stl::eventually(0, 5, stl::pred("A", 1)), reg));
}

TEST_CASE("late arrival violates the dwell") {
  std::map<std::string, Polytope> reg;
  reg["A"].rows = {{testing::v2(1, 0), -5.0}};  // x >= 5
  auto f = stl::eventually(0, 5, stl::always(0, 5, stl::pred("A", 1)));
  auto trace_arriving = [](double arrive) {
    std::vector<std::vector<Vec>> s;
    for (int i = 0; i <= 100; ++i) {
      double t = 0.1 * i;
      s.push_back({testing::v2(t < arrive ? 0.0 : 6.0, 0)});
    }
    return testing::make_trace(0.1, s);
  };
  CHECK(rt::monitor_stl(trace_arriving(4.0), f, reg).satisfied);
  CHECK(rt::monitor_stl(trace_arriving(5.0), f, reg).satisfied);
  CHECK_FALSE(rt::monitor_stl(trace_arriving(7.0), f, reg).satisfied);
}

TEST_CASE("safety monitor flags constructed violations") {
  json doc = {{"dimension", 2},
              {"constants", testing::constants_json()},
              {"swarms", {testing::swarm_json(1, 1, 5, 5, 2, 0.03)}},
              {"obstacles", testing::arena_json()},
              {"regions", json::object()},
              {"formula", "True"}};
  Scenario sc = load_scenario(doc.dump());
  // head-on crossing through the same point at t = 1
  std::vector<std::vector<Vec>> s;
  for (int i = 0; i <= 20; ++i) {
    double x = 0.1 * i;
    s.push_back({testing::v2(4 + x, 5), testing::v2(6 - x, 5)});
  }
  auto cross = testing::make_trace(0.1, s);
  auto r = rt::monitor_safety(cross, sc);
  CHECK_FALSE(r.distance_ok);
  CHECK(r.first_distance_violation == doctest::Approx(1.0));
  CHECK(r.obstacle_ok);

  s.back()[0] = testing::v2(-0.5, 5);
  r = rt::monitor_safety(testing::make_trace(0.1, s), sc);
  CHECK_FALSE(r.obstacle_ok);
  CHECK(r.first_obstacle_violation == doctest::Approx(2.0));
  CHECK(r.min_obstacle_margin == doctest::Approx(-0.5));

  // agent pushed out of its ellipsoid
  std::mt19937 rng(5);
  auto c = random_config(rng, 4, 2);
  auto tr = rt::simulate(c.path, c.sc);
  CHECK(rt::monitor_safety(tr, c.sc).ok());
  tr.pos[10](0, 1) += 1.0;
  auto m = rt::monitor_safety(tr, c.sc);
  CHECK_FALSE(m.membership_ok);
  CHECK(m.first_membership_violation == doctest::Approx(tr.t[10]));
}

TEST_CASE("trace CSV round trip and corrupted rows") {
  std::mt19937 rng(6);
  auto c = random_config(rng, 3, 2);
  auto tr = rt::simulate(c.path, c.sc);
  std::ostringstream os;
  rt::write_trace_csv(os, tr);
  std::istringstream is(os.str());
  auto back = rt::read_trace_csv(is, c.sc);
  REQUIRE(back.num_samples() == tr.num_samples());
  for (int k = 0; k < tr.num_samples(); ++k) CHECK((back.pos[k] - tr.pos[k]).norm() == 0.0);
  rt::attach_shapes(back, c.path);
  CHECK(rt::monitor_safety(back, c.sc).ok());

  std::string text = os.str();
  auto third = text.find('\n', text.find('\n', text.find('\n') + 1) + 1) + 1;
  text.replace(text.find(',', third), 1, ",abc");
  std::istringstream bad(text);
  try {
    rt::read_trace_csv(bad, c.sc);
    FAIL("expected a parse error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).rfind("trace line 4", 0) == 0);
  }
}
