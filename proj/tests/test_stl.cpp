#include <doctest.h>

#include <random>

#include "support.hpp"
#include "swarmstl/runtime.hpp"
#include "swarmstl/stl.hpp"

using namespace swarmstl;
using stl::Op;

namespace {

stl::ParseContext ctx(int total = 10) {
  stl::ParseContext c;
  c.regions = {"A", "B", "R"};
  c.total_agents = total;
  c.default_n = 2;
  return c;
}

// Random formula over A and B with integer intervals; negations anywhere except above Until.
stl::FormulaPtr random_formula(std::mt19937& rng, int depth, bool allow_until = true) {
  std::uniform_int_distribution<int> pick(0, depth <= 0 ? 1 : 8), n(1, 3), lo(0, 2), len(1, 3);
  switch (pick(rng)) {
    case 0: return stl::pred("A", n(rng));
    case 1: return stl::pred("B", n(rng));
    case 2: return stl::negate(random_formula(rng, depth - 1, false));
    case 3: return stl::conj({random_formula(rng, depth - 1, allow_until), random_formula(rng, depth - 1, allow_until)});
    case 4: return stl::disj({random_formula(rng, depth - 1, allow_until), random_formula(rng, depth - 1, allow_until)});
    case 5: {
      double a = lo(rng);
      return stl::always(a, a + len(rng), random_formula(rng, depth - 1, allow_until));
    }
    case 6: {
      double a = lo(rng);
      return stl::eventually(a, a + len(rng), random_formula(rng, depth - 1, allow_until));
    }
    case 7:
      if (allow_until) {
        double a = lo(rng);
        return stl::until(a, a + len(rng), random_formula(rng, depth - 1, true), random_formula(rng, depth - 1, true));
      }
      return stl::make_true();
    default: return stl::negate(stl::pred("A", n(rng)));
  }
}

std::map<std::string, Polytope> regions() {
  auto box = [](double x0, double x1, double y0, double y1) {
    Polytope p;
    p.rows = {{testing::v2(1, 0), -x0}, {testing::v2(-1, 0), x1}, {testing::v2(0, 1), -y0}, {testing::v2(0, -1), y1}};
    return p;
  };
  return {{"A", box(0, 1, 0, 1)}, {"B", box(0.5, 2, 0, 1)}};
}

// three agents wandering on [0,2] x [0,1]
rt::Trace random_trace(std::mt19937& rng, int samples, double dt) {
  std::uniform_real_distribution<double> step(-0.4, 0.4);
  std::vector<std::vector<Vec>> s;
  std::vector<Vec> cur{testing::v2(0.5, 0.5), testing::v2(1.0, 0.5), testing::v2(1.5, 0.5)};
  for (int i = 0; i < samples; ++i) {
    s.push_back(cur);
    for (auto& p : cur) p[0] = std::clamp(p[0] + step(rng), -0.2, 2.2);
  }
  return testing::make_trace(dt, s);
}

}  // namespace

TEST_CASE("parse the three-conjunct benchmark formula") {
  auto c = ctx(5);
  c.regions = {"B", "Gr", "R"};
  auto f = stl::parse("(F[0,20] G[0,5] B{5}) & (F[0,20] G[0,5] Gr{5}) & (G[0,20] !R{1})", &c);
  auto parts = stl::conjuncts(f);
  REQUIRE(parts.size() == 3);
  CHECK(parts[0]->op == Op::Eventually);
  CHECK(parts[0]->kids[0]->op == Op::Always);
  CHECK(parts[0]->kids[0]->kids[0]->n_mu == 5);
  CHECK(parts[2]->kids[0]->op == Op::Not);
  CHECK(stl::horizon(f) == 25.0);
  CHECK(stl::parse("True")->op == Op::True);
}

TEST_CASE("parse errors") {
  auto c = ctx();
  CHECK_THROWS_AS(stl::parse("F[3,1] B{2}", &c), stl::ParseError);
  CHECK_THROWS_AS(stl::parse("F[0,1] Q{2}", &c), stl::ParseError);
  CHECK_THROWS_AS(stl::parse("A{11}", &c), stl::ParseError);
  CHECK_THROWS_AS(stl::parse("A{0}", &c), stl::ParseError);
  CHECK_THROWS_AS(stl::parse("A{2} &", &c), stl::ParseError);
  CHECK_THROWS_AS(stl::parse("G[0,1 A{2}", &c), stl::ParseError);
  try {
    stl::parse("A{2} & & B{1}", &c);
    FAIL("expected a parse error");
  } catch (const stl::ParseError& e) {
    CHECK(e.pos == 7);
  }
  CHECK(stl::parse("A", &c)->n_mu == 2);
}

TEST_CASE("operator precedence") {
  auto c = ctx();
  auto f = stl::parse("A{1} | B{1} & A{2}", &c);
  REQUIRE(f->op == Op::Or);
  CHECK(f->kids[1]->op == Op::And);
  auto g = stl::parse("A{1} & B{1} U[0,2] A{2}", &c);
  REQUIRE(g->op == Op::And);
  CHECK(g->kids[1]->op == Op::Until);
}

TEST_CASE("to_string reparses to the same text") {
  std::mt19937 rng(21);
  auto c = ctx();
  for (int i = 0; i < 200; ++i) {
    auto f = random_formula(rng, 3);
    auto text = stl::to_string(f);
    CHECK(stl::to_string(stl::parse(text, &c)) == text);
  }
}

TEST_CASE("negation normal form") {
  auto c = ctx();
  auto f = stl::to_nnf(stl::parse("!(A{1} & B{1})", &c));
  REQUIRE(f->op == Op::Or);
  CHECK(f->kids[0]->op == Op::Not);
  CHECK(f->kids[1]->op == Op::Not);
  CHECK(stl::to_string(stl::to_nnf(stl::parse("!!A{1}", &c))) == "A{1}");
  auto g = stl::to_nnf(stl::parse("!G[1,2] A{1}", &c));
  CHECK(g->op == Op::Eventually);
  CHECK(g->a == 1.0);
  CHECK(g->kids[0]->op == Op::Not);
  CHECK_THROWS(stl::to_nnf(stl::parse("!(A{1} U[0,1] B{1})", &c)));
}

TEST_CASE("nnf preserves monitor verdicts on random traces") {
  std::mt19937 rng(5);
  auto reg = regions();
  int nontrivial = 0;
  for (int trial = 0; trial < 300; ++trial) {
    auto f = random_formula(rng, 3);
    auto g = stl::to_nnf(f);
    CHECK(stl::is_nnf(g));
    auto tr = random_trace(rng, 80, 0.25);
    bool a = rt::monitor_stl(tr, f, reg).satisfied;
    bool b = rt::monitor_stl(tr, g, reg).satisfied;
    CHECK(a == b);
    nontrivial += a;
  }
  // both verdicts occur
  CHECK(nontrivial > 20);
  CHECK(nontrivial < 280);
}

TEST_CASE("lifting chooses swarms by size") {
  auto atoms = [](const stl::LiftedPtr& f) {
    std::vector<std::pair<int, bool>> out;
    std::vector<stl::LiftedPtr> st{f};
    while (!st.empty()) {
      auto g = st.back();
      st.pop_back();
      if (g->kind == stl::Lifted::Kind::Atom) out.push_back({g->swarm, g->negated});
      for (auto& k : g->kids) st.push_back(k);
    }
    return out;
  };
  auto one = stl::lift(stl::pred("A", 10), {20, 5});
  CHECK(one->kind == stl::Lifted::Kind::Atom);
  CHECK(one->swarm == 0);

  auto neg = stl::lift(stl::negate(stl::pred("A", 1)), {3});
  CHECK(neg->kind == stl::Lifted::Kind::Atom);
  CHECK(neg->negated);

  // negation with a swarm below the count: all-negated branch or exactly that swarm inside
  auto two = stl::lift(stl::negate(stl::pred("A", 4)), {3, 6});
  REQUIRE(two->kind == stl::Lifted::Kind::Or);
  CHECK(two->kids.size() == 2);
  CHECK(atoms(two->kids[1]) == std::vector<std::pair<int, bool>>{{1, true}, {0, false}});

  auto g3 = stl::lift(stl::eventually(0, 40, stl::pred("G3", 25)), {20, 5, 15, 30});
  REQUIRE(g3->kind == stl::Lifted::Kind::Eventually);
  CHECK(g3->kids[0]->kind == stl::Lifted::Kind::Atom);
  CHECK(g3->kids[0]->swarm == 3);
  auto g1 = stl::lift(stl::pred("G1", 20), {20, 5, 15, 30});
  CHECK(atoms(g1).size() == 2);

  CHECK_THROWS_AS(stl::lift(stl::pred("A", 25), {20, 5}), stl::LiftError);
  CHECK_THROWS_AS(stl::lift(stl::pred("A", 26), {20, 5}), stl::LiftError);
  CHECK_THROWS(stl::lift(stl::negate(stl::conj({stl::pred("A", 1), stl::pred("B", 1)})), {3}));
}

TEST_CASE("lifting is monotone in swarm size") {
  std::mt19937 rng(9);
  std::uniform_int_distribution<int> sz(1, 12), idx(0, 3), n(1, 12);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<int> sizes{sz(rng), sz(rng), sz(rng), sz(rng)};
    int need = n(rng);
    auto before = stl::swarms_at_least(need, sizes);
    sizes[idx(rng)] += sz(rng);
    auto after = stl::swarms_at_least(need, sizes);
    for (int s : before) CHECK(std::find(after.begin(), after.end(), s) != after.end());
    CHECK(stl::swarms_below(need, sizes).size() + after.size() == sizes.size());
  }
}
