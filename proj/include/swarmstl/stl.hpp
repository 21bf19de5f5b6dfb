#pragma once

#include <memory>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace swarmstl {
struct Scenario;
}

namespace swarmstl::stl {

enum class Op { True, False, Pred, Not, And, Or, Always, Eventually, Until };

struct Formula;
using FormulaPtr = std::shared_ptr<const Formula>;

struct Formula {
  Op op = Op::True;
  std::string region;  // Pred
  int n_mu = -1;       // Pred; -1 until resolved against a scenario
  double a = 0.0, b = 0.0;
  std::vector<FormulaPtr> kids;  // Until: {lhs, rhs}
};

FormulaPtr make_true();
FormulaPtr make_false();
FormulaPtr pred(const std::string& region, int n_mu);
FormulaPtr negate(FormulaPtr f);
FormulaPtr conj(std::vector<FormulaPtr> kids);
FormulaPtr disj(std::vector<FormulaPtr> kids);
FormulaPtr always(double a, double b, FormulaPtr f);
FormulaPtr eventually(double a, double b, FormulaPtr f);
FormulaPtr until(double a, double b, FormulaPtr lhs, FormulaPtr rhs);

struct ParseError : std::runtime_error {
  ParseError(const std::string& msg, std::size_t pos)
      : std::runtime_error(msg + " at position " + std::to_string(pos)), pos(pos) {}
  std::size_t pos;
};

struct ParseContext {
  std::set<std::string> regions;
  int total_agents = 0;
  int default_n = 1;  // used when the {n} suffix is omitted
};

ParseContext context_for(const Scenario& s);

// Grammar: phi := True | atom | !phi | phi & phi | phi | phi | G[a,b] phi
//               | F[a,b] phi | phi U[a,b] phi | ( phi );  atom := IDENT {n}
// Precedence (loosest first): |, &, U, unary.
FormulaPtr parse(const std::string& text, const ParseContext* ctx = nullptr);

FormulaPtr to_nnf(const FormulaPtr& f);
bool is_nnf(const FormulaPtr& f);
std::string to_string(const FormulaPtr& f);
// latest time offset the formula can look at
double horizon(const FormulaPtr& f);
// top-level conjuncts (And flattened)
std::vector<FormulaPtr> conjuncts(const FormulaPtr& f);

struct Lifted;
using LiftedPtr = std::shared_ptr<const Lifted>;

struct Lifted {
  enum class Kind { True, False, Atom, And, Or, Always, Eventually, Until };
  Kind kind = Kind::True;
  std::string region;  // Atom
  int swarm = -1;      // Atom: swarm position in the scenario
  bool negated = false;
  double a = 0.0, b = 0.0;
  std::vector<LiftedPtr> kids;
};

struct LiftError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Swarms large enough (|N_s| >= n) and too small (|N_s| < n).
std::vector<int> swarms_at_least(int n, const std::vector<int>& sizes);
std::vector<int> swarms_below(int n, const std::vector<int>& sizes);

LiftedPtr lift(const FormulaPtr& nnf, const std::vector<int>& swarm_sizes);
std::string to_string(const LiftedPtr& f);

}  // namespace swarmstl::stl
