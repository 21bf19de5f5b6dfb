#include "swarmstl/stl.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

#include "swarmstl/scenario.hpp"

namespace swarmstl::stl {

namespace {

FormulaPtr node(Op op, std::vector<FormulaPtr> kids = {}, double a = 0, double b = 0) {
  auto f = std::make_shared<Formula>();
  f->op = op;
  f->kids = std::move(kids);
  f->a = a;
  f->b = b;
  return f;
}

void check_interval(double a, double b, std::size_t pos) {
  if (!(a >= 0)) throw ParseError("interval lower bound must be >= 0", pos);
  if (a > b) throw ParseError("interval lower bound exceeds upper bound", pos);
}

class Parser {
 public:
  Parser(const std::string& t, const ParseContext* ctx) : t_(t), ctx_(ctx) {}

  FormulaPtr run() {
    FormulaPtr f = parse_or();
    skip();
    if (i_ != t_.size()) throw ParseError("unexpected '" + std::string(1, t_[i_]) + "'", i_);
    return f;
  }

 private:
  void skip() {
    while (i_ < t_.size() && std::isspace(static_cast<unsigned char>(t_[i_]))) ++i_;
  }
  bool peek(char c) {
    skip();
    return i_ < t_.size() && t_[i_] == c;
  }
  void expect(char c) {
    skip();
    if (i_ >= t_.size() || t_[i_] != c) throw ParseError(std::string("expected '") + c + "'", i_);
    ++i_;
  }
  // temporal keyword followed directly by '['
  bool temporal(char k) {
    skip();
    if (i_ + 1 < t_.size() && t_[i_] == k) {
      std::size_t j = i_ + 1;
      while (j < t_.size() && std::isspace(static_cast<unsigned char>(t_[j]))) ++j;
      return j < t_.size() && t_[j] == '[';
    }
    return false;
  }
  double number() {
    skip();
    std::size_t start = i_;
    while (i_ < t_.size() && (std::isdigit(static_cast<unsigned char>(t_[i_])) || t_[i_] == '.' ||
                              t_[i_] == 'e' || t_[i_] == 'E' || t_[i_] == '-' || t_[i_] == '+'))
      ++i_;
    if (start == i_) throw ParseError("expected a number", start);
    try {
      std::size_t used = 0;
      double v = std::stod(t_.substr(start, i_ - start), &used);
      if (used != i_ - start) throw ParseError("malformed number", start);
      return v;
    } catch (const std::logic_error&) {
      throw ParseError("malformed number", start);
    }
  }
  std::pair<double, double> interval() {
    std::size_t pos = i_;
    expect('[');
    double a = number();
    expect(',');
    double b = number();
    expect(']');
    check_interval(a, b, pos);
    return {a, b};
  }

  FormulaPtr parse_or() {
    std::vector<FormulaPtr> kids{parse_and()};
    while (peek('|')) {
      ++i_;
      kids.push_back(parse_and());
    }
    return kids.size() == 1 ? kids[0] : node(Op::Or, kids);
  }
  FormulaPtr parse_and() {
    std::vector<FormulaPtr> kids{parse_until()};
    while (peek('&')) {
      ++i_;
      kids.push_back(parse_until());
    }
    return kids.size() == 1 ? kids[0] : node(Op::And, kids);
  }
  FormulaPtr parse_until() {
    FormulaPtr lhs = parse_unary();
    if (temporal('U')) {
      ++i_;
      auto [a, b] = interval();
      FormulaPtr rhs = parse_unary();
      return node(Op::Until, {lhs, rhs}, a, b);
    }
    return lhs;
  }
  FormulaPtr parse_unary() {
    skip();
    if (peek('!')) {
      ++i_;
      return node(Op::Not, {parse_unary()});
    }
    if (temporal('G') || temporal('F')) {
      char k = t_[i_++];
      auto [a, b] = interval();
      FormulaPtr f = parse_unary();
      return node(k == 'G' ? Op::Always : Op::Eventually, {f}, a, b);
    }
    if (peek('(')) {
      ++i_;
      FormulaPtr f = parse_or();
      expect(')');
      return f;
    }
    return atom();
  }
  FormulaPtr atom() {
    skip();
    std::size_t start = i_;
    while (i_ < t_.size() && (std::isalnum(static_cast<unsigned char>(t_[i_])) || t_[i_] == '_')) ++i_;
    if (start == i_) {
      if (i_ >= t_.size()) throw ParseError("unexpected end of formula", i_);
      throw ParseError("unexpected '" + std::string(1, t_[i_]) + "'", i_);
    }
    if (!std::isalpha(static_cast<unsigned char>(t_[start])) && t_[start] != '_')
      throw ParseError("identifier expected", start);
    std::string name = t_.substr(start, i_ - start);
    if (name == "True") return make_true();
    if (name == "False") return make_false();
    int n = -1;
    if (peek('{')) {
      ++i_;
      skip();
      std::size_t np = i_;
      while (i_ < t_.size() && std::isdigit(static_cast<unsigned char>(t_[i_]))) ++i_;
      if (np == i_) throw ParseError("expected an integer agent count", np);
      n = std::stoi(t_.substr(np, i_ - np));
      expect('}');
      if (n < 1) throw ParseError("agent count must be >= 1", np);
      if (ctx_ && n > ctx_->total_agents)
        throw ParseError("agent count " + std::to_string(n) + " exceeds the " +
                             std::to_string(ctx_->total_agents) + " agents in the scenario",
                         np);
    }
    if (ctx_) {
      if (!ctx_->regions.count(name)) throw ParseError("unknown region '" + name + "'", start);
      if (n < 0) n = ctx_->default_n;
    }
    return pred(name, n);
  }

  const std::string& t_;
  const ParseContext* ctx_;
  std::size_t i_ = 0;
};

std::string num_str(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

}  // namespace

FormulaPtr make_true() { return node(Op::True); }
FormulaPtr make_false() { return node(Op::False); }
FormulaPtr pred(const std::string& region, int n_mu) {
  auto f = std::make_shared<Formula>();
  f->op = Op::Pred;
  f->region = region;
  f->n_mu = n_mu;
  return f;
}
FormulaPtr negate(FormulaPtr f) { return node(Op::Not, {std::move(f)}); }
FormulaPtr conj(std::vector<FormulaPtr> kids) { return node(Op::And, std::move(kids)); }
FormulaPtr disj(std::vector<FormulaPtr> kids) { return node(Op::Or, std::move(kids)); }
FormulaPtr always(double a, double b, FormulaPtr f) {
  check_interval(a, b, 0);
  return node(Op::Always, {std::move(f)}, a, b);
}
FormulaPtr eventually(double a, double b, FormulaPtr f) {
  check_interval(a, b, 0);
  return node(Op::Eventually, {std::move(f)}, a, b);
}
FormulaPtr until(double a, double b, FormulaPtr lhs, FormulaPtr rhs) {
  check_interval(a, b, 0);
  return node(Op::Until, {std::move(lhs), std::move(rhs)}, a, b);
}

ParseContext context_for(const Scenario& s) {
  ParseContext c;
  for (auto& [name, r] : s.regions) c.regions.insert(name);
  c.total_agents = s.total_agents();
  auto sizes = s.swarm_sizes();
  c.default_n = sizes.empty() ? 1 : *std::min_element(sizes.begin(), sizes.end());
  return c;
}

FormulaPtr parse(const std::string& text, const ParseContext* ctx) { return Parser(text, ctx).run(); }

namespace {

FormulaPtr nnf(const FormulaPtr& f, bool neg) {
  switch (f->op) {
    case Op::True: return neg ? make_false() : f;
    case Op::False: return neg ? make_true() : f;
    case Op::Pred: return neg ? negate(f) : f;
    case Op::Not: return nnf(f->kids[0], !neg);
    case Op::And:
    case Op::Or: {
      std::vector<FormulaPtr> kids;
      for (auto& k : f->kids) kids.push_back(nnf(k, neg));
      bool is_and = (f->op == Op::And) != neg;
      return node(is_and ? Op::And : Op::Or, kids);
    }
    case Op::Always:
    case Op::Eventually: {
      bool is_g = (f->op == Op::Always) != neg;
      return node(is_g ? Op::Always : Op::Eventually, {nnf(f->kids[0], neg)}, f->a, f->b);
    }
    case Op::Until:
      if (neg) throw std::invalid_argument("negated until has no release form in this language");
      return node(Op::Until, {nnf(f->kids[0], false), nnf(f->kids[1], false)}, f->a, f->b);
  }
  return f;
}

}  // namespace

FormulaPtr to_nnf(const FormulaPtr& f) { return nnf(f, false); }

bool is_nnf(const FormulaPtr& f) {
  if (f->op == Op::Not) return f->kids[0]->op == Op::Pred;
  for (auto& k : f->kids)
    if (!is_nnf(k)) return false;
  return true;
}

std::string to_string(const FormulaPtr& f) {
  auto iv = [&](const char* k) { return std::string(k) + "[" + num_str(f->a) + "," + num_str(f->b) + "] "; };
  switch (f->op) {
    case Op::True: return "True";
    case Op::False: return "False";
    case Op::Pred: return f->region + (f->n_mu >= 0 ? "{" + std::to_string(f->n_mu) + "}" : "");
    case Op::Not: return "!" + to_string(f->kids[0]);
    case Op::And:
    case Op::Or: {
      std::string s = "(";
      for (std::size_t i = 0; i < f->kids.size(); ++i) {
        if (i) s += f->op == Op::And ? " & " : " | ";
        s += to_string(f->kids[i]);
      }
      return s + ")";
    }
    case Op::Always: return iv("G") + to_string(f->kids[0]);
    case Op::Eventually: return iv("F") + to_string(f->kids[0]);
    case Op::Until:
      return "(" + to_string(f->kids[0]) + " U[" + num_str(f->a) + "," + num_str(f->b) + "] " +
             to_string(f->kids[1]) + ")";
  }
  return "?";
}

double horizon(const FormulaPtr& f) {
  double h = 0.0;
  for (auto& k : f->kids) h = std::max(h, horizon(k));
  switch (f->op) {
    case Op::Always:
    case Op::Eventually:
    case Op::Until: return f->b + h;
    default: return h;
  }
}

std::vector<FormulaPtr> conjuncts(const FormulaPtr& f) {
  if (f->op != Op::And) return {f};
  std::vector<FormulaPtr> out;
  for (auto& k : f->kids)
    for (auto& c : conjuncts(k)) out.push_back(c);
  return out;
}

std::vector<int> swarms_at_least(int n, const std::vector<int>& sizes) {
  std::vector<int> out;
  for (int s = 0; s < static_cast<int>(sizes.size()); ++s)
    if (sizes[s] >= n) out.push_back(s);
  return out;
}

std::vector<int> swarms_below(int n, const std::vector<int>& sizes) {
  std::vector<int> out;
  for (int s = 0; s < static_cast<int>(sizes.size()); ++s)
    if (sizes[s] < n) out.push_back(s);
  return out;
}

namespace {

using K = Lifted::Kind;

LiftedPtr lnode(K kind, std::vector<LiftedPtr> kids = {}, double a = 0, double b = 0) {
  auto f = std::make_shared<Lifted>();
  f->kind = kind;
  f->kids = std::move(kids);
  f->a = a;
  f->b = b;
  return f;
}

LiftedPtr latom(const std::string& region, int s, bool neg) {
  auto f = std::make_shared<Lifted>();
  f->kind = K::Atom;
  f->region = region;
  f->swarm = s;
  f->negated = neg;
  return f;
}

LiftedPtr land(std::vector<LiftedPtr> kids) { return kids.size() == 1 ? kids[0] : lnode(K::And, kids); }
LiftedPtr lor(std::vector<LiftedPtr> kids) { return kids.size() == 1 ? kids[0] : lnode(K::Or, kids); }

LiftedPtr lift_rec(const FormulaPtr& f, const std::vector<int>& sizes) {
  switch (f->op) {
    case Op::True: return lnode(K::True);
    case Op::False: return lnode(K::False);
    case Op::Pred: {
      auto qual = swarms_at_least(f->n_mu, sizes);
      if (qual.empty())
        throw LiftError("no swarm has at least " + std::to_string(f->n_mu) + " agents for region '" +
                        f->region + "'");
      std::vector<LiftedPtr> kids;
      for (int s : qual) kids.push_back(latom(f->region, s, false));
      return lor(kids);
    }
    case Op::Not: {
      const Formula& p = *f->kids[0];
      if (p.op != Op::Pred) throw std::invalid_argument("lift expects a formula in negation normal form");
      const int ns = static_cast<int>(sizes.size());
      std::vector<LiftedPtr> none;
      for (int s = 0; s < ns; ++s) none.push_back(latom(p.region, s, true));
      std::vector<LiftedPtr> branches{land(none)};
      for (int s : swarms_below(p.n_mu, sizes)) {
        std::vector<LiftedPtr> parts{latom(p.region, s, false)};
        for (int o = 0; o < ns; ++o)
          if (o != s) parts.push_back(latom(p.region, o, true));
        branches.push_back(land(parts));
      }
      return lor(branches);
    }
    case Op::And:
    case Op::Or: {
      std::vector<LiftedPtr> kids;
      for (auto& k : f->kids) kids.push_back(lift_rec(k, sizes));
      return f->op == Op::And ? land(kids) : lor(kids);
    }
    case Op::Always: return lnode(K::Always, {lift_rec(f->kids[0], sizes)}, f->a, f->b);
    case Op::Eventually: return lnode(K::Eventually, {lift_rec(f->kids[0], sizes)}, f->a, f->b);
    case Op::Until:
      return lnode(K::Until, {lift_rec(f->kids[0], sizes), lift_rec(f->kids[1], sizes)}, f->a, f->b);
  }
  return lnode(K::True);
}

}  // namespace

LiftedPtr lift(const FormulaPtr& f, const std::vector<int>& sizes) {
  if (!is_nnf(f)) throw std::invalid_argument("lift expects a formula in negation normal form");
  int total = 0;
  for (int n : sizes) total += n;
  std::vector<const Formula*> stack{f.get()};
  while (!stack.empty()) {
    const Formula* g = stack.back();
    stack.pop_back();
    if (g->op == Op::Pred) {
      if (g->n_mu < 1) throw std::invalid_argument("predicate '" + g->region + "' has no resolved agent count");
      if (g->n_mu > total) throw LiftError("agent count exceeds the total number of agents");
    }
    for (auto& k : g->kids) stack.push_back(k.get());
  }
  return lift_rec(f, sizes);
}

std::string to_string(const LiftedPtr& f) {
  auto iv = [&](const char* k) { return std::string(k) + "[" + num_str(f->a) + "," + num_str(f->b) + "] "; };
  switch (f->kind) {
    case K::True: return "True";
    case K::False: return "False";
    case K::Atom: return (f->negated ? "!" : "") + f->region + "^" + std::to_string(f->swarm);
    case K::And:
    case K::Or: {
      std::string s = "(";
      for (std::size_t i = 0; i < f->kids.size(); ++i) {
        if (i) s += f->kind == K::And ? " & " : " | ";
        s += to_string(f->kids[i]);
      }
      return s + ")";
    }
    case K::Always: return iv("G") + to_string(f->kids[0]);
    case K::Eventually: return iv("F") + to_string(f->kids[0]);
    case K::Until:
      return "(" + to_string(f->kids[0]) + " U[" + num_str(f->a) + "," + num_str(f->b) + "] " +
             to_string(f->kids[1]) + ")";
  }
  return "?";
}

}  // namespace swarmstl::stl
