#include "swarmstl/milp.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <memory>
#include <queue>
#include <random>
#include <stdexcept>

namespace swarmstl::milp {

const char* to_string(Status s) {
  switch (s) {
    case Status::Optimal: return "optimal";
    case Status::Infeasible: return "infeasible";
    case Status::NodeLimit: return "node-limit";
    case Status::NumericalFailure: return "numerical-failure";
  }
  return "?";
}

namespace {

struct Node {
  std::shared_ptr<const Node> parent;
  int var = -1;
  double val = 0.0;
  double bound = lp::kInf;
  int depth = 0;
  long seq = 0;
  std::shared_ptr<const lp::Basis> basis;
};

using NodePtr = std::shared_ptr<const Node>;

struct NodeOrder {
  bool operator()(const NodePtr& a, const NodePtr& b) const {
    if (a->bound != b->bound) return a->bound < b->bound;
    if (a->depth != b->depth) return a->depth < b->depth;
    return a->seq > b->seq;
  }
};

void apply_fixings(const NodePtr& n, std::vector<double>& lo, std::vector<double>& hi) {
  for (const Node* c = n.get(); c && c->var >= 0; c = c->parent.get()) {
    lo[c->var] = c->val;
    hi[c->var] = c->val;
  }
}

}  // namespace

Result solve_milp(const lp::Problem& p, const std::vector<int>& binaries_in, const Options& opt) {
  std::vector<int> binaries = binaries_in;
  std::sort(binaries.begin(), binaries.end());
  binaries.erase(std::unique(binaries.begin(), binaries.end()), binaries.end());

  Result res;
  lp::Simplex simplex(p, opt.lp);
  lp::Simplex polisher(p, opt.lp);
  const NodeOrder order;
  std::priority_queue<NodePtr, std::vector<NodePtr>, NodeOrder> open(order);
  std::vector<NodePtr> dive;
  long seq = 0;
  auto root = std::make_shared<Node>();
  root->seq = seq++;
  if (opt.dive_first) dive.push_back(root);
  else open.push(root);
  const auto start = std::chrono::steady_clock::now();
  auto out_of_time = [&] {
    if (opt.time_limit <= 0) return false;
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() > opt.time_limit;
  };
  const Node* last_solved = nullptr;
  NodePtr last_holder;
  bool numerical_trouble = false;

  long improved_at = 0;
  std::mt19937 rng(opt.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  int restarts = 0;
  long dive_start = 0;
  double restart_every = static_cast<double>(opt.restart_nodes);
  double flip_prob = 0.0;
  auto stalled = [&] { return opt.stall_nodes > 0 && res.has_incumbent && res.nodes - improved_at >= opt.stall_nodes; };

  while (!open.empty() || !dive.empty()) {
    if (!dive.empty() && res.has_incumbent) {
      for (auto& n : dive) open.push(n);
      dive.clear();
    }
    NodePtr node;
    if (!dive.empty() && opt.restart_nodes > 0 && res.nodes - dive_start >= restart_every) {
      for (auto& n : dive) open.push(n);
      dive.clear();
      auto fresh = std::make_shared<Node>();
      fresh->seq = seq++;
      dive.push_back(fresh);
      dive_start = res.nodes;
      restart_every *= 1.5;
      ++restarts;
      flip_prob = std::min(0.3, 0.03 * restarts);
    }
    if (!dive.empty()) {
      node = dive.back();
      if (res.nodes >= opt.node_limit || out_of_time()) break;
      dive.pop_back();
    } else {
      node = open.top();
      if (res.has_incumbent && node->bound <= res.objective + 1e-9) {
        open.pop();
        continue;
      }
      if (res.nodes >= opt.node_limit || out_of_time() || stalled()) break;
      open.pop();
    }
    ++res.nodes;

    std::vector<double> lo = p.col_lo, hi = p.col_hi;
    apply_fixings(node, lo, hi);
    if (!opt.warm_start) {
      simplex = lp::Simplex(p, opt.lp);
    } else if (node->parent.get() != last_solved && node->basis) {
      simplex.load_basis(*node->basis);
    }
    simplex.set_col_bounds(lo, hi);
    lp::Result r = simplex.run();
    if (r.status == lp::Status::NumericalFailure) {
      simplex = lp::Simplex(p, opt.lp);
      simplex.set_col_bounds(lo, hi);
      r = simplex.run();
    }
    last_holder = node;
    last_solved = node.get();

    if (opt.node_log)
      *opt.node_log << "node " << res.nodes << " depth " << node->depth << " status "
                    << lp::to_string(r.status) << " obj " << r.objective << " incumbent "
                    << (res.has_incumbent ? res.objective : -lp::kInf) << "\n";

    if (r.status == lp::Status::NumericalFailure) {
      numerical_trouble = true;
      continue;
    }
    if (r.status == lp::Status::Infeasible) continue;
    if (r.status == lp::Status::Unbounded)
      throw std::invalid_argument("MILP relaxation is unbounded; bound the objective variable");
    if (res.has_incumbent && r.objective <= res.objective + 1e-9) continue;

    int branch = -1;
    double best_frac = 0.0;
    for (int j : binaries) {
      double frac = std::abs(r.x[j] - std::round(r.x[j]));
      if (frac <= opt.int_tol) continue;
      if (!opt.most_fractional) {
        branch = j;
        break;
      }
      if (frac > best_frac + 1e-9) {
        best_frac = frac;
        branch = j;
      }
    }
    if (branch < 0) {
      std::vector<double> plo = lo, phi = hi;
      for (int j : binaries) plo[j] = phi[j] = std::round(r.x[j]);
      polisher.set_col_bounds(plo, phi);
      lp::Result pr = polisher.run();
      if (pr.status != lp::Status::Optimal) {
        polisher = lp::Simplex(p, opt.lp);
        polisher.set_col_bounds(plo, phi);
        pr = polisher.run();
      }
      if (pr.status == lp::Status::Optimal &&
          (!res.has_incumbent || pr.objective > res.objective + 1e-12)) {
        res.has_incumbent = true;
        improved_at = res.nodes;
        res.objective = pr.objective;
        res.x = pr.x;
        for (int j : binaries) res.x[j] = std::round(res.x[j]);
      }
      continue;
    }

    auto basis = std::make_shared<const lp::Basis>(simplex.basis());
    const bool dive_now = opt.dive_first && !res.has_incumbent;
    // the child pushed last is explored first while diving
    bool up_first = r.x[branch] >= 0.5;
    if (branch < static_cast<int>(opt.guide.size()) && std::isfinite(opt.guide[branch]))
      up_first = opt.guide[branch] >= 0.5;
    if (dive_now && flip_prob > 0 && unif(rng) < flip_prob) up_first = !up_first;
    const double order_vals[2] = {dive_now && !up_first ? 1.0 : 0.0, dive_now && !up_first ? 0.0 : 1.0};
    for (double val : order_vals) {
      auto child = std::make_shared<Node>();
      child->parent = node;
      child->var = branch;
      child->val = val;
      child->bound = r.objective;
      child->depth = node->depth + 1;
      child->seq = seq++;
      child->basis = basis;
      if (dive_now) dive.push_back(child);
      else open.push(child);
    }
  }

  // drop pruned nodes to report the bound honestly
  double bound = res.has_incumbent ? res.objective : -lp::kInf;
  bool exhausted = true;
  for (auto& n : dive) open.push(n);
  while (!open.empty()) {
    NodePtr n = open.top();
    open.pop();
    if (res.has_incumbent && n->bound <= res.objective + 1e-9) continue;
    exhausted = false;
    bound = std::max(bound, n->bound);
  }
  res.best_bound = bound;
  if (!exhausted)
    res.status = Status::NodeLimit;
  else if (res.has_incumbent)
    res.status = Status::Optimal;
  else
    res.status = numerical_trouble ? Status::NumericalFailure : Status::Infeasible;
  return res;
}

Result enumerate(const lp::Problem& p, const std::vector<int>& binaries, const lp::Options& opt) {
  if (binaries.size() > 24) throw std::invalid_argument("enumeration limited to 24 binaries");
  Result res;
  lp::Simplex s(p, opt);
  const long count = 1L << binaries.size();
  for (long mask = 0; mask < count; ++mask) {
    std::vector<double> lo = p.col_lo, hi = p.col_hi;
    for (std::size_t b = 0; b < binaries.size(); ++b) lo[binaries[b]] = hi[binaries[b]] = (mask >> b) & 1;
    s.set_col_bounds(lo, hi);
    lp::Result r = s.run();
    if (r.status != lp::Status::Optimal) {
      lp::Simplex cold(p, opt);
      cold.set_col_bounds(lo, hi);
      r = cold.run();
    }
    ++res.nodes;
    if (r.status == lp::Status::Optimal && (!res.has_incumbent || r.objective > res.objective)) {
      res.has_incumbent = true;
      res.objective = r.objective;
      res.x = r.x;
    }
  }
  res.status = res.has_incumbent ? Status::Optimal : Status::Infeasible;
  res.best_bound = res.objective;
  return res;
}

}  // namespace swarmstl::milp
