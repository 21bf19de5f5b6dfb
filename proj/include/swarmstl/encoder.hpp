#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "swarmstl/lp.hpp"
#include "swarmstl/scenario.hpp"
#include "swarmstl/stl.hpp"

namespace swarmstl::enc {

// Sparse affine expression over MILP columns.
struct LinearExpr {
  std::map<int, double> terms;
  double constant = 0.0;

  LinearExpr() = default;
  explicit LinearExpr(double c) : constant(c) {}
  static LinearExpr var(int col, double coef = 1.0);

  LinearExpr& operator+=(const LinearExpr& o);
  LinearExpr& operator-=(const LinearExpr& o);
  LinearExpr& operator*=(double k);
  double eval(const std::vector<double>& x) const;
  bool is_constant() const { return terms.empty(); }
};

LinearExpr operator+(LinearExpr a, const LinearExpr& b);
LinearExpr operator-(LinearExpr a, const LinearExpr& b);
LinearExpr operator*(double k, LinearExpr a);
LinearExpr operator+(LinearExpr a, double c);

// Activation literal: active when binary `var` equals 1 (positive) or 0.
struct Literal {
  int var;
  bool positive;
};

enum class Family { TimeProgression, Reachability, Obstacle, InterSwarm, Stl, Cover, Auxiliary };
const char* to_string(Family f);

struct ConeTerm {
  int ell;  // ellipsoid id
  Vec a;
  double coef;  // contributes coef * ||sigma_ell^T a||
};

struct SpectralTerm {
  int ell;
  double coef;  // contributes coef * ||sigma_ell||_2
};

// lin + cones + spectral >= 0 whenever every literal is active.
struct MarginRow {
  LinearExpr lin;
  std::vector<ConeTerm> cones;
  std::vector<SpectralTerm> spectral;
  std::vector<Literal> lits;
  Family family = Family::Auxiliary;
  int group = -1;
};

struct Column {
  std::string name;
  double lo = -lp::kInf, hi = lp::kInf;
  bool binary = false;
};

// Selector structure of one disjunction, for auditing.
struct Disjunction {
  std::vector<Literal> parent;
  std::vector<Literal> branches;
  int group = -1;
};

// Disjunction groups that the planner may leave out of the MILP until violated.
struct Group {
  enum class Kind { Simple, Pair };
  Kind kind = Kind::Simple;
  std::vector<int> rows;
  std::vector<int> binaries;
  std::vector<Literal> branch_lits;  // one per branch; var -1 means unconditional
  // Pair only: row index per branch (-1 if the branch is unavailable)
  int row_t1 = -1, row_t2 = -1, row_sp = -1;
  Literal lit_t1{-1, true}, lit_t2{-1, true}, lit_sp{-1, true};
  std::vector<int> sign, alpha;
  std::vector<LinearExpr> gap;  // midpoint difference per coordinate
  double alpha_bound = 0.0;
};

struct EllipsoidRef {
  int swarm, k;
};

struct Params {
  double rho;    // minimum segment duration
  double delta;  // strict-gap margin for time ordering
  double eps_cap;
  double time_span;  // witnesses live in [t0, t0 + time_span]
};

Params encoding_params(const Scenario& sc, const stl::LiftedPtr& lifted = nullptr);

// Witness width used by an F/U node with interval [a, b].
double witness_width(const Params& p, double a, double b);

struct Instance {
  Scenario scenario;
  Params params;
  std::vector<Column> cols;
  std::vector<MarginRow> rows;
  std::vector<Disjunction> disjunctions;
  std::vector<Group> groups;
  std::vector<EllipsoidRef> ells;
  std::vector<std::vector<int>> ell_id;  // [s][k], k = 0..K_s
  int eps_col = 0;
  // [s][k][i] and [s][k] for k = 0..K_s; k = 0 entries are constants
  std::vector<std::vector<std::vector<LinearExpr>>> pos;
  std::vector<std::vector<LinearExpr>> time;
  // beta[s][k][i] >= |pbar_{k-1} - pbar_k|_i / 2 (only with two or more swarms)
  std::vector<std::vector<std::vector<int>>> beta;
  // F/U witness column per lifted node in preorder (-1 if unused)
  std::vector<int> witness_cols;
  std::vector<double> witness_widths;

  int num_binaries() const;
  std::vector<int> binaries() const;
  int count_rows(Family f) const;
};

// Builds an Instance family by family.
class Encoder {
 public:
  explicit Encoder(const Scenario& sc, const stl::LiftedPtr& lifted = nullptr);

  void encode_time_progression();
  void encode_reachability();
  void encode_obstacle_safety();
  void encode_inter_swarm_safety();
  void encode_swarm_stl(const stl::LiftedPtr& lifted);

  const Instance& instance() const { return inst_; }
  Instance take() { return std::move(inst_); }

 private:
  struct Seg {
    int s, k, ell;
    const std::vector<LinearExpr>* p0;
    const std::vector<LinearExpr>* p1;
    LinearExpr t_start;
    bool open_end;
    LinearExpr t_end;
  };
  using Branch = std::vector<MarginRow>;

  int add_col(std::string name, double lo, double hi, bool binary = false);
  int add_row(MarginRow r);
  double lin_min(const LinearExpr& e) const;
  double lin_max(const LinearExpr& e) const;
  std::vector<Seg> segments(int s) const;
  void atom_rows(const Seg& seg, const Polytope& poly, bool negated, std::vector<Branch>& out) const;
  // Adds sum of branch selectors >= 1 and gated rows; returns false if no branch is possible.
  void encode_disjunction(std::vector<Branch> branches, const std::vector<Literal>& lits, bool lazy,
                          const std::string& tag);
  void encode_window(const stl::LiftedPtr& f, const LinearExpr& lo, const LinearExpr& hi,
                     const std::vector<Literal>& lits);
  void encode_atom_window(const stl::Lifted& f, const LinearExpr& lo, const LinearExpr& hi,
                          const std::vector<Literal>& lits);
  void encode_false(const std::vector<Literal>& lits);

  Instance inst_;
  std::map<const stl::Lifted*, int> preorder_;
  int placeholder_ = 0;
};

Instance encode(const Scenario& sc, const stl::LiftedPtr& lifted);

// Ellipsoids of the initial configuration followed by Sigma0 for every segment.
std::vector<Mat> initial_sigmas(const Instance& inst);

// Value of a row at x (cone terms evaluated with the given shapes), without big-M relaxation.
double row_value(const MarginRow& r, const std::vector<double>& x, const std::vector<Mat>& sigmas);
bool literal_active(const Literal& l, const std::vector<double>& x);
bool row_active(const MarginRow& r, const std::vector<double>& x);

// Per-row big-M: smallest M making the relaxed row valid over column bounds, capped by Y.
double row_big_m(const Instance& inst, const MarginRow& r, const std::vector<Mat>& sigmas);

// MILP with Sigma fixed. group_mask (optional) selects which lazy groups are included;
// binaries of excluded groups are left out of `binaries`.
lp::Problem build_milp(const Instance& inst, const std::vector<Mat>& sigmas,
                       const std::vector<char>* group_mask = nullptr, std::vector<int>* binaries = nullptr);

// Picks branch binaries of an omitted group for the current x (in place).
// Returns the best achievable worst-row slack.
double assign_group(const Instance& inst, int g, std::vector<double>& x, const std::vector<Mat>& sigmas);
// Worst-row slack of the group's best branch without modifying x.
double group_slack(const Instance& inst, int g, const std::vector<double>& x, const std::vector<Mat>& sigmas);

struct BigMAudit {
  bool ok = true;
  double worst_active_slack = lp::kInf;  // over rows whose literals are all active
  int disjunctions_checked = 0;
  int disjunctions_failed = 0;
};

// Every active row holds without its big-M term and every active disjunction has
// at least one selected branch.
BigMAudit audit_big_m(const Instance& inst, const std::vector<double>& x, const std::vector<Mat>& sigmas,
                      double tol = 1e-6);

// CPLEX LP text format.
void write_lp(std::ostream& os, const Instance& inst, const std::vector<Mat>& sigmas);

struct EllipsoidProblem {
  int dim = 2;
  std::vector<int> var_ells;            // instance ellipsoid ids that are free
  std::vector<Mat> sigma_start;         // per free ellipsoid
  struct Cone {
    int v;
    Vec a;
    double coef;
  };
  struct Spectral {
    int v;
    double coef;
  };
  // c + e * eps + sum cones + sum spectral >= 0
  struct Row {
    double c = 0.0, e = 0.0;
    std::vector<Cone> cones;
    std::vector<Spectral> spectral;
  };
  std::vector<Row> rows;
  std::vector<double> volume_rhs;  // log det >= rhs, per free ellipsoid
  struct Spacing {
    int v;
    Vec q;
    double theta;  // ||sigma^T q|| >= theta
  };
  std::vector<Spacing> spacing;
  double eps_cap = 1.0;
  double s_max = 1.0;  // upper bound on ||sigma||_2
};

// Volume bound right-hand side per free ellipsoid.
std::vector<double> encode_volume(const Instance& inst, const std::vector<int>& var_ells);

// Rows active at the stage-1 solution x with positions and times fixed.
EllipsoidProblem build_ellipsoid_problem(const Instance& inst, const std::vector<double>& x,
                                         const std::vector<Mat>& sigmas);

}  // namespace swarmstl::enc
