#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseLU>
#include <memory>
#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

namespace swarmstl::lp {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

using Coeffs = std::vector<std::pair<int, double>>;

// maximize obj.x  s.t.  row_lo <= A x <= row_hi,  col_lo <= x <= col_hi
struct Problem {
  std::vector<double> obj;
  std::vector<double> col_lo, col_hi;
  std::vector<Coeffs> rows;
  std::vector<double> row_lo, row_hi;

  int num_cols() const { return static_cast<int>(obj.size()); }
  int num_rows() const { return static_cast<int>(rows.size()); }
  int add_col(double lo, double hi, double c = 0.0);
  int add_row(Coeffs coeffs, double lo, double hi);
};

enum class Status { Optimal, Infeasible, Unbounded, NumericalFailure };

const char* to_string(Status s);

struct Options {
  double feas_tol = 1e-7;
  double opt_tol = 1e-9;
  double pivot_tol = 1e-9;
  int refactor_every = 60;
  // Dantzig pricing switches to Bland's rule after this many iterations
  // (0 means 10 * (rows + cols)).
  int bland_after = 0;
  // Hard cap (0 means 50 * (rows + cols) + 1000).
  int max_iter = 0;
};

struct Result {
  Status status = Status::NumericalFailure;
  std::vector<double> x;
  double objective = 0.0;
  int iterations = 0;
};

// Variable state in a basis snapshot.
enum class VarState : std::uint8_t { Basic, AtLower, AtUpper, FreeZero };

struct Basis {
  std::vector<int> head;
  std::vector<VarState> state;
};

// Bounded-variable primal simplex over [A, -I]. The basis is kept as a sparse LU
// factorization followed by product-form eta updates.
// Keeps its basis between runs so that bound changes resolve quickly.
class Simplex {
 public:
  Simplex(const Problem& p, Options opt = {});

  void set_col_bounds(const std::vector<double>& lo, const std::vector<double>& hi);
  void load_basis(const Basis& b);
  Basis basis() const;
  Result run();

 private:
  struct Entry {
    int row;
    double val;
  };

  void reset_to_slack_basis();
  bool refactor();
  void recompute_basic_values();
  void place_nonbasic(int j);
  void column(int j, Eigen::VectorXd& out) const;
  void ftran(Eigen::VectorXd& v) const;
  void btran(Eigen::VectorXd& v) const;

  using Factor = Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>>;
  struct Eta {
    int row;
    Eigen::VectorXd alpha;
  };

  const Problem* p_;
  Options opt_;
  int n_, m_;
  std::vector<std::vector<Entry>> cols_;
  std::vector<double> cost_;
  std::vector<double> lo_, hi_, x_;
  std::vector<int> head_, where_;
  std::vector<VarState> state_;
  std::shared_ptr<Factor> lu_;  // replaced on refactor, never modified, so copies may share it
  std::vector<Eta> etas_;
  std::vector<int> good_head_;
  std::vector<VarState> good_state_;
  bool binv_valid_ = false;
};

Result solve_lp(const Problem& p, const Options& opt = {});

// Largest violation of rows and column bounds at x.
double max_violation(const Problem& p, const std::vector<double>& x);

}  // namespace swarmstl::lp
