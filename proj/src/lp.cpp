#include "swarmstl/lp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace swarmstl::lp {

int Problem::add_col(double lo, double hi, double c) {
  obj.push_back(c);
  col_lo.push_back(lo);
  col_hi.push_back(hi);
  return num_cols() - 1;
}

int Problem::add_row(Coeffs coeffs, double lo, double hi) {
  std::sort(coeffs.begin(), coeffs.end());
  Coeffs merged;
  for (auto& [j, v] : coeffs) {
    if (!merged.empty() && merged.back().first == j)
      merged.back().second += v;
    else
      merged.emplace_back(j, v);
  }
  std::erase_if(merged, [](const auto& e) { return e.second == 0.0; });
  rows.push_back(std::move(merged));
  row_lo.push_back(lo);
  row_hi.push_back(hi);
  return num_rows() - 1;
}

const char* to_string(Status s) {
  switch (s) {
    case Status::Optimal: return "optimal";
    case Status::Infeasible: return "infeasible";
    case Status::Unbounded: return "unbounded";
    case Status::NumericalFailure: return "numerical-failure";
  }
  return "?";
}

Simplex::Simplex(const Problem& p, Options opt)
    : p_(&p), opt_(opt), n_(p.num_cols()), m_(p.num_rows()) {
  cols_.assign(n_, {});
  for (int r = 0; r < m_; ++r)
    for (auto& [j, v] : p.rows[r]) cols_[j].push_back({r, v});
  cost_.assign(n_ + m_, 0.0);
  for (int j = 0; j < n_; ++j) cost_[j] = -p.obj[j];
  lo_.resize(n_ + m_);
  hi_.resize(n_ + m_);
  for (int j = 0; j < n_; ++j) {
    lo_[j] = p.col_lo[j];
    hi_[j] = p.col_hi[j];
  }
  for (int r = 0; r < m_; ++r) {
    lo_[n_ + r] = p.row_lo[r];
    hi_[n_ + r] = p.row_hi[r];
  }
  x_.assign(n_ + m_, 0.0);
  reset_to_slack_basis();
}

void Simplex::place_nonbasic(int j) {
  if (std::isfinite(lo_[j]) && std::isfinite(hi_[j])) {
    if (state_[j] == VarState::AtUpper) {
      x_[j] = hi_[j];
    } else {
      state_[j] = VarState::AtLower;
      x_[j] = lo_[j];
    }
  } else if (std::isfinite(lo_[j])) {
    state_[j] = VarState::AtLower;
    x_[j] = lo_[j];
  } else if (std::isfinite(hi_[j])) {
    state_[j] = VarState::AtUpper;
    x_[j] = hi_[j];
  } else {
    state_[j] = VarState::FreeZero;
    x_[j] = 0.0;
  }
}

void Simplex::reset_to_slack_basis() {
  head_.resize(m_);
  where_.assign(n_ + m_, -1);
  state_.assign(n_ + m_, VarState::AtLower);
  for (int r = 0; r < m_; ++r) {
    head_[r] = n_ + r;
    where_[n_ + r] = r;
    state_[n_ + r] = VarState::Basic;
  }
  for (int j = 0; j < n_; ++j) place_nonbasic(j);
  refactor();
  recompute_basic_values();
}

void Simplex::set_col_bounds(const std::vector<double>& lo, const std::vector<double>& hi) {
  for (int j = 0; j < n_; ++j) {
    lo_[j] = lo[j];
    hi_[j] = hi[j];
    if (state_[j] != VarState::Basic) place_nonbasic(j);
  }
  recompute_basic_values();
}

void Simplex::load_basis(const Basis& b) {
  head_ = b.head;
  state_ = b.state;
  where_.assign(n_ + m_, -1);
  for (int r = 0; r < m_; ++r) where_[head_[r]] = r;
  for (int j = 0; j < n_ + m_; ++j)
    if (state_[j] != VarState::Basic) place_nonbasic(j);
  if (!refactor()) reset_to_slack_basis();
  recompute_basic_values();
}

Basis Simplex::basis() const { return {head_, state_}; }

void Simplex::column(int j, Eigen::VectorXd& out) const {
  out.setZero(m_);
  if (j < n_) {
    for (auto& e : cols_[j]) out[e.row] = e.val;
  } else {
    out[j - n_] = -1.0;
  }
}

bool Simplex::refactor() {
  etas_.clear();
  if (m_ == 0) {
    binv_valid_ = true;
    return true;
  }
  std::vector<Eigen::Triplet<double>> trip;
  for (int r = 0; r < m_; ++r) {
    int j = head_[r];
    if (j < n_) {
      for (auto& e : cols_[j]) trip.emplace_back(e.row, r, e.val);
    } else {
      trip.emplace_back(j - n_, r, -1.0);
    }
  }
  Eigen::SparseMatrix<double> b(m_, m_);
  b.setFromTriplets(trip.begin(), trip.end());
  b.makeCompressed();
  auto lu = std::make_shared<Factor>();
  lu->analyzePattern(b);
  lu->factorize(b);
  binv_valid_ = lu->info() == Eigen::Success;
  if (binv_valid_) {
    lu_ = lu;
    // reject near-singular factorizations
    Eigen::VectorXd e = Eigen::VectorXd::Ones(m_);
    Eigen::VectorXd x = e;
    ftran(x);
    binv_valid_ = x.allFinite() && (b * x - e).cwiseAbs().maxCoeff() < 1e-6;
  }
  if (binv_valid_) {
    good_head_ = head_;
    good_state_ = state_;
  } else {
    lu_.reset();
  }
  return binv_valid_;
}

void Simplex::ftran(Eigen::VectorXd& v) const {
  v = lu_->solve(v);
  for (auto& eta : etas_) {
    double vr = v[eta.row] / eta.alpha[eta.row];
    if (vr != 0.0) v.noalias() -= vr * eta.alpha;
    v[eta.row] = vr;
  }
}

void Simplex::btran(Eigen::VectorXd& v) const {
  for (auto it = etas_.rbegin(); it != etas_.rend(); ++it) {
    double ar = it->alpha[it->row];
    double dot = v.dot(it->alpha) - v[it->row] * ar;
    v[it->row] = (v[it->row] - dot) / ar;
  }
  v = lu_->transpose().solve(v);
}

void Simplex::recompute_basic_values() {
  if (m_ == 0) return;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m_);
  for (int j = 0; j < n_; ++j) {
    if (state_[j] == VarState::Basic || x_[j] == 0.0) continue;
    for (auto& e : cols_[j]) rhs[e.row] -= e.val * x_[j];
  }
  for (int r = 0; r < m_; ++r) {
    int j = n_ + r;
    if (state_[j] != VarState::Basic && x_[j] != 0.0) rhs[r] += x_[j];
  }
  ftran(rhs);
  for (int r = 0; r < m_; ++r) x_[head_[r]] = rhs[r];
}

Result Simplex::run() {
  const int total = n_ + m_;
  const int bland_after = opt_.bland_after > 0 ? opt_.bland_after : 10 * (m_ + n_);
  const int max_iter = opt_.max_iter > 0 ? opt_.max_iter : 50 * (m_ + n_) + 1000;
  const double ftol = opt_.feas_tol;

  Result res;
  if (!binv_valid_ && !refactor()) reset_to_slack_basis();

  Eigen::VectorXd cb(m_), y(m_), alpha(m_), acol(m_);
  std::vector<double> d(total, 0.0);
  int since_refactor = 0;
  int iter = 0;
  int repairs = 0;
  double pivot_tol = opt_.pivot_tol;
  bool verified = false;

  for (;;) {
    if (iter >= max_iter) {
      res.status = Status::NumericalFailure;
      break;
    }
    // phase selection
    bool phase1 = false;
    cb.setZero();
    for (int r = 0; r < m_; ++r) {
      int j = head_[r];
      double v = x_[j];
      if (v < lo_[j] - ftol) {
        cb[r] = -1.0;
        phase1 = true;
      } else if (v > hi_[j] + ftol) {
        cb[r] = 1.0;
        phase1 = true;
      }
    }
    if (!phase1)
      for (int r = 0; r < m_; ++r) cb[r] = cost_[head_[r]];

    y = cb;
    if (m_ > 0) btran(y);

    // pricing
    const bool bland = iter >= bland_after;
    int q = -1;
    double best = 0.0;
    for (int j = 0; j < total; ++j) {
      if (state_[j] == VarState::Basic) continue;
      double c = phase1 ? 0.0 : cost_[j];
      double dj;
      if (j < n_) {
        dj = c;
        for (auto& e : cols_[j]) dj -= y[e.row] * e.val;
      } else {
        dj = c + y[j - n_];
      }
      d[j] = dj;
      bool fixed = hi_[j] - lo_[j] <= 0.0;
      bool eligible = false;
      switch (state_[j]) {
        case VarState::AtLower: eligible = !fixed && dj < -opt_.opt_tol; break;
        case VarState::AtUpper: eligible = !fixed && dj > opt_.opt_tol; break;
        case VarState::FreeZero: eligible = std::abs(dj) > opt_.opt_tol; break;
        default: break;
      }
      if (!eligible) continue;
      if (bland) {
        q = j;
        break;
      }
      if (std::abs(dj) > best) {
        best = std::abs(dj);
        q = j;
      }
    }

    if (q < 0) {
      if (!verified) {
        // guard against drift in the product-form inverse before declaring
        if (!refactor()) {
          reset_to_slack_basis();
        }
        recompute_basic_values();
        since_refactor = 0;
        verified = true;
        continue;
      }
      res.status = phase1 ? Status::Infeasible : Status::Optimal;
      break;
    }
    verified = false;

    const double dir = d[q] < 0.0 ? 1.0 : -1.0;
    column(q, acol);
    alpha = acol;
    ftran(alpha);

    // Harris two-pass ratio test
    const double ptol = pivot_tol;
    double theta_flip = hi_[q] - lo_[q];
    if (!std::isfinite(theta_flip)) theta_flip = kInf;
    double relaxed = kInf;
    for (int r = 0; r < m_; ++r) {
      double rate = -dir * alpha[r];
      if (std::abs(alpha[r]) <= ptol) continue;
      int j = head_[r];
      double v = x_[j];
      double lim = kInf;
      // infeasible basics moving further out never block
      if (rate > 0) {
        if (v < lo_[j] - ftol)
          lim = (lo_[j] - v + ftol) / rate;
        else if (v <= hi_[j] + ftol && std::isfinite(hi_[j]))
          lim = (hi_[j] - v + ftol) / rate;
      } else {
        if (v > hi_[j] + ftol)
          lim = (v - hi_[j] + ftol) / -rate;
        else if (v >= lo_[j] - ftol && std::isfinite(lo_[j]))
          lim = (v - lo_[j] + ftol) / -rate;
      }
      relaxed = std::min(relaxed, lim);
    }
    int leave = -1;
    double theta = kInf;
    bool leave_to_upper = false;
    double best_piv = 0.0;
    for (int r = 0; r < m_; ++r) {
      double rate = -dir * alpha[r];
      if (std::abs(alpha[r]) <= ptol) continue;
      int j = head_[r];
      double v = x_[j];
      double lim = kInf;
      bool to_upper = false;
      if (rate > 0) {
        if (v < lo_[j] - ftol) {
          lim = (lo_[j] - v) / rate;
        } else if (v <= hi_[j] + ftol && std::isfinite(hi_[j])) {
          lim = (hi_[j] - v) / rate;
          to_upper = true;
        }
      } else {
        if (v > hi_[j] + ftol) {
          lim = (v - hi_[j]) / -rate;
          to_upper = true;
        } else if (v >= lo_[j] - ftol && std::isfinite(lo_[j])) {
          lim = (v - lo_[j]) / -rate;
        }
      }
      if (!std::isfinite(lim) || lim > relaxed) continue;
      lim = std::max(lim, 0.0);
      bool take;
      if (bland)
        take = leave < 0 || lim < theta - 1e-12 || (lim <= theta + 1e-12 && j < head_[leave]);
      else
        take = std::abs(alpha[r]) > best_piv;
      if (take) {
        leave = r;
        theta = lim;
        leave_to_upper = to_upper;
        best_piv = std::abs(alpha[r]);
      }
    }

    if (theta_flip <= theta) {
      if (!std::isfinite(theta_flip)) {
        res.status = phase1 ? Status::NumericalFailure : Status::Unbounded;
        break;
      }
      // bound flip
      x_[q] += dir * theta_flip;
      state_[q] = dir > 0 ? VarState::AtUpper : VarState::AtLower;
      x_[q] = dir > 0 ? hi_[q] : lo_[q];
      for (int r = 0; r < m_; ++r) x_[head_[r]] -= dir * theta_flip * alpha[r];
      ++iter;
      continue;
    }
    if (leave < 0) {
      res.status = phase1 ? Status::NumericalFailure : Status::Unbounded;
      break;
    }

    for (int r = 0; r < m_; ++r) x_[head_[r]] -= dir * theta * alpha[r];
    x_[q] += dir * theta;
    int jl = head_[leave];
    state_[jl] = leave_to_upper ? VarState::AtUpper : VarState::AtLower;
    x_[jl] = leave_to_upper ? hi_[jl] : lo_[jl];
    where_[jl] = -1;
    head_[leave] = q;
    where_[q] = leave;
    state_[q] = VarState::Basic;

    etas_.push_back({leave, alpha});
    ++iter;
    if (++since_refactor >= opt_.refactor_every) {
      if (!refactor()) {
        // back to the last basis that factored cleanly, with stricter pivoting
        if (++repairs > 3 || good_head_.empty()) {
          res.status = Status::NumericalFailure;
          break;
        }
        head_ = good_head_;
        state_ = good_state_;
        where_.assign(n_ + m_, -1);
        for (int r = 0; r < m_; ++r) where_[head_[r]] = r;
        for (int j = 0; j < n_ + m_; ++j)
          if (state_[j] != VarState::Basic) place_nonbasic(j);
        if (!refactor()) {
          res.status = Status::NumericalFailure;
          break;
        }
        pivot_tol *= 100.0;
      }
      recompute_basic_values();
      since_refactor = 0;
    }
  }

  res.iterations = iter;
  res.x.assign(x_.begin(), x_.begin() + n_);
  res.objective = 0.0;
  for (int j = 0; j < n_; ++j) res.objective += p_->obj[j] * res.x[j];
  return res;
}

Result solve_lp(const Problem& p, const Options& opt) {
  Simplex s(p, opt);
  return s.run();
}

double max_violation(const Problem& p, const std::vector<double>& x) {
  double worst = 0.0;
  for (int j = 0; j < p.num_cols(); ++j) {
    worst = std::max(worst, p.col_lo[j] - x[j]);
    worst = std::max(worst, x[j] - p.col_hi[j]);
  }
  for (int r = 0; r < p.num_rows(); ++r) {
    double a = 0.0;
    for (auto& [j, v] : p.rows[r]) a += v * x[j];
    worst = std::max(worst, p.row_lo[r] - a);
    worst = std::max(worst, a - p.row_hi[r]);
  }
  return worst;
}

}  // namespace swarmstl::lp
