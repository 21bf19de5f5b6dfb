#include "swarmstl/ellipsoid_solver.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <limits>

#include "swarmstl/geometry.hpp"

namespace swarmstl::ell {

const char* to_string(Status s) {
  switch (s) {
    case Status::Optimal: return "optimal";
    case Status::WarmStart: return "warm_start";
    case Status::Infeasible: return "infeasible";
  }
  return "?";
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double cone_value(const Mat& sigma, const Vec& a) { return std::sqrt(std::max(0.0, a.dot(sigma * a))); }

// Variable layout: per free ellipsoid the lower triangle of L (row-major) then s; eps last.
struct Layout {
  int d, q, block, n;
  std::vector<std::pair<int, int>> entries;  // (i, j), j <= i

  Layout(int dim, int nv) : d(dim) {
    for (int i = 0; i < d; ++i)
      for (int j = 0; j <= i; ++j) entries.push_back({i, j});
    q = static_cast<int>(entries.size());
    block = q + 1;
    n = nv * block + 1;
  }
  int sig(int v, int e) const { return v * block + e; }
  int s(int v) const { return v * block + q; }
  int eps() const { return n - 1; }
  int diag(int i) const { return i * (i + 1) / 2 + i; }

  Mat L(const Vec& x, int v) const {
    Mat m = Mat::Zero(d, d);
    for (int e = 0; e < q; ++e) m(entries[e].first, entries[e].second) = x[sig(v, e)];
    return m;
  }
};

struct Sparse {
  std::vector<int> idx;
  std::vector<double> val;
  void add(int i, double v) {
    for (std::size_t k = 0; k < idx.size(); ++k)
      if (idx[k] == i) {
        val[k] += v;
        return;
      }
    idx.push_back(i);
    val.push_back(v);
  }
};

class Barrier {
 public:
  Barrier(const enc::EllipsoidProblem& p, const Layout& lay, double diag_min)
      : p_(p), lay_(lay), dmin_(diag_min) {}

  // Returns +inf outside the domain. grad/hess are filled when non-null.
  double eval(const Vec& x, double t, Vec* grad, Mat* hess) const {
    const int n = lay_.n, d = lay_.d, q = lay_.q;
    const int nv = static_cast<int>(p_.var_ells.size());
    double f = -t * x[lay_.eps()];
    if (grad) {
      grad->setZero(n);
      (*grad)[lay_.eps()] = -t;
    }
    if (hess) hess->setZero(n, n);

    std::vector<Mat> Ls(nv);
    for (int v = 0; v < nv; ++v) Ls[v] = lay_.L(x, v);

    auto log_term = [&](double g, const Sparse& dg) -> bool {
      if (!(g > 0)) return false;
      f -= std::log(g);
      if (grad)
        for (std::size_t a = 0; a < dg.idx.size(); ++a) (*grad)[dg.idx[a]] -= dg.val[a] / g;
      if (hess)
        for (std::size_t a = 0; a < dg.idx.size(); ++a)
          for (std::size_t b = 0; b < dg.idx.size(); ++b)
            (*hess)(dg.idx[a], dg.idx[b]) += dg.val[a] * dg.val[b] / (g * g);
      return true;
    };

    // margin rows
    for (const auto& r : p_.rows) {
      double g = r.c + r.e * x[lay_.eps()];
      Sparse dg;
      if (r.e != 0.0) dg.add(lay_.eps(), r.e);
      struct Curv {
        int v;
        Vec a, uhat;
        double coef, norm;
      };
      std::vector<Curv> curv;
      for (const auto& c : r.cones) {
        Vec u = Ls[c.v].transpose() * c.a;
        double nu = u.norm();
        if (!(nu > 0)) return kInf;
        g += c.coef * nu;
        Vec uh = u / nu;
        for (int e = 0; e < q; ++e) {
          auto [i, j] = lay_.entries[e];
          dg.add(lay_.sig(c.v, e), c.coef * uh[j] * c.a[i]);
        }
        curv.push_back({c.v, c.a, uh, c.coef, nu});
      }
      for (const auto& s : r.spectral) {
        g += s.coef * x[lay_.s(s.v)];
        dg.add(lay_.s(s.v), s.coef);
      }
      if (!log_term(g, dg)) return kInf;
      if (hess)
        for (auto& cv : curv) {
          // -coef/g * Hess||u||, Hess||u|| = a_i a_k (I - uu^T)_{jl} / ||u||
          const double w = -cv.coef / (g * cv.norm);
          for (int e1 = 0; e1 < q; ++e1)
            for (int e2 = 0; e2 < q; ++e2) {
              auto [i, j] = lay_.entries[e1];
              auto [k, l] = lay_.entries[e2];
              double P = (j == l ? 1.0 : 0.0) - cv.uhat[j] * cv.uhat[l];
              (*hess)(lay_.sig(cv.v, e1), lay_.sig(cv.v, e2)) += w * cv.a[i] * cv.a[k] * P;
            }
        }
    }

    for (int v = 0; v < nv; ++v) {
      const Mat& L = Ls[v];
      const double s = x[lay_.s(v)];
      // positivity of the diagonal
      for (int i = 0; i < d; ++i) {
        Sparse dg;
        dg.add(lay_.sig(v, lay_.diag(i)), 1.0);
        if (!log_term(L(i, i) - dmin_, dg)) return kInf;
      }
      // s <= s_max
      {
        Sparse dg;
        dg.add(lay_.s(v), -1.0);
        if (!log_term(p_.s_max - s, dg)) return kInf;
      }
      // volume: 2 sum log L_ii - rhs
      {
        double h = -p_.volume_rhs[v];
        for (int i = 0; i < d; ++i) h += 2 * std::log(L(i, i));
        Sparse dg;
        for (int i = 0; i < d; ++i) dg.add(lay_.sig(v, lay_.diag(i)), 2.0 / L(i, i));
        if (!log_term(h, dg)) return kInf;
        if (hess)
          for (int i = 0; i < d; ++i) {
            int id = lay_.sig(v, lay_.diag(i));
            (*hess)(id, id) += 2.0 / (L(i, i) * L(i, i) * h);
          }
      }
      // s^2 I - L^T L > 0
      {
        Mat W = s * s * Mat::Identity(d, d) - L.transpose() * L;
        Eigen::LLT<Mat> llt(W);
        if (llt.info() != Eigen::Success) return kInf;
        f -= 2.0 * llt.matrixLLT().diagonal().array().log().sum();
        if (grad || hess) {
          Mat Wi = llt.solve(Mat::Identity(d, d));
          std::vector<Mat> dW(q + 1);
          std::vector<int> id(q + 1);
          for (int e = 0; e < q; ++e) {
            auto [i, j] = lay_.entries[e];
            Mat E = Mat::Zero(d, d);
            E(i, j) = 1.0;
            dW[e] = -(E.transpose() * L + L.transpose() * E);
            id[e] = lay_.sig(v, e);
          }
          dW[q] = 2 * s * Mat::Identity(d, d);
          id[q] = lay_.s(v);
          std::vector<Mat> WidW(q + 1);
          for (int a = 0; a <= q; ++a) WidW[a] = Wi * dW[a];
          if (grad)
            for (int a = 0; a <= q; ++a) (*grad)[id[a]] -= WidW[a].trace();
          if (hess)
            for (int a = 0; a <= q; ++a)
              for (int b = 0; b <= q; ++b) {
                double h2 = (WidW[a] * WidW[b]).trace();
                if (a == q && b == q) {
                  h2 -= 2.0 * Wi.trace();
                } else if (a < q && b < q) {
                  auto [i, j] = lay_.entries[a];
                  auto [k, l] = lay_.entries[b];
                  // second derivative of W is -(E_a^T E_b + E_b^T E_a); E_a^T E_b = e_j e_l^T [i == k]
                  if (i == k) h2 += Wi(l, j) + Wi(j, l);
                }
                (*hess)(id[a], id[b]) += h2;
              }
        }
      }
    }

    // spacing (Gauss-Newton curvature)
    for (const auto& sp : p_.spacing) {
      Vec u = Ls[sp.v].transpose() * sp.q;
      double g = u.squaredNorm() - sp.theta * sp.theta;
      Sparse dg;
      for (int e = 0; e < q; ++e) {
        auto [i, j] = lay_.entries[e];
        dg.add(lay_.sig(sp.v, e), 2.0 * u[j] * sp.q[i]);
      }
      if (!log_term(g, dg)) return kInf;
    }

    // eps <= cap
    {
      Sparse dg;
      dg.add(lay_.eps(), -1.0);
      if (!log_term(p_.eps_cap - x[lay_.eps()], dg)) return kInf;
    }
    return f;
  }

 private:
  const enc::EllipsoidProblem& p_;
  const Layout& lay_;
  double dmin_;
};

}  // namespace

double epsilon_of(const enc::EllipsoidProblem& p, const std::vector<Mat>& sigma) {
  double eps = p.eps_cap;
  for (const auto& r : p.rows) {
    double v = r.c;
    for (auto& c : r.cones) v += c.coef * cone_value(sigma[c.v], c.a);
    for (auto& s : r.spectral) v += s.coef * geom::sqrt_lambda_max(sigma[s.v]);
    if (r.e < 0) eps = std::min(eps, v / -r.e);
    else if (r.e == 0 && v < 0) return -kInf;
  }
  return eps;
}

double shape_violation(const enc::EllipsoidProblem& p, const std::vector<Mat>& sigma, double diag_min) {
  double worst = 0.0;
  for (std::size_t v = 0; v < sigma.size(); ++v) {
    Eigen::SelfAdjointEigenSolver<Mat> es(sigma[v], Eigen::EigenvaluesOnly);
    worst = std::max(worst, diag_min * diag_min - es.eigenvalues().minCoeff());
    if (es.eigenvalues().minCoeff() > 0)
      worst = std::max(worst, p.volume_rhs[v] - geom::log_det(sigma[v]));
    else
      worst = kInf;
  }
  for (const auto& sp : p.spacing)
    worst = std::max(worst, sp.theta - cone_value(sigma[sp.v], sp.q));
  return worst;
}

Result solve_ellipsoids(const enc::EllipsoidProblem& p, const Options& opt) {
  const int nv = static_cast<int>(p.var_ells.size());
  const int d = p.dim;
  Layout lay(d, nv);
  Result res;

  const double eps_start = epsilon_of(p, p.sigma_start);
  if (!std::isfinite(eps_start) || shape_violation(p, p.sigma_start, opt.diag_min) > 1e-9) {
    res.status = Status::Infeasible;
    return res;
  }
  auto warm = [&]() {
    res.status = Status::WarmStart;
    res.sigma = p.sigma_start;
    res.epsilon = eps_start;
    return res;
  };
  if (nv == 0) {
    res = warm();
    res.status = Status::Optimal;
    return res;
  }

  Vec x(lay.n);
  for (int v = 0; v < nv; ++v) {
    Eigen::LLT<Mat> llt(p.sigma_start[v]);
    Mat L = llt.matrixL();
    for (int e = 0; e < lay.q; ++e) x[lay.sig(v, e)] = L(lay.entries[e].first, lay.entries[e].second);
    double s = geom::sqrt_lambda_max(p.sigma_start[v]);
    x[lay.s(v)] = std::min(s * (1 + 1e-3) + 1e-9, 0.5 * (s + p.s_max));
  }
  x[lay.eps()] = eps_start - std::max(1e-6, 1e-3 * (1.0 + std::abs(eps_start)));

  Barrier bar(p, lay, opt.diag_min);
  double t = opt.t_init;
  Vec g;
  Mat H;
  for (int stage = 0; stage < opt.stages; ++stage, t *= opt.t_factor) {
    for (int it = 0; it < opt.newton_per_stage; ++it) {
      double f = bar.eval(x, t, &g, &H);
      if (!std::isfinite(f)) break;
      Eigen::LDLT<Mat> ldlt(H);
      Vec dx = ldlt.solve(-g);
      if (ldlt.info() != Eigen::Success || !dx.allFinite() || g.dot(dx) >= 0) {
        Mat Hr = H + 1e-8 * (1.0 + H.diagonal().cwiseAbs().maxCoeff()) * Mat::Identity(lay.n, lay.n);
        dx = Hr.ldlt().solve(-g);
      }
      const double dec = -g.dot(dx);
      ++res.newton_steps;
      if (!(dec > 0) || dec / 2 < 1e-10) break;
      double step = 1.0;
      bool moved = false;
      for (int ls = 0; ls < 60; ++ls, step *= 0.5) {
        Vec xn = x + step * dx;
        double fn = bar.eval(xn, t, nullptr, nullptr);
        if (std::isfinite(fn) && fn <= f - 1e-4 * step * dec) {
          x = xn;
          moved = true;
          break;
        }
      }
      if (!moved) break;
    }
  }

  std::vector<Mat> sig(nv);
  for (int v = 0; v < nv; ++v) {
    Mat L = lay.L(x, v);
    sig[v] = L * L.transpose();
  }
  const double eps = epsilon_of(p, sig);
  const double viol = shape_violation(p, sig, opt.diag_min);
  spdlog::debug("ellipsoid stage: eps {} (start {}), shape violation {}, {} newton steps", eps, eps_start, viol,
                res.newton_steps);
  if (!(eps >= eps_start - 1e-6) || viol > 1e-6 || eps < eps_start) {
    const int steps = res.newton_steps;
    warm();
    res.newton_steps = steps;
    return res;
  }
  res.status = Status::Optimal;
  res.sigma = std::move(sig);
  res.epsilon = eps;
  return res;
}

}  // namespace swarmstl::ell
