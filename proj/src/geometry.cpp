#include "swarmstl/geometry.hpp"

#include <cmath>
#include <stdexcept>

namespace swarmstl::geom {

double support_min(const Ellipsoid& e, const Vec& a, double b) {
  if (a.norm() == 0.0) throw std::invalid_argument("support_min: zero direction");
  return a.dot(e.center) + b - std::sqrt(a.dot(e.shape * a));
}

double sqrt_lambda_max(const Mat& sigma) {
  Eigen::SelfAdjointEigenSolver<Mat> es(sigma, Eigen::EigenvaluesOnly);
  return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
}

double sqrt_lambda_min(const Mat& sigma) {
  Eigen::SelfAdjointEigenSolver<Mat> es(sigma, Eigen::EigenvaluesOnly);
  return std::sqrt(std::max(0.0, es.eigenvalues().minCoeff()));
}

double separation_margin(const Segment& s1, const Segment& s2, double eta, double zeta, double eps, int d) {
  Vec m1 = 0.5 * (s1.p0 + s1.p1), m2 = 0.5 * (s2.p0 + s2.p1);
  double lhs = (m1 - m2).lpNorm<1>();
  double half = 0.5 * (s1.p0 - s1.p1).lpNorm<1>() + 0.5 * (s2.p0 - s2.p1).lpNorm<1>();
  double infl = (sqrt_lambda_max(s1.sigma) + sqrt_lambda_max(s2.sigma) + 2 * eta + zeta + eps) * std::sqrt(double(d));
  return lhs - half - infl;
}

bool intervals_disjoint(double a0, double a1, double b0, double b1) { return a1 < b0 || b1 < a0; }

double log_det(const Mat& sigma) {
  Eigen::LLT<Mat> llt(sigma);
  if (llt.info() != Eigen::Success) throw std::invalid_argument("log_det: matrix is not positive definite");
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

double volume_rhs(double xi, int n, double zeta, int d) { return 2.0 * std::log(xi * n * std::pow(zeta, d)); }

Mat sqrtm(const Mat& spd) {
  Eigen::SelfAdjointEigenSolver<Mat> es(spd);
  return es.operatorSqrt();
}

Mat inv_sqrtm(const Mat& spd) {
  Eigen::SelfAdjointEigenSolver<Mat> es(spd);
  return es.operatorInverseSqrt();
}

double membership(const Vec& p, const Vec& c, const Mat& sigma) {
  Vec dp = p - c;
  return dp.dot(sigma.ldlt().solve(dp));
}

}  // namespace swarmstl::geom
