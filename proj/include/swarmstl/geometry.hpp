#pragma once

#include "swarmstl/scenario.hpp"

namespace swarmstl::geom {

// {p : (p - center)^T shape^-1 (p - center) <= 1}
struct Ellipsoid {
  Vec center;
  Mat shape;
};

// Chord between two waypoints with a fixed ellipsoid shape.
struct Segment {
  Vec p0, p1;
  Mat sigma;
};

// min over the ellipsoid of a.p + b
double support_min(const Ellipsoid& e, const Vec& a, double b);
double sqrt_lambda_max(const Mat& sigma);
double sqrt_lambda_min(const Mat& sigma);

// Midpoint gap minus half-extents and the inflated margin, all in 1-norm.
// Nonnegative means every pair of points from the two inflated segments is
// at least zeta + eps apart.
double separation_margin(const Segment& s1, const Segment& s2, double eta, double zeta, double eps, int d);

// closed intervals [a0, a1] and [b0, b1]
bool intervals_disjoint(double a0, double a1, double b0, double b1);

double log_det(const Mat& sigma);
// 2 log(xi * n * zeta^d)
double volume_rhs(double xi, int n, double zeta, int d);

Mat sqrtm(const Mat& spd);
Mat inv_sqrtm(const Mat& spd);
// (p - c)^T sigma^-1 (p - c)
double membership(const Vec& p, const Vec& c, const Mat& sigma);

}  // namespace swarmstl::geom
