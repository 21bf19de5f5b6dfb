#include "swarmstl/plot.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <sstream>
#include <stdexcept>

#include "swarmstl/geometry.hpp"

namespace swarmstl::viz {

std::vector<Vec> polygon_vertices(const Polytope& poly, const Box& clip) {
  std::vector<Halfspace> rows = poly.rows;
  for (int i = 0; i < 2; ++i) {
    Vec e = Vec::Zero(2);
    e[i] = 1;
    rows.push_back({e, -clip.lo[i]});
    rows.push_back({-e, clip.hi[i]});
  }
  std::vector<Vec> pts;
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = i + 1; j < rows.size(); ++j) {
      Eigen::Matrix2d A;
      A.row(0) = rows[i].a.transpose();
      A.row(1) = rows[j].a.transpose();
      if (std::abs(A.determinant()) < 1e-12) continue;
      Vec p = A.partialPivLu().solve(Vec(Eigen::Vector2d(-rows[i].b, -rows[j].b)));
      bool ok = true;
      for (auto& h : rows) ok = ok && h.a.dot(p) + h.b >= -1e-9;
      if (!ok) continue;
      bool dup = false;
      for (auto& q : pts) dup = dup || (q - p).norm() < 1e-9;
      if (!dup) pts.push_back(p);
    }
  if (pts.size() < 3) return {};
  Vec c = Vec::Zero(2);
  for (auto& p : pts) c += p;
  c /= static_cast<double>(pts.size());
  std::sort(pts.begin(), pts.end(), [&](const Vec& a, const Vec& b) {
    return std::atan2(a[1] - c[1], a[0] - c[0]) < std::atan2(b[1] - c[1], b[0] - c[0]);
  });
  return pts;
}

namespace {

void negated_regions(const stl::FormulaPtr& f, bool neg, std::set<std::string>& out) {
  if (f->op == stl::Op::Pred && neg) out.insert(f->region);
  for (auto& k : f->kids) negated_regions(k, neg != (f->op == stl::Op::Not), out);
}

struct Canvas {
  Box box;
  double scale, margin = 30;
  std::ostringstream out;

  double X(double x) const { return margin + (x - box.lo[0]) * scale; }
  double Y(double y) const { return margin + (box.hi[1] - y) * scale; }

  std::string points(const std::vector<Vec>& pts) const {
    std::ostringstream s;
    s.precision(6);
    for (auto& p : pts) s << X(p[0]) << ',' << Y(p[1]) << ' ';
    return s.str();
  }
};

const char* kPalette[] = {"#1f5fd6", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf", "#bcbd22"};

std::vector<Vec> ellipse(const Vec& c, const Mat& sigma) {
  Mat L = geom::sqrtm(sigma);
  std::vector<Vec> pts;
  for (int i = 0; i < 48; ++i) {
    double th = 2 * std::numbers::pi * i / 48;
    pts.push_back(c + L * Vec(Eigen::Vector2d(std::cos(th), std::sin(th))));
  }
  return pts;
}

std::vector<Vec> star(const Vec& c, double r) {
  std::vector<Vec> pts;
  for (int i = 0; i < 10; ++i) {
    double th = std::numbers::pi / 2 + std::numbers::pi * i / 5;
    double rr = i % 2 ? r * 0.45 : r;
    pts.push_back(c + Vec(Eigen::Vector2d(rr * std::cos(th), rr * std::sin(th))));
  }
  return pts;
}

}  // namespace

std::string plot_svg(const Scenario& sc, const plan::PlanPath* path, const rt::Trace* trace) {
  if (sc.dimension != 2)
    throw std::invalid_argument("plot supports dimension 2 only (scenario has dimension " +
                                std::to_string(sc.dimension) + ")");
  Canvas cv;
  cv.box = workspace_box(sc);
  if (path)
    for (auto& sp : path->swarms)
      for (auto& w : sp.waypoints) {
        cv.box.lo = cv.box.lo.cwiseMin(w.p);
        cv.box.hi = cv.box.hi.cwiseMax(w.p);
      }
  Vec ext = (cv.box.hi - cv.box.lo).cwiseMax(1e-6);
  cv.box.lo -= 0.02 * ext;
  cv.box.hi += 0.02 * ext;
  ext = cv.box.hi - cv.box.lo;
  cv.scale = 600.0 / std::max(ext[0], ext[1]);
  const double W = ext[0] * cv.scale + 2 * cv.margin, H = ext[1] * cv.scale + 2 * cv.margin;
  auto& o = cv.out;
  o.precision(6);
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
    << ' ' << H << "\">\n";
  o << "<defs><marker id=\"arrow\" viewBox=\"0 0 10 10\" refX=\"5\" refY=\"5\" markerWidth=\"7\" "
       "markerHeight=\"7\" orient=\"auto\"><path d=\"M0,0 L10,5 L0,10 z\" fill=\"black\"/></marker></defs>\n";
  o << "<rect x=\"0\" y=\"0\" width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";

  std::set<std::string> unsafe;
  if (!sc.formula.empty()) {
    auto ctx = stl::context_for(sc);
    negated_regions(stl::parse(sc.formula, &ctx), false, unsafe);
  }
  o << "<g id=\"regions\">\n";
  int pal = 0;
  for (auto& [name, poly] : sc.regions) {
    auto pts = polygon_vertices(poly, cv.box);
    if (pts.empty()) continue;
    std::string color = unsafe.count(name) ? "#d62728" : kPalette[pal++ % 8];
    Vec c = Vec::Zero(2);
    for (auto& p : pts) c += p;
    c /= static_cast<double>(pts.size());
    o << "<polygon class=\"region\" data-name=\"" << name << "\" points=\"" << cv.points(pts) << "\" fill=\""
      << color << "\" fill-opacity=\"0.35\" stroke=\"" << color << "\"/>\n";
    o << "<text x=\"" << cv.X(c[0]) << "\" y=\"" << cv.Y(c[1]) << "\" font-size=\"14\" text-anchor=\"middle\">"
      << name << "</text>\n";
  }
  o << "</g>\n<g id=\"obstacles\">\n";
  for (auto& poly : sc.obstacles) {
    auto pts = polygon_vertices(poly, cv.box);
    if (pts.empty()) continue;
    o << "<polygon class=\"safe-set\" points=\"" << cv.points(pts)
      << "\" fill=\"none\" stroke=\"#444\" stroke-width=\"2\" stroke-dasharray=\"6,3\"/>\n";
  }
  o << "</g>\n";

  if (trace) {
    o << "<g id=\"trace\" stroke-width=\"0.6\" fill=\"none\" opacity=\"0.6\">\n";
    const int stride = std::max(1, trace->num_samples() / 400);
    for (int a = 0; a < trace->num_agents(); ++a) {
      std::vector<Vec> pts;
      for (int k = 0; k < trace->num_samples(); k += stride) pts.push_back(trace->pos[k].col(a));
      pts.push_back(trace->pos.back().col(a));
      o << "<polyline class=\"agent\" points=\"" << cv.points(pts) << "\" stroke=\""
        << kPalette[trace->swarm_of[a] % 8] << "\"/>\n";
    }
    o << "</g>\n";
  }

  if (path) {
    o << "<g id=\"plan\">\n";
    for (std::size_t s = 0; s < path->swarms.size(); ++s) {
      const auto& w = path->swarms[s].waypoints;
      for (std::size_t k = 0; k < w.size(); ++k)
        o << "<polygon class=\"ellipse\" points=\"" << cv.points(ellipse(w[k].p, w[k].sigma))
          << "\" fill=\"none\" stroke=\"#555\" stroke-width=\"0.8\"/>\n";
      for (std::size_t k = 1; k < w.size(); ++k) {
        Vec mid = 0.5 * (w[k - 1].p + w[k].p);
        o << "<polyline class=\"centroid\" points=\"" << cv.points({w[k - 1].p, mid, w[k].p})
          << "\" fill=\"none\" stroke=\"black\" stroke-width=\"1.5\" marker-mid=\"url(#arrow)\"/>\n";
      }
      Vec p0 = w.front().p;
      o << "<circle class=\"start\" cx=\"" << cv.X(p0[0]) << "\" cy=\"" << cv.Y(p0[1])
        << "\" r=\"5\" fill=\"white\" stroke=\"black\" stroke-width=\"1.5\"/>\n";
      if (w.size() > 1)
        o << "<polygon class=\"end\" points=\"" << cv.points(star(w.back().p, 9 / cv.scale))
          << "\" fill=\"black\"/>\n";
    }
    o << "</g>\n";
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace swarmstl::viz
