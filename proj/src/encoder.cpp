#include "swarmstl/encoder.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <ostream>
#include <stdexcept>

#include "swarmstl/geometry.hpp"

namespace swarmstl::enc {

using stl::Lifted;
using LK = Lifted::Kind;

LinearExpr LinearExpr::var(int col, double coef) {
  LinearExpr e;
  if (coef != 0.0) e.terms[col] = coef;
  return e;
}

LinearExpr& LinearExpr::operator+=(const LinearExpr& o) {
  for (auto& [c, v] : o.terms) {
    double& t = terms[c];
    t += v;
    if (t == 0.0) terms.erase(c);
  }
  constant += o.constant;
  return *this;
}

LinearExpr& LinearExpr::operator-=(const LinearExpr& o) {
  for (auto& [c, v] : o.terms) {
    double& t = terms[c];
    t -= v;
    if (t == 0.0) terms.erase(c);
  }
  constant -= o.constant;
  return *this;
}

LinearExpr& LinearExpr::operator*=(double k) {
  if (k == 0.0) {
    terms.clear();
    constant = 0.0;
    return *this;
  }
  for (auto& [c, v] : terms) v *= k;
  constant *= k;
  return *this;
}

double LinearExpr::eval(const std::vector<double>& x) const {
  double v = constant;
  for (auto& [c, k] : terms) v += k * x[c];
  return v;
}

LinearExpr operator+(LinearExpr a, const LinearExpr& b) { return a += b; }
LinearExpr operator-(LinearExpr a, const LinearExpr& b) { return a -= b; }
LinearExpr operator*(double k, LinearExpr a) { return a *= k; }
LinearExpr operator+(LinearExpr a, double c) {
  a.constant += c;
  return a;
}

const char* to_string(Family f) {
  switch (f) {
    case Family::TimeProgression: return "time_progression";
    case Family::Reachability: return "reachability";
    case Family::Obstacle: return "obstacle";
    case Family::InterSwarm: return "inter_swarm";
    case Family::Stl: return "stl";
    case Family::Cover: return "cover";
    case Family::Auxiliary: return "auxiliary";
  }
  return "?";
}

namespace {

double lifted_horizon(const stl::LiftedPtr& f) {
  if (!f) return 0.0;
  double h = 0.0;
  for (auto& k : f->kids) h = std::max(h, lifted_horizon(k));
  if (f->kind == LK::Always || f->kind == LK::Eventually || f->kind == LK::Until) h += f->b;
  return h;
}

void preorder(const stl::LiftedPtr& f, std::map<const Lifted*, int>& out) {
  out.emplace(f.get(), static_cast<int>(out.size()));
  for (auto& k : f->kids) preorder(k, out);
}

double sqrt_quad(const Mat& sigma, const Vec& a) { return std::sqrt(std::max(0.0, a.dot(sigma * a))); }

double big_m_cap(const Scenario& sc) {
  return sc.constants.big_m > 0 ? sc.constants.big_m : default_big_m(sc);
}

}  // namespace

Params encoding_params(const Scenario& sc, const stl::LiftedPtr& lifted) {
  Params p{};
  int kmax = 0;
  for (auto& sw : sc.swarms) kmax = std::max(kmax, sw.segments);
  const double T = sc.constants.horizon;
  p.rho = kmax > 0 ? std::min(1.0, T / (2.0 * kmax)) : std::min(1.0, T / 2.0);
  p.delta = 1e-4;
  p.eps_cap = workspace_box(sc).diameter();
  p.time_span = std::max(T, lifted_horizon(lifted));
  return p;
}

double witness_width(const Params& p, double a, double b) { return std::min(p.rho, b - a); }

int Instance::num_binaries() const {
  int n = 0;
  for (auto& c : cols) n += c.binary;
  return n;
}

std::vector<int> Instance::binaries() const {
  std::vector<int> out;
  for (int j = 0; j < static_cast<int>(cols.size()); ++j)
    if (cols[j].binary) out.push_back(j);
  return out;
}

int Instance::count_rows(Family f) const {
  int n = 0;
  for (auto& r : rows) n += r.family == f;
  return n;
}

Encoder::Encoder(const Scenario& sc, const stl::LiftedPtr& lifted) {
  inst_.scenario = sc;
  inst_.params = encoding_params(sc, lifted);
  const auto& c = sc.constants;
  const int d = sc.dimension;
  const double T = c.horizon, rho = inst_.params.rho;
  inst_.eps_col = add_col("eps", -lp::kInf, inst_.params.eps_cap);

  const int S = static_cast<int>(sc.swarms.size());
  inst_.pos.resize(S);
  inst_.time.resize(S);
  inst_.ell_id.resize(S);
  for (int s = 0; s < S; ++s) {
    const auto& sw = sc.swarms[s];
    const int K = sw.segments;
    Vec c0 = sw.centroid();
    auto& P = inst_.pos[s];
    auto& Tm = inst_.time[s];
    P.resize(K + 1);
    for (int i = 0; i < d; ++i) P[0].push_back(LinearExpr(c0[i]));
    Tm.push_back(LinearExpr(c.t0));
    for (int k = 1; k <= K; ++k) {
      const double reach = c.chi * (T - (K - k) * rho);
      for (int i = 0; i < d; ++i) {
        int col = add_col("p_" + std::to_string(s) + "_" + std::to_string(k) + "_" + std::to_string(i),
                          c0[i] - reach, c0[i] + reach);
        P[k].push_back(LinearExpr::var(col));
      }
      int tc = add_col("t_" + std::to_string(s) + "_" + std::to_string(k), c.t0 + k * rho,
                       c.t0 + T - (K - k) * rho);
      Tm.push_back(LinearExpr::var(tc));
    }
    for (int k = 0; k <= K; ++k) {
      inst_.ell_id[s].push_back(static_cast<int>(inst_.ells.size()));
      inst_.ells.push_back({s, k});
    }
  }
  if (lifted) {
    preorder(lifted, preorder_);
    inst_.witness_cols.assign(preorder_.size(), -1);
    inst_.witness_widths.assign(preorder_.size(), 0.0);
  }
}

int Encoder::add_col(std::string name, double lo, double hi, bool binary) {
  inst_.cols.push_back({std::move(name), lo, hi, binary});
  return static_cast<int>(inst_.cols.size()) - 1;
}

int Encoder::add_row(MarginRow r) {
  inst_.rows.push_back(std::move(r));
  return static_cast<int>(inst_.rows.size()) - 1;
}

double Encoder::lin_min(const LinearExpr& e) const {
  double v = e.constant;
  for (auto& [c, k] : e.terms) v += k * (k > 0 ? inst_.cols[c].lo : inst_.cols[c].hi);
  return v;
}

double Encoder::lin_max(const LinearExpr& e) const {
  double v = e.constant;
  for (auto& [c, k] : e.terms) v += k * (k > 0 ? inst_.cols[c].hi : inst_.cols[c].lo);
  return v;
}

std::vector<Encoder::Seg> Encoder::segments(int s) const {
  std::vector<Seg> out;
  const int K = inst_.scenario.swarms[s].segments;
  const auto& P = inst_.pos[s];
  const auto& Tm = inst_.time[s];
  if (K == 0) {
    out.push_back({s, 0, inst_.ell_id[s][0], &P[0], &P[0], Tm[0], true, LinearExpr()});
    return out;
  }
  for (int k = 1; k <= K; ++k)
    out.push_back({s, k, inst_.ell_id[s][k], &P[k - 1], &P[k], Tm[k - 1], k == K, Tm[k]});
  return out;
}

void Encoder::encode_time_progression() {
  const auto& sc = inst_.scenario;
  for (int s = 0; s < static_cast<int>(sc.swarms.size()); ++s) {
    const int K = sc.swarms[s].segments;
    if (K == 0) {
      spdlog::warn("swarm {} has no segments; it stays at its start", sc.swarms[s].id);
      continue;
    }
    const auto& Tm = inst_.time[s];
    for (int k = 1; k <= K; ++k) {
      MarginRow r;
      r.lin = Tm[k] - Tm[k - 1] + (-inst_.params.rho);
      r.family = Family::TimeProgression;
      add_row(std::move(r));
    }
    MarginRow r;
    r.lin = LinearExpr(sc.constants.t0 + sc.constants.horizon) - Tm[K];
    r.family = Family::TimeProgression;
    add_row(std::move(r));
  }
}

void Encoder::encode_reachability() {
  const auto& sc = inst_.scenario;
  const int d = sc.dimension;
  for (int s = 0; s < static_cast<int>(sc.swarms.size()); ++s) {
    const auto& P = inst_.pos[s];
    const auto& Tm = inst_.time[s];
    for (int k = 1; k <= sc.swarms[s].segments; ++k) {
      for (int mask = 0; mask < (1 << d); ++mask) {
        MarginRow r;
        r.lin = sc.constants.chi * (Tm[k] - Tm[k - 1]);
        for (int i = 0; i < d; ++i) {
          double sg = (mask >> i) & 1 ? -1.0 : 1.0;
          r.lin -= sg * (P[k][i] - P[k - 1][i]);
        }
        r.family = Family::Reachability;
        add_row(std::move(r));
      }
    }
  }
}

namespace {

// sign * (a.p + b) - sqrt(a^T Sigma a) - (eta + eps) ||a|| >= 0
MarginRow face_row(const Halfspace& h, double sign, const std::vector<LinearExpr>& p, int ell, double eta,
                   int eps_col, Family fam) {
  MarginRow r;
  LinearExpr v(h.b);
  for (int i = 0; i < static_cast<int>(p.size()); ++i) v += h.a[i] * p[i];
  const double na = h.a.norm();
  r.lin = sign * v + (-eta * na);
  r.lin += LinearExpr::var(eps_col, -na);
  r.cones.push_back({ell, h.a, -1.0});
  r.family = fam;
  return r;
}

}  // namespace

void Encoder::encode_obstacle_safety() {
  const auto& sc = inst_.scenario;
  for (int s = 0; s < static_cast<int>(sc.swarms.size()); ++s)
    for (const Seg& seg : segments(s))
      for (const Polytope& poly : sc.obstacles)
        for (const Halfspace& h : poly.rows) {
          add_row(face_row(h, 1.0, *seg.p0, seg.ell, sc.constants.eta, inst_.eps_col, Family::Obstacle));
          if (seg.p1 != seg.p0)
            add_row(face_row(h, 1.0, *seg.p1, seg.ell, sc.constants.eta, inst_.eps_col, Family::Obstacle));
        }
}

void Encoder::atom_rows(const Seg& seg, const Polytope& poly, bool negated, std::vector<Branch>& out) const {
  const double eta = inst_.scenario.constants.eta;
  auto rows_for = [&](const Halfspace& h, double sign, Branch& br) {
    br.push_back(face_row(h, sign, *seg.p0, seg.ell, eta, inst_.eps_col, Family::Stl));
    if (seg.p1 != seg.p0) br.push_back(face_row(h, sign, *seg.p1, seg.ell, eta, inst_.eps_col, Family::Stl));
  };
  if (!negated) {
    Branch br;
    for (const Halfspace& h : poly.rows) rows_for(h, 1.0, br);
    out.push_back(std::move(br));
  } else {
    for (const Halfspace& h : poly.rows) {
      Branch br;
      rows_for(h, -1.0, br);
      out.push_back(std::move(br));
    }
  }
}

void Encoder::encode_false(const std::vector<Literal>& lits) {
  MarginRow r;
  r.lin = LinearExpr(-1.0);
  r.lits = lits;
  r.family = Family::Stl;
  add_row(std::move(r));
}

void Encoder::encode_disjunction(std::vector<Branch> branches, const std::vector<Literal>& lits, bool lazy,
                                 const std::string& tag) {
  std::vector<Branch> kept;
  for (auto& br : branches) {
    bool impossible = false, certain = true;
    for (auto& r : br) {
      if (lin_max(r.lin) < 0.0) impossible = true;
      if (!r.cones.empty() || !r.spectral.empty() || lin_min(r.lin) < 0.0) certain = false;
    }
    if (certain && !impossible) return;
    if (!impossible) kept.push_back(std::move(br));
  }
  if (kept.empty()) {
    encode_false(lits);
    return;
  }
  const int m = static_cast<int>(kept.size());
  int group = -1;
  if (lazy && lits.empty() && m > 1) {
    group = static_cast<int>(inst_.groups.size());
    inst_.groups.emplace_back();
  }
  std::vector<Literal> sel;
  if (m == 1) {
    sel.push_back({-1, true});
  } else if (m == 2) {
    int z = add_col("z_" + tag + "_" + std::to_string(inst_.cols.size()), 0, 1, true);
    sel = {{z, false}, {z, true}};
  } else {
    MarginRow cover;
    cover.lin = LinearExpr(-1.0);
    for (int j = 0; j < m; ++j) {
      int z = add_col("z_" + tag + "_" + std::to_string(inst_.cols.size()), 0, 1, true);
      sel.push_back({z, true});
      cover.lin += LinearExpr::var(z);
    }
    cover.lits = lits;
    cover.family = Family::Cover;
    cover.group = group;
    int ri = add_row(std::move(cover));
    if (group >= 0) inst_.groups[group].rows.push_back(ri);
  }
  for (int j = 0; j < m; ++j) {
    for (auto& r : kept[j]) {
      r.lits = lits;
      if (sel[j].var >= 0) r.lits.push_back(sel[j]);
      r.group = group;
      int ri = add_row(std::move(r));
      if (group >= 0) inst_.groups[group].rows.push_back(ri);
    }
  }
  if (m > 1) {
    inst_.disjunctions.push_back({lits, sel, group});
    if (group >= 0) {
      Group& g = inst_.groups[group];
      g.kind = Group::Kind::Simple;
      g.branch_lits = sel;
      for (auto& l : sel)
        if (std::find(g.binaries.begin(), g.binaries.end(), l.var) == g.binaries.end()) g.binaries.push_back(l.var);
    }
  }
}

void Encoder::encode_atom_window(const Lifted& f, const LinearExpr& lo, const LinearExpr& hi,
                                 const std::vector<Literal>& lits) {
  const auto& sc = inst_.scenario;
  auto it = sc.regions.find(f.region);
  if (it == sc.regions.end()) throw std::invalid_argument("unknown region '" + f.region + "'");
  const double delta = inst_.params.delta;
  const bool lazy = lo.is_constant() && hi.is_constant();
  for (const Seg& seg : segments(f.swarm)) {
    std::vector<Branch> branches;
    if (!seg.open_end) {
      MarginRow r;
      r.lin = lo - seg.t_end + (-delta);
      r.family = Family::Stl;
      branches.push_back({r});
    }
    {
      MarginRow r;
      r.lin = seg.t_start - hi + (-delta);
      r.family = Family::Stl;
      branches.push_back({r});
    }
    atom_rows(seg, it->second, f.negated, branches);
    encode_disjunction(std::move(branches), lits, lazy, "a");
  }
}

void Encoder::encode_window(const stl::LiftedPtr& f, const LinearExpr& lo, const LinearExpr& hi,
                            const std::vector<Literal>& lits) {
  switch (f->kind) {
    case LK::True: return;
    case LK::False: encode_false(lits); return;
    case LK::Atom: encode_atom_window(*f, lo, hi, lits); return;
    case LK::And:
      for (auto& k : f->kids) encode_window(k, lo, hi, lits);
      return;
    case LK::Always: encode_window(f->kids[0], lo + f->a, hi + f->b, lits); return;
    case LK::Eventually:
    case LK::Until: {
      const auto& c = inst_.scenario.constants;
      const double w = witness_width(inst_.params, f->a, f->b);
      double tlo = std::max(c.t0, lin_min(hi) + f->a);
      double thi = std::min(c.t0 + inst_.params.time_span, lin_max(lo) + f->b - w);
      if (thi < tlo) thi = tlo;
      const int id = preorder_.at(f.get());
      int tau = add_col("tau_" + std::to_string(id), tlo, thi);
      inst_.witness_cols[id] = tau;
      inst_.witness_widths[id] = w;
      LinearExpr T = LinearExpr::var(tau);
      MarginRow r1, r2;
      r1.lin = T - hi + (-f->a);
      r2.lin = lo + f->b - T + (-w);
      r1.family = r2.family = Family::Stl;
      r1.lits = r2.lits = lits;
      add_row(std::move(r1));
      add_row(std::move(r2));
      if (f->kind == LK::Eventually) {
        encode_window(f->kids[0], T, T + w, lits);
      } else {
        encode_window(f->kids[1], T, T + w, lits);
        encode_window(f->kids[0], lo, T + w, lits);
      }
      return;
    }
    case LK::Or: {
      const std::size_t c0 = inst_.cols.size(), r0 = inst_.rows.size(), d0 = inst_.disjunctions.size();
      std::vector<int> kept;  // placeholder ids
      for (auto& kid : f->kids) {
        const std::size_t cb = inst_.cols.size(), rb = inst_.rows.size(), db = inst_.disjunctions.size();
        const int ph = -(++placeholder_) - 1;
        auto sub = lits;
        sub.push_back({ph, true});
        encode_window(kid, lo, hi, sub);
        if (inst_.rows.size() == rb && inst_.cols.size() == cb) {
          // branch is trivially true
          inst_.cols.resize(c0);
          inst_.rows.resize(r0);
          inst_.disjunctions.resize(d0);
          for (auto& w : inst_.witness_cols)
            if (w >= static_cast<int>(c0)) w = -1;
          return;
        }
        bool impossible = false;
        for (std::size_t i = rb; i < inst_.rows.size() && !impossible; ++i) {
          const auto& r = inst_.rows[i];
          if (r.lits.size() == sub.size() && lin_max(r.lin) < 0.0) impossible = true;
        }
        if (impossible) {
          inst_.cols.resize(cb);
          inst_.rows.resize(rb);
          inst_.disjunctions.resize(db);
          for (auto& w : inst_.witness_cols)
            if (w >= static_cast<int>(cb)) w = -1;
        } else {
          kept.push_back(ph);
        }
      }
      if (kept.empty()) {
        encode_false(lits);
        return;
      }
      const int m = static_cast<int>(kept.size());
      std::map<int, Literal> repl;
      std::vector<Literal> sel;
      if (m == 1) {
        repl[kept[0]] = {-1, true};
      } else if (m == 2) {
        int z = add_col("z_o_" + std::to_string(inst_.cols.size()), 0, 1, true);
        repl[kept[0]] = {z, false};
        repl[kept[1]] = {z, true};
        sel = {repl[kept[0]], repl[kept[1]]};
      } else {
        MarginRow cover;
        cover.lin = LinearExpr(-1.0);
        for (int j = 0; j < m; ++j) {
          int z = add_col("z_o_" + std::to_string(inst_.cols.size()), 0, 1, true);
          repl[kept[j]] = {z, true};
          sel.push_back({z, true});
          cover.lin += LinearExpr::var(z);
        }
        cover.lits = lits;
        cover.family = Family::Cover;
        add_row(std::move(cover));
      }
      auto patch = [&](std::vector<Literal>& v) {
        std::vector<Literal> out;
        for (auto& l : v) {
          auto it = repl.find(l.var);
          if (it == repl.end()) out.push_back(l);
          else if (it->second.var >= 0) out.push_back(it->second);
        }
        v = std::move(out);
      };
      for (std::size_t i = r0; i < inst_.rows.size(); ++i) patch(inst_.rows[i].lits);
      for (std::size_t i = d0; i < inst_.disjunctions.size(); ++i) {
        patch(inst_.disjunctions[i].parent);
        patch(inst_.disjunctions[i].branches);
      }
      if (m > 1) inst_.disjunctions.push_back({lits, sel, -1});
      return;
    }
  }
}

void Encoder::encode_swarm_stl(const stl::LiftedPtr& lifted) {
  if (!lifted) return;
  if (preorder_.empty()) {
    preorder(lifted, preorder_);
    inst_.witness_cols.assign(preorder_.size(), -1);
    inst_.witness_widths.assign(preorder_.size(), 0.0);
  }
  const double t0 = inst_.scenario.constants.t0;
  encode_window(lifted, LinearExpr(t0), LinearExpr(t0), {});
}

void Encoder::encode_inter_swarm_safety() {
  const auto& sc = inst_.scenario;
  const int S = static_cast<int>(sc.swarms.size());
  if (S < 2) return;
  const int d = sc.dimension;
  const double chiT = sc.constants.chi * sc.constants.horizon;
  inst_.beta.assign(S, {});
  for (int s = 0; s < S; ++s) {
    const int K = sc.swarms[s].segments;
    inst_.beta[s].resize(K + 1);
    for (int k = 1; k <= K; ++k)
      for (int i = 0; i < d; ++i) {
        int b = add_col("beta_" + std::to_string(s) + "_" + std::to_string(k) + "_" + std::to_string(i), 0.0,
                        chiT / 2);
        inst_.beta[s][k].push_back(b);
        LinearExpr half = 0.5 * (inst_.pos[s][k - 1][i] - inst_.pos[s][k][i]);
        MarginRow r1, r2;
        r1.lin = LinearExpr::var(b) - half;
        r2.lin = LinearExpr::var(b) + half;
        r1.family = r2.family = Family::Auxiliary;
        add_row(std::move(r1));
        add_row(std::move(r2));
      }
  }
  const double delta = inst_.params.delta;
  const double rt = std::sqrt(double(d));
  const auto& c = sc.constants;
  for (int s1 = 0; s1 < S; ++s1)
    for (int s2 = s1 + 1; s2 < S; ++s2)
      for (const Seg& g1 : segments(s1))
        for (const Seg& g2 : segments(s2)) {
          MarginRow t1, t2;
          bool has1 = false, has2 = false;
          if (!g1.open_end) {
            t1.lin = g2.t_start - g1.t_end + (-delta);
            has1 = lin_max(t1.lin) >= 0.0;
            if (lin_min(t1.lin) >= 0.0) continue;
          }
          if (!g2.open_end) {
            t2.lin = g1.t_start - g2.t_end + (-delta);
            has2 = lin_max(t2.lin) >= 0.0;
            if (lin_min(t2.lin) >= 0.0) continue;
          }
          const int gid = static_cast<int>(inst_.groups.size());
          inst_.groups.emplace_back();
          Group G;
          G.kind = Group::Kind::Pair;
          const int m = 1 + has1 + has2;
          std::vector<Literal> sel;
          const std::string tag = std::to_string(s1) + "_" + std::to_string(g1.k) + "_" + std::to_string(s2) + "_" +
                                  std::to_string(g2.k);
          if (m == 1) {
            sel.push_back({-1, true});
          } else if (m == 2) {
            int z = add_col("zp_" + tag, 0, 1, true);
            G.binaries.push_back(z);
            sel = {{z, false}, {z, true}};
          } else {
            MarginRow cover;
            cover.lin = LinearExpr(-1.0);
            for (int j = 0; j < 3; ++j) {
              int z = add_col("zp_" + tag + "_" + std::to_string(j), 0, 1, true);
              G.binaries.push_back(z);
              sel.push_back({z, true});
              cover.lin += LinearExpr::var(z);
            }
            cover.family = Family::Cover;
            cover.group = gid;
            G.rows.push_back(add_row(std::move(cover)));
          }
          int si = 0;
          auto lits_of = [](const Literal& l) {
            return l.var >= 0 ? std::vector<Literal>{l} : std::vector<Literal>{};
          };
          if (has1) {
            G.lit_t1 = sel[si++];
            t1.lits = lits_of(G.lit_t1);
            t1.family = Family::InterSwarm;
            t1.group = gid;
            G.row_t1 = add_row(std::move(t1));
            G.rows.push_back(G.row_t1);
          }
          if (has2) {
            G.lit_t2 = sel[si++];
            t2.lits = lits_of(G.lit_t2);
            t2.family = Family::InterSwarm;
            t2.group = gid;
            G.row_t2 = add_row(std::move(t2));
            G.rows.push_back(G.row_t2);
          }
          G.lit_sp = sel[si];
          const auto base = lits_of(G.lit_sp);
          MarginRow sp;
          sp.lin = LinearExpr(-(2 * c.eta + c.zeta) * rt);
          sp.lin += LinearExpr::var(inst_.eps_col, -rt);
          double D = 0.0;
          for (int i = 0; i < d; ++i) {
            LinearExpr A = 0.5 * ((*g1.p0)[i] + (*g1.p1)[i] - (*g2.p0)[i] - (*g2.p1)[i]);
            D = std::max({D, std::abs(lin_min(A)), std::abs(lin_max(A))});
            G.gap.push_back(A);
          }
          G.alpha_bound = D;
          for (int i = 0; i < d; ++i) {
            int a = add_col("alpha_" + tag + "_" + std::to_string(i), -D, D);
            int z = add_col("zs_" + tag + "_" + std::to_string(i), 0, 1, true);
            G.alpha.push_back(a);
            G.sign.push_back(z);
            G.binaries.push_back(z);
            MarginRow rp, rn;
            rp.lin = G.gap[i] - LinearExpr::var(a);
            rn.lin = -1.0 * G.gap[i] - LinearExpr::var(a);
            rp.lits = rn.lits = base;
            rp.lits.push_back({z, true});
            rn.lits.push_back({z, false});
            rp.family = rn.family = Family::InterSwarm;
            rp.group = rn.group = gid;
            G.rows.push_back(add_row(std::move(rp)));
            G.rows.push_back(add_row(std::move(rn)));
            inst_.disjunctions.push_back({base, {{z, false}, {z, true}}, gid});
            sp.lin += LinearExpr::var(a);
            if (g1.k >= 1) sp.lin -= LinearExpr::var(inst_.beta[s1][g1.k][i]);
            if (g2.k >= 1) sp.lin -= LinearExpr::var(inst_.beta[s2][g2.k][i]);
          }
          sp.spectral = {{g1.ell, -rt}, {g2.ell, -rt}};
          sp.lits = base;
          sp.family = Family::InterSwarm;
          sp.group = gid;
          G.row_sp = add_row(std::move(sp));
          G.rows.push_back(G.row_sp);
          if (m > 1) inst_.disjunctions.push_back({{}, sel, gid});
          G.branch_lits = sel;
          inst_.groups[gid] = std::move(G);
        }
}

Instance encode(const Scenario& sc, const stl::LiftedPtr& lifted) {
  Encoder e(sc, lifted);
  e.encode_time_progression();
  e.encode_reachability();
  e.encode_obstacle_safety();
  e.encode_swarm_stl(lifted);
  e.encode_inter_swarm_safety();
  return e.take();
}

std::vector<Mat> initial_sigmas(const Instance& inst) {
  std::vector<Mat> out;
  for (auto& e : inst.ells) out.push_back(initial_sigma(inst.scenario, e.swarm));
  return out;
}

bool literal_active(const Literal& l, const std::vector<double>& x) {
  if (l.var < 0) return true;
  return l.positive ? x[l.var] > 0.5 : x[l.var] < 0.5;
}

bool row_active(const MarginRow& r, const std::vector<double>& x) {
  for (auto& l : r.lits)
    if (!literal_active(l, x)) return false;
  return true;
}

namespace {

double fixed_terms(const MarginRow& r, const std::vector<Mat>& sigmas) {
  double v = 0.0;
  for (auto& c : r.cones) v += c.coef * sqrt_quad(sigmas[c.ell], c.a);
  for (auto& s : r.spectral) v += s.coef * geom::sqrt_lambda_max(sigmas[s.ell]);
  return v;
}

double min_over_bounds(const Instance& inst, const LinearExpr& e) {
  double v = e.constant;
  for (auto& [c, k] : e.terms) v += k * (k > 0 ? inst.cols[c].lo : inst.cols[c].hi);
  return v;
}

}  // namespace

double row_value(const MarginRow& r, const std::vector<double>& x, const std::vector<Mat>& sigmas) {
  return r.lin.eval(x) + fixed_terms(r, sigmas);
}

double row_big_m(const Instance& inst, const MarginRow& r, const std::vector<Mat>& sigmas) {
  const double Y = big_m_cap(inst.scenario);
  double mn = min_over_bounds(inst, r.lin) + fixed_terms(r, sigmas);
  if (!std::isfinite(mn)) return Y;
  return std::min(std::max(0.0, -mn), Y);
}

lp::Problem build_milp(const Instance& inst, const std::vector<Mat>& sigmas, const std::vector<char>* group_mask,
                       std::vector<int>* binaries) {
  lp::Problem p;
  for (auto& c : inst.cols) p.add_col(c.lo, c.hi, 0.0);
  p.obj[inst.eps_col] = 1.0;
  auto included = [&](int g) { return g < 0 || !group_mask || (*group_mask)[g]; };
  for (auto& r : inst.rows) {
    if (!included(r.group)) continue;
    double cst = r.lin.constant + fixed_terms(r, sigmas);
    std::map<int, double> coef(r.lin.terms.begin(), r.lin.terms.end());
    if (!r.lits.empty()) {
      const double M = row_big_m(inst, r, sigmas);
      for (auto& l : r.lits) {
        if (l.positive) {
          cst += M;
          coef[l.var] -= M;
        } else {
          coef[l.var] += M;
        }
      }
    }
    lp::Coeffs cs;
    for (auto& [c, v] : coef)
      if (v != 0.0) cs.push_back({c, v});
    p.add_row(std::move(cs), -cst, lp::kInf);
  }
  if (binaries) {
    binaries->clear();
    std::vector<char> excluded(inst.cols.size(), 0);
    if (group_mask)
      for (std::size_t g = 0; g < inst.groups.size(); ++g)
        if (!(*group_mask)[g])
          for (int b : inst.groups[g].binaries) excluded[b] = 1;
    for (int j = 0; j < static_cast<int>(inst.cols.size()); ++j)
      if (inst.cols[j].binary && !excluded[j]) binaries->push_back(j);
  }
  return p;
}

namespace {

struct Choice {
  double slack;
  int branch;
};

Choice best_choice(const Instance& inst, const Group& G, std::vector<double>& x, const std::vector<Mat>& sigmas) {
  Choice best{-lp::kInf, -1};
  if (G.kind == Group::Kind::Simple) {
    for (int j = 0; j < static_cast<int>(G.branch_lits.size()); ++j) {
      const Literal& bl = G.branch_lits[j];
      double worst = lp::kInf;
      for (int ri : G.rows) {
        const auto& r = inst.rows[ri];
        if (r.family == Family::Cover) continue;
        bool mine = false;
        for (auto& l : r.lits) mine |= l.var == bl.var && l.positive == bl.positive;
        if (bl.var < 0) mine = true;
        if (mine) worst = std::min(worst, row_value(r, x, sigmas));
      }
      if (worst > best.slack) best = {worst, j};
    }
    return best;
  }
  if (G.row_t1 >= 0) {
    double v = row_value(inst.rows[G.row_t1], x, sigmas);
    if (v > best.slack) best = {v, 0};
  }
  if (G.row_t2 >= 0) {
    double v = row_value(inst.rows[G.row_t2], x, sigmas);
    if (v > best.slack) best = {v, 1};
  }
  for (std::size_t i = 0; i < G.alpha.size(); ++i) {
    double A = G.gap[i].eval(x);
    x[G.alpha[i]] = std::clamp(std::abs(A), -G.alpha_bound, G.alpha_bound);
  }
  double v = row_value(inst.rows[G.row_sp], x, sigmas);
  if (v > best.slack) best = {v, 2};
  return best;
}

}  // namespace

double group_slack(const Instance& inst, int g, const std::vector<double>& x, const std::vector<Mat>& sigmas) {
  std::vector<double> y = x;
  return best_choice(inst, inst.groups[g], y, sigmas).slack;
}

double assign_group(const Instance& inst, int g, std::vector<double>& x, const std::vector<Mat>& sigmas) {
  const Group& G = inst.groups[g];
  Choice c = best_choice(inst, G, x, sigmas);
  for (int b : G.binaries) x[b] = 0.0;
  auto apply = [&](const Literal& l) {
    if (l.var >= 0) x[l.var] = l.positive ? 1.0 : 0.0;
  };
  if (G.kind == Group::Kind::Simple) {
    apply(G.branch_lits[c.branch]);
  } else {
    const Literal& l = c.branch == 0 ? G.lit_t1 : c.branch == 1 ? G.lit_t2 : G.lit_sp;
    apply(l);
    for (std::size_t i = 0; i < G.sign.size(); ++i) x[G.sign[i]] = G.gap[i].eval(x) >= 0 ? 1.0 : 0.0;
  }
  return c.slack;
}

BigMAudit audit_big_m(const Instance& inst, const std::vector<double>& x, const std::vector<Mat>& sigmas,
                      double tol) {
  BigMAudit a;
  for (auto& r : inst.rows) {
    if (!row_active(r, x)) continue;
    a.worst_active_slack = std::min(a.worst_active_slack, row_value(r, x, sigmas));
  }
  for (auto& dj : inst.disjunctions) {
    bool parent = true;
    for (auto& l : dj.parent) parent &= literal_active(l, x);
    if (!parent) continue;
    ++a.disjunctions_checked;
    bool any = false;
    for (auto& l : dj.branches) any |= literal_active(l, x);
    if (!any) ++a.disjunctions_failed;
  }
  a.ok = a.worst_active_slack >= -tol && a.disjunctions_failed == 0;
  return a;
}

namespace {

void write_num(std::ostream& os, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  os << buf;
}

}  // namespace

void write_lp(std::ostream& os, const Instance& inst, const std::vector<Mat>& sigmas) {
  lp::Problem p = build_milp(inst, sigmas);
  auto name = [&](int j) -> const std::string& { return inst.cols[j].name; };
  os << "\\ swarmstl stage-1 instance\nMaximize\n obj: " << name(inst.eps_col) << "\nSubject To\n";
  for (int r = 0; r < p.num_rows(); ++r) {
    os << " r" << r << ":";
    if (p.rows[r].empty()) os << " 0 " << name(inst.eps_col);
    for (auto& [c, v] : p.rows[r]) {
      os << (v < 0 ? " - " : " + ");
      write_num(os, std::abs(v));
      os << " " << name(c);
    }
    os << " >= ";
    write_num(os, p.row_lo[r]);
    os << "\n";
  }
  os << "Bounds\n";
  for (int j = 0; j < p.num_cols(); ++j) {
    if (inst.cols[j].binary) continue;
    os << " ";
    if (std::isinf(p.col_lo[j])) os << "-inf";
    else write_num(os, p.col_lo[j]);
    os << " <= " << name(j) << " <= ";
    if (std::isinf(p.col_hi[j])) os << "+inf";
    else write_num(os, p.col_hi[j]);
    os << "\n";
  }
  os << "Binaries\n";
  for (int j : inst.binaries()) os << " " << name(j) << "\n";
  os << "End\n";
}

std::vector<double> encode_volume(const Instance& inst, const std::vector<int>& var_ells) {
  const auto& sc = inst.scenario;
  std::vector<double> out;
  for (int e : var_ells) {
    const int s = inst.ells[e].swarm;
    out.push_back(geom::volume_rhs(sc.constants.xi, sc.swarms[s].size(), sc.constants.zeta, sc.dimension));
  }
  return out;
}

EllipsoidProblem build_ellipsoid_problem(const Instance& inst, const std::vector<double>& x,
                                         const std::vector<Mat>& sigmas) {
  const auto& sc = inst.scenario;
  EllipsoidProblem ep;
  ep.dim = sc.dimension;
  std::vector<int> var_of(inst.ells.size(), -1);
  double smax = 0.0;
  for (int e = 0; e < static_cast<int>(inst.ells.size()); ++e) {
    if (inst.ells[e].k == 0) continue;
    var_of[e] = static_cast<int>(ep.var_ells.size());
    ep.var_ells.push_back(e);
    ep.sigma_start.push_back(sigmas[e]);
    smax = std::max(smax, geom::sqrt_lambda_max(sigmas[e]));
  }
  for (auto& r : inst.rows) {
    if (!row_active(r, x)) continue;
    EllipsoidProblem::Row row;
    auto it = r.lin.terms.find(inst.eps_col);
    row.e = it == r.lin.terms.end() ? 0.0 : it->second;
    row.c = r.lin.eval(x) - row.e * x[inst.eps_col];
    for (auto& c : r.cones) {
      if (var_of[c.ell] < 0) row.c += c.coef * sqrt_quad(sigmas[c.ell], c.a);
      else row.cones.push_back({var_of[c.ell], c.a, c.coef});
    }
    for (auto& s : r.spectral) {
      if (var_of[s.ell] < 0) row.c += s.coef * geom::sqrt_lambda_max(sigmas[s.ell]);
      else row.spectral.push_back({var_of[s.ell], s.coef});
    }
    if (row.e == 0.0 && row.cones.empty() && row.spectral.empty()) continue;
    ep.rows.push_back(std::move(row));
  }
  ep.volume_rhs = encode_volume(inst, ep.var_ells);
  for (int s = 0; s < static_cast<int>(sc.swarms.size()); ++s) {
    const auto& sw = sc.swarms[s];
    if (sw.size() < 2 || sw.segments == 0) continue;
    Mat w = geom::inv_sqrtm(sigmas[inst.ell_id[s][0]]);
    for (int i = 0; i < sw.size(); ++i)
      for (int j = i + 1; j < sw.size(); ++j) {
        Vec dp = sw.agents[i].p - sw.agents[j].p;
        Vec q = w * dp;
        double theta = std::min(sc.constants.zeta, (1 - 1e-9) * dp.norm());
        for (int k = 1; k <= sw.segments; ++k) ep.spacing.push_back({var_of[inst.ell_id[s][k]], q, theta});
      }
  }
  ep.eps_cap = inst.params.eps_cap;
  ep.s_max = std::max(inst.params.eps_cap, 2.0 * smax);
  return ep;
}

}  // namespace swarmstl::enc
