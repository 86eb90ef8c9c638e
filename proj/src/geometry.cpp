#include "pel/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <queue>
#include <sstream>

#include <nlohmann/json.hpp>

namespace pel {

namespace {

double point_segment_distance(const Vec& p, const Segment& s) {
  const Vec d = s.b - s.a;
  const double len2 = d.squaredNorm();
  if (len2 == 0.0) return (p - s.a).norm();
  const double t = std::clamp((p - s.a).dot(d) / len2, 0.0, 1.0);
  return (p - (s.a + t * d)).norm();
}

bool point_in_polygon(const std::vector<Vec>& poly, const Vec& p) {
  bool in = false;
  const std::size_t n = poly.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Vec& a = poly[j];
    const Vec& b = poly[i];
    if ((b.y() > p.y()) != (a.y() > p.y())) {
      const double xint = b.x() + (p.y() - b.y()) * (a.x() - b.x()) / (a.y() - b.y());
      if (p.x() < xint) in = !in;
    }
  }
  return in;
}

std::vector<Vec> make_polygon(const std::string& preset, const DomainParams& prm) {
  std::vector<Vec> poly;
  if (preset == "square") {
    const double s = prm.side;
    poly = {Vec(0, 0, 0), Vec(s, 0, 0), Vec(s, s, 0), Vec(0, s, 0)};
  } else if (preset == "l_shape") {
    // Unit square minus its lower-left quadrant; reentrant corner at (1/2, 1/2).
    const double s = prm.side, m = prm.side / 2.0;
    poly = {Vec(m, 0, 0), Vec(s, 0, 0), Vec(s, s, 0),
            Vec(0, s, 0), Vec(0, m, 0), Vec(m, m, 0)};
  } else if (preset == "lipschitz_graph" || preset == "sawtooth") {
    const double slope = (preset == "sawtooth") ? 1.0 : prm.slope;
    const double period = (preset == "sawtooth") ? 0.25 : prm.period;
    const double amp = slope * period / 2.0;
    if (amp >= 1.0) throw ConfigError("lipschitz_graph: tooth amplitude >= 1");
    const int teeth = static_cast<int>(std::lround(1.0 / period));
    if (std::abs(teeth * period - 1.0) > 1e-12)
      throw ConfigError("lipschitz_graph: period must divide the unit extent");
    poly.push_back(Vec(0, 0, 0));
    for (int t = 0; t < teeth; ++t) {
      poly.push_back(Vec((t + 0.5) * period, amp, 0));
      poly.push_back(Vec((t + 1.0) * period, 0, 0));
    }
    poly.push_back(Vec(1, 1, 0));
    poly.push_back(Vec(0, 1, 0));
  } else {
    throw ConfigError("unknown domain preset: " + preset);
  }
  return poly;
}

}  // namespace

DiscreteDomain DiscreteDomain::build(const std::string& preset,
                                     const DomainParams& params, double h) {
  DiscreteDomain dom;
  dom.h_ = h;
  dom.preset_ = preset;
  if (h <= 0) throw ConfigError("build_domain: h must be positive");

  if (preset == "cube") {
    dom.dim_ = 3;
    dom.is_box_ = true;
    dom.box_lo_ = Vec::Zero();
    dom.box_hi_ = Vec(params.side, params.side, params.side);
  } else {
    dom.dim_ = 2;
    dom.polygon_ = make_polygon(preset, params);
    const std::size_t n = dom.polygon_.size();
    for (std::size_t i = 0; i < n; ++i)
      dom.segments_.push_back({dom.polygon_[i], dom.polygon_[(i + 1) % n]});
    dom.box_lo_ = Vec(1e300, 1e300, 0);
    dom.box_hi_ = Vec(-1e300, -1e300, 0);
    for (const auto& v : dom.polygon_) {
      dom.box_lo_ = dom.box_lo_.cwiseMin(v);
      dom.box_hi_ = dom.box_hi_.cwiseMax(v);
    }
  }
  dom.diameter_ = (dom.box_hi_ - dom.box_lo_).norm();
  dom.origin_ = dom.box_lo_;

  for (int axis = 0; axis < dom.dim_; ++axis) {
    const double extent = dom.box_hi_[axis] - dom.box_lo_[axis];
    const int n = static_cast<int>(std::lround(extent / h));
    if (std::abs(n * h - extent) > 1e-9 * std::max(extent, 1.0))
      throw ConfigError("build_domain: h must divide the domain extent");
    if (n < 4) throw ConfigError("build_domain: h too coarse (< 4 cells across)");
    dom.nsub_[axis] = n;
  }

  // Boundary faces carry exact polygonal measure: segments are subdivided
  // into equal pieces of length <= h; box faces into h x h squares.
  if (dom.is_box_) {
    const double s = params.side;
    const int n = dom.nsub_[0];
    auto emit_face = [&](int fixed_axis, double fixed_val) {
      const int a0 = (fixed_axis + 1) % 3, a1 = (fixed_axis + 2) % 3;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          Vec c = Vec::Zero();
          c[fixed_axis] = fixed_val;
          c[a0] = (i + 0.5) * h;
          c[a1] = (j + 0.5) * h;
          dom.faces_.push_back({c, h * h});
        }
    };
    for (int axis = 0; axis < 3; ++axis) {
      emit_face(axis, 0.0);
      emit_face(axis, s);
    }
  } else {
    for (const auto& seg : dom.segments_) {
      const double len = (seg.b - seg.a).norm();
      const int pieces = std::max(1, static_cast<int>(std::ceil(len / h - 1e-12)));
      for (int k = 0; k < pieces; ++k) {
        const double t = (k + 0.5) / pieces;
        dom.faces_.push_back({seg.a + t * (seg.b - seg.a), len / pieces});
      }
    }
  }

  const int nz = (dom.dim_ == 3) ? dom.nsub_[2] : 1;
  dom.grid_cells_.assign(static_cast<std::size_t>(dom.nsub_[0]) * dom.nsub_[1] * nz, -1);
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < dom.nsub_[1]; ++j)
      for (int i = 0; i < dom.nsub_[0]; ++i) {
        Vec c = dom.origin_ + h * Vec(i + 0.5, j + 0.5, dom.dim_ == 3 ? k + 0.5 : 0.0);
        if (dom.dim_ == 2) c.z() = 0.0;
        if (!dom.inside(c)) continue;
        const double d = dom.boundary_distance(c);
        if (d <= 1e-12) continue;
        const std::size_t flat =
            static_cast<std::size_t>(i) +
            static_cast<std::size_t>(dom.nsub_[0]) * (j + static_cast<std::size_t>(dom.nsub_[1]) * k);
        dom.grid_cells_[flat] = static_cast<int>(dom.cells_.size());
        dom.cells_.push_back({c, std::pow(h, dom.dim_), d});
      }
  if (dom.cells_.empty()) throw ConfigError("build_domain: no interior cells");
  return dom;
}

bool DiscreteDomain::inside(const Vec& x) const {
  if (is_box_) {
    for (int a = 0; a < 3; ++a)
      if (!(x[a] > box_lo_[a] && x[a] < box_hi_[a])) return false;
    return true;
  }
  return point_in_polygon(polygon_, x);
}

double DiscreteDomain::boundary_distance(const Vec& x) const {
  if (is_box_) {
    if (inside(x)) {
      double d = 1e300;
      for (int a = 0; a < 3; ++a)
        d = std::min({d, x[a] - box_lo_[a], box_hi_[a] - x[a]});
      return d;
    }
    Vec out = Vec::Zero();
    for (int a = 0; a < 3; ++a)
      out[a] = std::max({box_lo_[a] - x[a], 0.0, x[a] - box_hi_[a]});
    return out.norm();
  }
  double d = 1e300;
  for (const auto& s : segments_) d = std::min(d, point_segment_distance(x, s));
  return d;
}

double DiscreteDomain::delta(const Vec& x) const {
  if (!inside(x)) throw std::domain_error("delta: point outside the domain");
  return boundary_distance(x);
}

double DiscreteDomain::boundary_measure() const {
  double s = 0.0;
  for (const auto& f : faces_) s += f.weight;
  return s;
}

double DiscreteDomain::surface_measure(const Vec& q, double r) const {
  double s = 0.0;
  const double r2 = r * r;
  for (const auto& f : faces_)
    if ((f.centroid - q).squaredNorm() < r2) s += f.weight;
  return s;
}

SurfaceBall DiscreteDomain::surface_ball(const Vec& q, double r) const {
  SurfaceBall ball;
  ball.center = q;
  ball.radius = r;
  const double r2 = r * r;
  for (int i = 0; i < static_cast<int>(faces_.size()); ++i)
    if ((faces_[i].centroid - q).squaredNorm() < r2) ball.faces.push_back(i);
  return ball;
}

std::vector<double> DiscreteDomain::dyadic_scales() const {
  std::vector<double> scales;
  for (double r = 4.0 * h_; r <= diameter_ / 2.0 + 1e-12; r *= 2.0) scales.push_back(r);
  return scales;
}

int DiscreteDomain::cell_at(const Vec& x) const {
  int idx[3] = {0, 0, 0};
  for (int a = 0; a < dim_; ++a) {
    idx[a] = static_cast<int>(std::floor((x[a] - origin_[a]) / h_));
    if (idx[a] < 0 || idx[a] >= nsub_[a]) return -1;
  }
  const std::size_t flat =
      static_cast<std::size_t>(idx[0]) +
      static_cast<std::size_t>(nsub_[0]) * (idx[1] + static_cast<std::size_t>(nsub_[1]) * idx[2]);
  return grid_cells_[flat];
}

int DiscreteDomain::cell_grid_index(int cell, int axis) const {
  const Vec& c = cells_[cell].center;
  return static_cast<int>(std::floor((c[axis] - origin_[axis]) / h_));
}

void DiscreteDomain::export_boundary_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  if (is_box_) {
    out << "# cube faces as corner triples: x1,y1,z1,x2,y2,z2,x3,y3,z3\n";
    // Two triangles per box face.
    const double s = box_hi_[0];
    const Vec corners[8] = {Vec(0, 0, 0), Vec(s, 0, 0), Vec(s, s, 0), Vec(0, s, 0),
                            Vec(0, 0, s), Vec(s, 0, s), Vec(s, s, s), Vec(0, s, s)};
    const int quads[6][4] = {{0, 1, 2, 3}, {4, 5, 6, 7}, {0, 1, 5, 4},
                             {2, 3, 7, 6}, {1, 2, 6, 5}, {3, 0, 4, 7}};
    for (const auto& q : quads) {
      const int tris[2][3] = {{q[0], q[1], q[2]}, {q[0], q[2], q[3]}};
      for (const auto& t : tris) {
        for (int k = 0; k < 3; ++k) {
          const Vec& v = corners[t[k]];
          out << v.x() << ',' << v.y() << ',' << v.z();
          out << (k == 2 ? '\n' : ',');
        }
      }
    }
  } else {
    out << "# boundary segments: x1,y1,x2,y2\n";
    for (const auto& s : segments_)
      out << s.a.x() << ',' << s.a.y() << ',' << s.b.x() << ',' << s.b.y() << '\n';
  }
}

Region standard_cone(const DiscreteDomain& domain, const Vec& q, double a) {
  Region reg;
  reg.kind = RegionKind::standard_cone;
  reg.q = q;
  reg.aperture = a;
  const auto& cells = domain.cells();
  for (int i = 0; i < static_cast<int>(cells.size()); ++i)
    if ((cells[i].center - q).norm() < (1.0 + a) * cells[i].delta)
      reg.cells.push_back(i);
  reg.degenerate = reg.cells.empty();
  return reg;
}

bool in_modified_cone(const DiscreteDomain& domain, int cell, const Vec& q, double a) {
  const Cell& c = domain.cells()[cell];
  const double reach = (1.0 + a) * c.delta;
  const double near = a * c.delta;
  // Cheap bracket: Q0 = nearest face to Q works whenever |y-Q| < (1+a)delta(y)
  // and |Q - Q0| < a delta(y); the full scan only runs in the annulus.
  for (const auto& f : domain.faces()) {
    if ((c.center - f.centroid).norm() < reach && (q - f.centroid).norm() < near)
      return true;
  }
  return false;
}

Region modified_cone(const DiscreteDomain& domain, const Vec& q, double a) {
  Region reg;
  reg.kind = RegionKind::modified_cone;
  reg.q = q;
  reg.aperture = a;
  for (int i = 0; i < static_cast<int>(domain.cells().size()); ++i)
    if (in_modified_cone(domain, i, q, a)) reg.cells.push_back(i);
  reg.degenerate = reg.cells.empty();
  return reg;
}

Region carleson_region(const DiscreteDomain& domain, const SurfaceBall& ball) {
  Region reg;
  reg.kind = RegionKind::carleson;
  reg.q = ball.center;
  reg.radius = ball.radius;
  const auto& cells = domain.cells();
  const double r2 = ball.radius * ball.radius;
  for (int i = 0; i < static_cast<int>(cells.size()); ++i)
    if ((cells[i].center - ball.center).squaredNorm() < r2) reg.cells.push_back(i);
  reg.degenerate = reg.cells.size() <= 1;
  return reg;
}

std::vector<HarnackChainBall> harnack_chain(const DiscreteDomain& domain, int cell_from,
                                            int cell_to) {
  const auto& cells = domain.cells();
  const int n = static_cast<int>(cells.size());
  if (cell_from < 0 || cell_to < 0 || cell_from >= n || cell_to >= n) return {};

  // Bottleneck-widest path on the face-neighbor cell graph.
  std::vector<double> width(n, -1.0);
  std::vector<int> prev(n, -1);
  std::priority_queue<std::pair<double, int>> pq;
  width[cell_from] = cells[cell_from].delta;
  pq.emplace(width[cell_from], cell_from);
  while (!pq.empty()) {
    auto [w, u] = pq.top();
    pq.pop();
    if (w < width[u]) continue;
    if (u == cell_to) break;
    for (int axis = 0; axis < domain.dim(); ++axis)
      for (int dir = -1; dir <= 1; dir += 2) {
        Vec p = cells[u].center;
        p[axis] += dir * domain.h();
        const int v = domain.cell_at(p);
        if (v < 0) continue;
        const double wv = std::min(w, cells[v].delta);
        if (wv > width[v]) {
          width[v] = wv;
          prev[v] = u;
          pq.emplace(wv, v);
        }
      }
  }
  if (width[cell_to] < 0.0) return {};

  std::vector<int> path;
  for (int u = cell_to; u != -1; u = prev[u]) path.push_back(u);
  std::reverse(path.begin(), path.end());

  // Greedy cover: each ball has radius delta(center)/2; skip ahead to the
  // farthest path point whose ball still overlaps the current one.
  std::vector<HarnackChainBall> chain;
  std::size_t i = 0;
  chain.push_back({cells[path[i]].center, cells[path[i]].delta / 2.0});
  while (i + 1 < path.size()) {
    std::size_t j = i + 1;
    std::size_t best = 0;
    for (std::size_t k = i + 1; k < path.size(); ++k) {
      const double gap = (cells[path[k]].center - cells[path[i]].center).norm();
      if (gap < (cells[path[i]].delta + cells[path[k]].delta) / 2.0) best = k;
    }
    if (best == 0) return {};  // no overlapping continuation
    j = best;
    chain.push_back({cells[path[j]].center, cells[path[j]].delta / 2.0});
    i = j;
  }
  return chain;
}

ChordArcCertificate certify(const DiscreteDomain& domain,
                            const std::vector<double>& scales) {
  ChordArcCertificate cert;
  cert.scales_tested = scales;
  cert.ok = true;
  const int n = domain.dim();
  const double h = domain.h();
  double adr_min = 1e300, adr_max = 0.0;
  double int_c = 1e300, ext_c = 1e300;

  for (double r : scales) {
    if (!(r > 4.0 * h - 1e-12) || r >= domain.diameter()) {
      cert.ok = false;
      cert.failure = "scale outside (4h, diam)";
      continue;
    }
    for (const auto& f : domain.faces()) {
      const Vec q = f.centroid;
      const double sigma = domain.surface_measure(q, r);
      const double ratio = sigma / std::pow(r, n - 1);
      adr_min = std::min(adr_min, ratio);
      adr_max = std::max(adr_max, ratio);

      // Interior corkscrew: the deepest cell that still fits a c*r ball
      // inside B(Q, r).
      double best_in = 0.0;
      for (const auto& c : domain.cells()) {
        const double dq = (c.center - q).norm();
        if (dq >= r) continue;
        best_in = std::max(best_in, std::min(c.delta, r - dq) / r);
      }
      // Exterior corkscrew: grid sample of B(Q, r) outside the closure.
      double best_ex = 0.0;
      const int m = static_cast<int>(std::ceil(r / h));
      int idx[3] = {0, 0, 0};
      const int kmax = (n == 3) ? 2 * m : 1;
      for (int i = 0; i < 2 * m; ++i)
        for (int j = 0; j < 2 * m; ++j)
          for (int k = 0; k < kmax; ++k) {
            idx[0] = i;
            idx[1] = j;
            idx[2] = k;
            Vec p = q;
            for (int a2 = 0; a2 < n; ++a2) p[a2] += (idx[a2] - m + 0.5) * h;
            const double dq = (p - q).norm();
            if (dq >= r) continue;
            if (domain.inside(p)) continue;
            const double bd = domain.boundary_distance(p);
            if (bd <= 0.0) continue;
            best_ex = std::max(best_ex, std::min(bd, r - dq) / r);
          }
      if (best_in <= 0.0 || best_ex <= 0.0) {
        cert.ok = false;
        cert.failure = "no corkscrew point at some (Q, r)";
      }
      int_c = std::min(int_c, best_in);
      ext_c = std::min(ext_c, best_ex);
    }
  }
  cert.adr_constant = std::max(adr_max, adr_min > 0.0 ? 1.0 / adr_min : 1e300);
  cert.interior_corkscrew_c = (int_c == 1e300) ? 0.0 : int_c;
  cert.exterior_corkscrew_c = (ext_c == 1e300) ? 0.0 : ext_c;

  // Harnack chains: deterministic pair sample per (Lambda, rho).
  double comp = 0.0;
  for (int lambda : {1, 2, 4, 8}) {
    int worstN = 0;
    for (double rho : scales) {
      std::vector<int> deep;
      for (int i = 0; i < static_cast<int>(domain.cells().size()); ++i)
        if (domain.cells()[i].delta >= rho) deep.push_back(i);
      if (deep.size() < 2) continue;
      const int pairs = 6;
      for (int s = 0; s < pairs; ++s) {
        const int ia = static_cast<int>((deep.size() - 1) * s / pairs);
        const int ib = static_cast<int>(deep.size() - 1 - ia / 2);
        const int ca = deep[ia], cb = deep[ib];
        if (ca == cb) continue;
        if ((domain.cells()[ca].center - domain.cells()[cb].center).norm() > lambda * rho)
          continue;
        const auto chain = harnack_chain(domain, ca, cb);
        if (chain.empty()) {
          cert.ok = false;
          cert.failure = "no Harnack chain for a sampled pair";
          continue;
        }
        worstN = std::max(worstN, static_cast<int>(chain.size()));
        for (const auto& b : chain) {
          const double dist = domain.boundary_distance(b.center) - b.radius;
          const double diam = 2.0 * b.radius;
          if (dist <= 0.0) {
            cert.ok = false;
            cert.failure = "Harnack ball touches the boundary";
            continue;
          }
          comp = std::max({comp, diam / dist, dist / diam});
        }
      }
    }
    cert.harnack_N[lambda] = worstN;
  }
  cert.harnack_comparability = comp;
  return cert;
}

double check_prop_size(const DiscreteDomain& domain, const Vec& q, double d, int cell,
                       double a) {
  const Cell& y = domain.cells().at(cell);
  if (!(y.delta > d)) throw std::domain_error("check_prop_size: requires delta(y) > d");
  bool attached = false;
  for (const auto& f : domain.faces())
    if ((f.centroid - q).norm() < d && in_modified_cone(domain, cell, f.centroid, a)) {
      attached = true;
      break;
    }
  if (!attached)
    throw std::domain_error("check_prop_size: y not in Gamma_a(Q) for any Q in Delta");

  double hits = 0.0, total = 0.0;
  const double two_d = 2.0 * d;
  for (const auto& f : domain.faces()) {
    if ((f.centroid - q).norm() >= two_d) continue;
    total += f.weight;
    if (in_modified_cone(domain, cell, f.centroid, a)) hits += f.weight;
  }
  if (total <= 0.0) throw std::domain_error("check_prop_size: empty 2*Delta");
  return hits / total;
}

std::string ChordArcCertificate::to_json() const {
  nlohmann::json j;
  j["ok"] = ok;
  if (!ok) j["failure"] = failure;
  j["adr_constant"] = adr_constant;
  j["interior_corkscrew_c"] = interior_corkscrew_c;
  j["exterior_corkscrew_c"] = exterior_corkscrew_c;
  j["harnack_comparability"] = harnack_comparability;
  nlohmann::json hn = nlohmann::json::object();
  for (const auto& [lambda, N] : harnack_N) hn[std::to_string(lambda)] = N;
  j["harnack_N"] = hn;
  j["scales_tested"] = scales_tested;
  return j.dump(2);
}

}  // namespace pel
