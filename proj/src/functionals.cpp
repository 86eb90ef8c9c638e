#include "pel/functionals.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace pel {

ConeGeometry::ConeGeometry(const DiscreteDomain& domain, double a)
    : domain_(&domain), a_(a) {
  if (!(a > 0.0)) throw std::domain_error("ConeGeometry: aperture must be positive");
  const auto& faces = domain.faces();
  const int nf = static_cast<int>(faces.size());
  neighbors_.resize(nf);
  for (int i = 0; i < nf; ++i) {
    auto& lst = neighbors_[i];
    lst.reserve(nf);
    for (int j = 0; j < nf; ++j)
      lst.emplace_back((faces[i].centroid - faces[j].centroid).norm(), j);
    std::sort(lst.begin(), lst.end());
  }
  mark_.assign(nf, -1);
}

bool ConeGeometry::member(int cell, int face) const {
  return in_modified_cone(*domain_, cell, domain_->faces()[face].centroid, a_);
}

void ConeGeometry::for_each_member_face(int cell,
                                        const std::function<void(int)>& fn) const {
  const auto& faces = domain_->faces();
  const int nf = static_cast<int>(faces.size());
  const Cell& y = domain_->cells()[cell];
  const double reach = (1.0 + a_) * y.delta;
  const double near_r = a_ * y.delta;
  ++epoch_;
  int marked = 0;

  // Faces inside the primary reach are members outright (Q0 = Q) and are the
  // witnesses Q0 for the dilation pass.
  std::vector<int> witnesses;
  for (int f = 0; f < nf; ++f)
    if ((faces[f].centroid - y.center).norm() < reach) {
      witnesses.push_back(f);
      if (mark_[f] != epoch_) {
        mark_[f] = epoch_;
        ++marked;
        fn(f);
      }
    }
  for (int f0 : witnesses) {
    if (marked == nf) break;
    for (const auto& [dist, g] : neighbors_[f0]) {
      if (dist >= near_r) break;
      if (mark_[g] != epoch_) {
        mark_[g] = epoch_;
        ++marked;
        fn(g);
      }
    }
  }
}

namespace {

// Row-prefix-sum tables over the cell grid for fast disc sums.
struct PrefixGrid {
  const DiscreteDomain* domain;
  int nx, ny, nz;
  std::vector<double> value;  // prefix along x of per-cell payload
  std::vector<double> count;  // prefix along x of cell indicator

  PrefixGrid(const DiscreteDomain& dom, const std::vector<double>& payload)
      : domain(&dom),
        nx(dom.grid_extent(0)),
        ny(dom.grid_extent(1)),
        nz(dom.dim() == 3 ? dom.grid_extent(2) : 1) {
    value.assign(static_cast<std::size_t>(nx + 1) * ny * nz, 0.0);
    count.assign(value.size(), 0.0);
    std::vector<double> row_v(nx), row_c(nx);
    for (int k = 0; k < nz; ++k)
      for (int j = 0; j < ny; ++j) {
        std::fill(row_v.begin(), row_v.end(), 0.0);
        std::fill(row_c.begin(), row_c.end(), 0.0);
        for (int i = 0; i < nx; ++i) {
          Vec p = dom.grid_origin() +
                  dom.h() * Vec(i + 0.5, j + 0.5, dom.dim() == 3 ? k + 0.5 : 0.0);
          if (dom.dim() == 2) p.z() = 0.0;
          const int c = dom.cell_at(p);
          if (c >= 0) {
            row_v[i] = payload[c];
            row_c[i] = 1.0;
          }
        }
        const std::size_t base = static_cast<std::size_t>(nx + 1) * (j + static_cast<std::size_t>(ny) * k);
        for (int i = 0; i < nx; ++i) {
          value[base + i + 1] = value[base + i] + row_v[i];
          count[base + i + 1] = count[base + i] + row_c[i];
        }
      }
  }

  // Sum of payload over cells with center in the open ball B(center, r).
  void ball_sum(const Vec& center, double r, double& sum, double& n) const {
    sum = 0.0;
    n = 0.0;
    const double h = domain->h();
    const Vec o = domain->grid_origin();
    const double r2 = r * r;
    const int klo = (nz == 1) ? 0 : std::max(0, static_cast<int>(std::floor((center.z() - r - o.z()) / h - 0.5)));
    const int khi = (nz == 1) ? 0 : std::min(nz - 1, static_cast<int>(std::ceil((center.z() + r - o.z()) / h - 0.5)));
    for (int k = klo; k <= khi; ++k) {
      const double dz = (nz == 1) ? 0.0 : o.z() + (k + 0.5) * h - center.z();
      for (int j = std::max(0, static_cast<int>(std::floor((center.y() - r - o.y()) / h - 0.5)));
           j <= std::min(ny - 1, static_cast<int>(std::ceil((center.y() + r - o.y()) / h - 0.5))); ++j) {
        const double dy = o.y() + (j + 0.5) * h - center.y();
        const double rem = r2 - dy * dy - dz * dz;
        if (rem <= 0.0) continue;
        const double half = std::sqrt(rem);
        // Centers with |x - cx| < half, strict.
        int ilo = static_cast<int>(std::ceil((center.x() - half - o.x()) / h - 0.5));
        int ihi = static_cast<int>(std::floor((center.x() + half - o.x()) / h - 0.5));
        // Guard the open-ball boundary.
        while (ilo <= ihi) {
          const double dx = o.x() + (ilo + 0.5) * h - center.x();
          if (dx * dx < rem) break;
          ++ilo;
        }
        while (ihi >= ilo) {
          const double dx = o.x() + (ihi + 0.5) * h - center.x();
          if (dx * dx < rem) break;
          --ihi;
        }
        if (ilo > ihi) continue;
        ilo = std::max(ilo, 0);
        ihi = std::min(ihi, nx - 1);
        if (ilo > ihi) continue;
        const std::size_t base = static_cast<std::size_t>(nx + 1) * (j + static_cast<std::size_t>(ny) * k);
        sum += value[base + ihi + 1] - value[base + ilo];
        n += count[base + ihi + 1] - count[base + ilo];
      }
    }
  }
};

}  // namespace

std::vector<double> local_averages(const DiscreteDomain& domain, const SolutionField& u,
                                   double p) {
  if (!(p > 0.0)) throw std::domain_error("local_average: p must be positive");
  const int nc = static_cast<int>(domain.cells().size());
  std::vector<double> payload(nc);
  for (int c = 0; c < nc; ++c) payload[c] = std::pow(std::abs(u.cell_value[c]), p);
  const PrefixGrid grid(domain, payload);
  std::vector<double> out(nc, 0.0);
  for (int c = 0; c < nc; ++c) {
    const Cell& cell = domain.cells()[c];
    double sum = 0.0, n = 0.0;
    grid.ball_sum(cell.center, cell.delta / 2.0, sum, n);
    if (n <= 0.0)
      throw DegenerateInput("local_average: ball contains no cell center");
    out[c] = std::pow(sum / n, 1.0 / p);
  }
  return out;
}

double local_average(const DiscreteDomain& domain, const SolutionField& u, int cell,
                     double p) {
  if (!(p > 0.0)) throw std::domain_error("local_average: p must be positive");
  const Cell& c0 = domain.cells().at(cell);
  const double r = c0.delta / 2.0;
  double sum = 0.0, vol = 0.0;
  for (const auto& c : domain.cells())
    if ((c.center - c0.center).norm() < r) {
      sum += c.volume * std::pow(std::abs(u.cell_value[&c - domain.cells().data()]), p);
      vol += c.volume;
    }
  if (vol <= 0.0) throw DegenerateInput("local_average: ball contains no cell center");
  return std::pow(sum / vol, 1.0 / p);
}

namespace {

NTReport ntmax_filtered(const ConeGeometry& cones, const SolutionField& u, double p,
                        const std::function<bool(const Cell&)>& keep) {
  const auto& domain = cones.domain();
  const int nf = static_cast<int>(domain.faces().size());
  NTReport rep;
  rep.p = p;
  rep.aperture = cones.aperture();
  rep.values.assign(nf, std::numeric_limits<double>::quiet_NaN());
  rep.missing.assign(nf, 1);

  const std::vector<double> wp = local_averages(domain, u, p);
  std::vector<int> order;
  order.reserve(domain.cells().size());
  for (int c = 0; c < static_cast<int>(domain.cells().size()); ++c)
    if (keep(domain.cells()[c])) order.push_back(c);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return wp[a] > wp[b]; });

  // Descending sweep: the first member cell a face sees carries its sup.
  int remaining = nf;
  for (int c : order) {
    if (remaining == 0) break;
    cones.for_each_member_face(c, [&](int f) {
      if (rep.missing[f]) {
        rep.missing[f] = 0;
        rep.values[f] = wp[c];
        --remaining;
      }
    });
  }
  rep.missing_count = remaining;
  return rep;
}

}  // namespace

NTReport ntmax(const ConeGeometry& cones, const SolutionField& u, double p) {
  return ntmax_filtered(cones, u, p, [](const Cell&) { return true; });
}

std::pair<NTReport, NTReport> ntmax_split(const ConeGeometry& cones,
                                          const SolutionField& u, double p, double d) {
  auto m1 = ntmax_filtered(cones, u, p, [d](const Cell& c) { return c.delta <= d; });
  auto m2 = ntmax_filtered(cones, u, p, [d](const Cell& c) { return c.delta > d; });
  m1.truncation = d;
  m2.truncation = d;
  return {std::move(m1), std::move(m2)};
}

double square_function(const ConeGeometry& cones, const SolutionField& v, int face,
                       double d) {
  const auto& domain = cones.domain();
  const Vec p = domain.faces().at(face).centroid;
  const int n = domain.dim();
  double acc = 0.0;
  bool any = false;
  for (int c = 0; c < static_cast<int>(domain.cells().size()); ++c) {
    const Cell& cell = domain.cells()[c];
    if ((cell.center - p).norm() >= 2.0 * d) continue;
    if (!cones.member(c, face)) continue;
    any = true;
    acc += v.gradient[c].squaredNorm() * std::pow(cell.delta, 1 - n) * cell.volume;
  }
  if (!any) return std::numeric_limits<double>::quiet_NaN();
  return std::sqrt(acc / d);
}

SquareFunctionReport square_function_all(const ConeGeometry& cones,
                                         const SolutionField& v, double d) {
  const auto& domain = cones.domain();
  SquareFunctionReport rep;
  rep.aperture = cones.aperture();
  rep.scale = d;
  const int nf = static_cast<int>(domain.faces().size());
  rep.values.assign(nf, std::numeric_limits<double>::quiet_NaN());
  rep.missing.assign(nf, 1);

  const int n = domain.dim();
  std::vector<double> acc(nf, 0.0);
  std::vector<char> any(nf, 0);
  // One pass over cells, scattering into member faces within the truncation.
  for (int c = 0; c < static_cast<int>(domain.cells().size()); ++c) {
    const Cell& cell = domain.cells()[c];
    const double contrib =
        v.gradient[c].squaredNorm() * std::pow(cell.delta, 1 - n) * cell.volume;
    cones.for_each_member_face(c, [&](int f) {
      if ((cell.center - domain.faces()[f].centroid).norm() < 2.0 * d) {
        acc[f] += contrib;
        any[f] = 1;
      }
    });
  }
  for (int f = 0; f < nf; ++f)
    if (any[f]) {
      rep.values[f] = std::sqrt(acc[f] / d);
      rep.missing[f] = 0;
    } else {
      ++rep.missing_count;
    }
  return rep;
}

SolutionField power_transform(const DiscreteDomain& domain, const Mesh& mesh,
                              const SolutionField& u, double s) {
  (void)mesh;
  const double alpha = s / 2.0 - 1.0;
  auto transform = [alpha](Complex z) -> Complex {
    const double m = std::abs(z);
    if (m == 0.0) return Complex(0.0);
    return std::pow(m, alpha) * z;
  };
  SolutionField v;
  v.residual = u.residual;
  v.nodal.resize(u.nodal.size());
  for (std::size_t i = 0; i < u.nodal.size(); ++i) v.nodal[i] = transform(u.nodal[i]);
  const int nc = static_cast<int>(domain.cells().size());
  v.cell_value.resize(nc);
  v.gradient.assign(nc, Eigen::Vector3cd::Zero());
  for (int c = 0; c < nc; ++c) {
    const Complex uc = u.cell_value[c];
    v.cell_value[c] = transform(uc);
    const double m = std::abs(uc);
    if (m <= 1e-300) continue;  // floored convention at zeros of u
    // grad(|u|^alpha u) = |u|^alpha grad u + alpha |u|^{alpha-2} u Re(conj(u) grad u)
    const Eigen::Vector3cd g = u.gradient[c];
    Eigen::Vector3d re_part;
    for (int k = 0; k < 3; ++k) re_part[k] = (std::conj(uc) * g[k]).real();
    v.gradient[c] = std::pow(m, alpha) * g +
                    alpha * std::pow(m, alpha - 2.0) * uc * re_part.cast<Complex>();
  }
  return v;
}

double boundary_lp_norm(const DiscreteDomain& domain, const std::vector<double>& g,
                        double p, const std::vector<char>* missing) {
  if (!(p > 0.0)) throw std::domain_error("boundary_lp_norm: p must be positive");
  double acc = 0.0;
  for (std::size_t f = 0; f < domain.faces().size(); ++f) {
    if (missing && (*missing)[f]) continue;
    acc += domain.faces()[f].weight * std::pow(std::abs(g[f]), p);
  }
  return std::pow(acc, 1.0 / p);
}

std::vector<double> face_values(const DiscreteDomain& domain, const BoundaryData& data) {
  std::vector<double> out(domain.faces().size());
  for (std::size_t f = 0; f < domain.faces().size(); ++f)
    out[f] = std::abs(data.eval(domain.faces()[f].centroid));
  return out;
}

}  // namespace pel
