#include "pel/solver.hpp"

#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <map>
#include <random>

namespace pel {

BoundaryData BoundaryData::constant(Complex c) {
  return {"constant", [c](const Vec&) { return c; }};
}

BoundaryData BoundaryData::polynomial_trace(const std::string& name) {
  if (name == "x2my2")
    return {"poly:x2my2",
            [](const Vec& p) { return Complex(p.x() * p.x() - p.y() * p.y(), 0.0); }};
  if (name == "expcos")
    return {"poly:expcos",
            [](const Vec& p) { return Complex(std::exp(p.x()) * std::cos(p.y()), 0.0); }};
  if (name == "linear_x")
    return {"poly:linear_x", [](const Vec& p) { return Complex(p.x(), 0.0); }};
  if (name == "harmonic3d")
    return {"poly:harmonic3d", [](const Vec& p) {
              return Complex(p.x() * p.x() + p.y() * p.y() - 2.0 * p.z() * p.z(), 0.0);
            }};
  throw ConfigError("unknown polynomial trace: " + name);
}

BoundaryData BoundaryData::random_bumps(const DiscreteDomain& domain, unsigned seed,
                                        int count, double scale) {
  std::mt19937 rng(seed);
  std::uniform_int_distribution<int> pick(0, static_cast<int>(domain.faces().size()) - 1);
  std::uniform_real_distribution<double> amp(-1.0, 1.0);
  std::vector<std::pair<Vec, Complex>> bumps;
  for (int k = 0; k < count; ++k) {
    const Vec anchor = domain.faces()[pick(rng)].centroid;
    const Complex a(amp(rng), amp(rng));
    bumps.emplace_back(anchor, a);
  }
  const double s2 = scale * scale;
  return {"random_bumps:" + std::to_string(seed), [bumps, s2](const Vec& p) {
            Complex v = 0.0;
            for (const auto& [anchor, a] : bumps)
              v += a * std::exp(-(p - anchor).squaredNorm() / s2);
            return v;
          }};
}

BoundaryData BoundaryData::atom(const Vec& q, double r) {
  return {"atom", [q, r](const Vec& p) {
            return Complex((p - q).norm() < r ? 1.0 : 0.0, 0.0);
          }};
}

BoundaryData BoundaryData::zero_on(const Vec& center, double radius, BoundaryData inner) {
  auto f = inner.eval;
  return {"zero_on(" + inner.tag + ")", [center, radius, f](const Vec& p) {
            return (p - center).norm() < radius ? Complex(0.0) : f(p);
          }};
}

Mesh Mesh::build(const DiscreteDomain& domain) {
  Mesh mesh;
  mesh.domain = &domain;
  const int dim = domain.dim();
  const double h = domain.h();
  const int nvx = domain.grid_extent(0) + 1;
  const int nvy = domain.grid_extent(1) + 1;
  const int nvz = (dim == 3) ? domain.grid_extent(2) + 1 : 1;
  std::vector<int> vertex_id(static_cast<std::size_t>(nvx) * nvy * nvz, -1);
  const Vec origin = domain.grid_origin();

  auto vertex = [&](int i, int j, int k) -> int {
    const std::size_t flat =
        static_cast<std::size_t>(i) + static_cast<std::size_t>(nvx) * (j + static_cast<std::size_t>(nvy) * k);
    if (vertex_id[flat] < 0) {
      vertex_id[flat] = static_cast<int>(mesh.nodes.size());
      Vec p = origin + h * Vec(i, j, dim == 3 ? k : 0);
      if (dim == 2) p.z() = 0.0;
      mesh.nodes.push_back(p);
    }
    return vertex_id[flat];
  };

  const int ncells = static_cast<int>(domain.cells().size());
  mesh.cell_corners.resize(ncells);
  for (int c = 0; c < ncells; ++c) {
    const int i = domain.cell_grid_index(c, 0);
    const int j = domain.cell_grid_index(c, 1);
    const int k = (dim == 3) ? domain.cell_grid_index(c, 2) : 0;
    if (dim == 2) {
      const int v00 = vertex(i, j, 0), v10 = vertex(i + 1, j, 0);
      const int v11 = vertex(i + 1, j + 1, 0), v01 = vertex(i, j + 1, 0);
      mesh.cell_corners[c] = {v00, v10, v11, v01, -1, -1, -1, -1};
      mesh.simplices.push_back({v00, v10, v11, -1});
      mesh.simplex_cell.push_back(c);
      mesh.simplices.push_back({v00, v11, v01, -1});
      mesh.simplex_cell.push_back(c);
    } else {
      int v[8];
      for (int b = 0; b < 8; ++b)
        v[b] = vertex(i + (b & 1), j + ((b >> 1) & 1), k + ((b >> 2) & 1));
      std::copy(v, v + 8, mesh.cell_corners[c].begin());
      // Kuhn split: six tetrahedra along the main diagonal v[0] -> v[7].
      const int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2},
                               {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
      for (const auto& perm : perms) {
        int bits = 0;
        std::array<int, 4> tet{};
        tet[0] = v[0];
        for (int s = 0; s < 3; ++s) {
          bits |= 1 << perm[s];
          tet[s + 1] = v[bits];
        }
        mesh.simplices.push_back(tet);
        mesh.simplex_cell.push_back(c);
      }
    }
  }

  // Mesh boundary: cell faces seen exactly once.
  mesh.node_on_boundary.assign(mesh.nodes.size(), 0);
  if (dim == 2) {
    std::map<std::pair<int, int>, int> edge_count;
    for (int c = 0; c < ncells; ++c) {
      const auto& cc = mesh.cell_corners[c];
      for (int e = 0; e < 4; ++e) {
        int a = cc[e], b = cc[(e + 1) % 4];
        if (a > b) std::swap(a, b);
        ++edge_count[{a, b}];
      }
    }
    for (const auto& [edge, count] : edge_count)
      if (count == 1) {
        mesh.node_on_boundary[edge.first] = 1;
        mesh.node_on_boundary[edge.second] = 1;
      }
  } else {
    std::map<std::array<int, 4>, int> face_count;
    const int quads[6][4] = {{0, 2, 6, 4}, {1, 3, 7, 5}, {0, 1, 5, 4},
                             {2, 3, 7, 6}, {0, 1, 3, 2}, {4, 5, 7, 6}};
    for (int c = 0; c < ncells; ++c) {
      const auto& cc = mesh.cell_corners[c];
      for (const auto& q : quads) {
        std::array<int, 4> f = {cc[q[0]], cc[q[1]], cc[q[2]], cc[q[3]]};
        std::sort(f.begin(), f.end());
        ++face_count[f];
      }
    }
    for (const auto& [face, count] : face_count)
      if (count == 1)
        for (int a : face) mesh.node_on_boundary[a] = 1;
  }
  for (int i = 0; i < static_cast<int>(mesh.nodes.size()); ++i)
    if (!mesh.node_on_boundary[i]) mesh.interior_nodes.push_back(i);
  return mesh;
}

namespace {

struct SimplexGeometry {
  double volume = 0.0;
  // Barycentric basis gradients, one column per simplex vertex.
  Eigen::Matrix<double, 3, 4> grads = Eigen::Matrix<double, 3, 4>::Zero();
};

SimplexGeometry simplex_geometry(const Mesh& mesh, const std::array<int, 4>& simplex,
                                 int dim) {
  SimplexGeometry geo;
  Eigen::MatrixXd D(dim, dim);
  for (int c = 1; c <= dim; ++c)
    D.col(c - 1) = (mesh.nodes[simplex[c]] - mesh.nodes[simplex[0]]).head(dim);
  const double det = D.determinant();
  geo.volume = std::abs(det) / (dim == 2 ? 2.0 : 6.0);
  const Eigen::MatrixXd Dinv = D.inverse();
  for (int c = 1; c <= dim; ++c) geo.grads.col(c).head(dim) = Dinv.row(c - 1);
  geo.grads.col(0).head(dim) = -Dinv.colwise().sum().transpose();
  return geo;
}

Eigen::Vector3d drift_vector(const DriftField& drift, const Vec& x, double delta,
                             const Vec& mass_center) {
  if (drift.rule == DriftField::Rule::zero || drift.K == 0.0) return Vec::Zero();
  const double mag = drift.K * std::pow(delta, drift.decay) / delta;
  if (drift.rule == DriftField::Rule::constant_direction) return mag * drift.direction;
  Vec dir = mass_center - x;
  const double nrm = dir.norm();
  return nrm > 0 ? Vec(mag * dir / nrm) : Vec::Zero();
}

// Hardy constant from quadratic forms only (no eigen-solve); used as the
// cheap coercivity gate.
double hardy_quick(const DiscreteDomain& domain, const Eigen::SparseMatrix<Complex>& G,
                   const Mesh& mesh);

}  // namespace

LinearSystem assemble(const MatrixField& field, const DriftField& drift,
                      const DiscreteDomain& domain) {
  if (field.dim() != domain.dim())
    throw ConfigError("assemble: matrix field and domain dimension mismatch");
  if (field.samples().size() != 1 &&
      field.samples().size() != domain.cells().size())
    throw ConfigError("assemble: grid-sampled field size does not match cells");

  LinearSystem sys;
  sys.domain = &domain;
  sys.mesh = Mesh::build(domain);
  sys.drift_K = drift.K;
  sys.lambda2 = std::numeric_limits<double>::infinity();
  for (const auto& A : field.samples()) sys.lambda2 = std::min(sys.lambda2, lambda_p(A, 2.0));

  Vec mass_center = Vec::Zero();
  {
    double vol = 0.0;
    for (const auto& c : domain.cells()) {
      mass_center += c.volume * c.center;
      vol += c.volume;
    }
    mass_center /= vol;
  }

  const int dim = domain.dim();
  const int nverts = dim + 1;
  std::vector<Eigen::Triplet<Complex>> trip, trip_g;
  trip.reserve(sys.mesh.simplices.size() * (nverts * nverts));
  trip_g.reserve(trip.capacity());
  for (std::size_t s = 0; s < sys.mesh.simplices.size(); ++s) {
    const auto& simplex = sys.mesh.simplices[s];
    const int cell = sys.mesh.simplex_cell[s];
    const auto geo = simplex_geometry(sys.mesh, simplex, dim);
    const ComplexMatrix& A = field.at(cell);
    const Vec B = drift_vector(drift, domain.cells()[cell].center,
                               domain.cells()[cell].delta, mass_center);
    for (int i = 0; i < nverts; ++i) {
      const Eigen::Vector3d gi = geo.grads.col(i);
      for (int j = 0; j < nverts; ++j) {
        const Eigen::Vector3d gj = geo.grads.col(j);
        Complex val = 0.0;
        for (int k = 0; k < dim; ++k)
          for (int l = 0; l < dim; ++l) val += A(k, l) * gj[l] * gi[k];
        val *= geo.volume;
        val += Complex(B.head(3).dot(gj)) * geo.volume / static_cast<double>(nverts);
        trip.emplace_back(simplex[i], simplex[j], val);
        double gram = gi.head(dim).dot(gj.head(dim)) * geo.volume;
        trip_g.emplace_back(simplex[i], simplex[j], Complex(gram, 0.0));
      }
    }
  }
  const int nn = static_cast<int>(sys.mesh.nodes.size());
  sys.stiffness.resize(nn, nn);
  sys.stiffness.setFromTriplets(trip.begin(), trip.end());
  sys.grad_gram.resize(nn, nn);
  sys.grad_gram.setFromTriplets(trip_g.begin(), trip_g.end());
  return sys;
}

namespace {

Eigen::SparseMatrix<Complex> interior_block(const Eigen::SparseMatrix<Complex>& M,
                                            const Mesh& mesh) {
  std::vector<int> pos(mesh.nodes.size(), -1);
  for (std::size_t k = 0; k < mesh.interior_nodes.size(); ++k)
    pos[mesh.interior_nodes[k]] = static_cast<int>(k);
  std::vector<Eigen::Triplet<Complex>> trip;
  for (int col = 0; col < M.outerSize(); ++col)
    for (Eigen::SparseMatrix<Complex>::InnerIterator it(M, col); it; ++it)
      if (pos[it.row()] >= 0 && pos[it.col()] >= 0)
        trip.emplace_back(pos[it.row()], pos[it.col()], it.value());
  Eigen::SparseMatrix<Complex> out(static_cast<int>(mesh.interior_nodes.size()),
                                   static_cast<int>(mesh.interior_nodes.size()));
  out.setFromTriplets(trip.begin(), trip.end());
  return out;
}

// Count of negative pivots of the Hermitian matrix M (LDLT inertia);
// -1 when the factorization breaks down.
int negative_inertia(const Eigen::SparseMatrix<Complex>& M) {
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<Complex>> ldlt(M);
  if (ldlt.info() != Eigen::Success) return -1;
  int neg = 0;
  const auto& d = ldlt.vectorD();
  for (Eigen::Index i = 0; i < d.size(); ++i)
    if (d[i].real() < 0.0) ++neg;
  return neg;
}

}  // namespace

double coercivity_margin_exact(const LinearSystem& system, double tol) {
  const auto K = interior_block(system.stiffness, system.mesh);
  const auto G = interior_block(system.grad_gram, system.mesh);
  Eigen::SparseMatrix<Complex> H =
      Complex(0.5) * (K + Eigen::SparseMatrix<Complex>(K.adjoint()));

  // Bracket the smallest pencil eigenvalue by expanding until the inertia
  // of H - sigma G changes.
  double lo = -1.0, hi = 1.0;
  auto neg_at = [&](double sigma) {
    Eigen::SparseMatrix<Complex> S = H - Complex(sigma) * G;
    const int neg = negative_inertia(S);
    return neg;  // -1 means breakdown, treated as "not PD"
  };
  int guard = 0;
  while (neg_at(lo) != 0) {
    lo *= 2.0;
    if (++guard > 60) throw ComputationError("coercivity: no lower bracket found");
  }
  guard = 0;
  while (neg_at(hi) == 0) {
    hi *= 2.0;
    if (++guard > 60) throw ComputationError("coercivity: no upper bracket found");
  }
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    if (neg_at(mid) == 0)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi) * 0.5;  // J_2 normalization
}

CoercivityReport LinearSystem::coercivity_report() const {
  CoercivityReport rep;
  rep.hardy_constant = hardy_check(*domain);
  rep.analytic_lower = lambda2 - drift_K * std::sqrt(rep.hardy_constant) / 2.0;
  rep.margin = coercivity_margin_exact(*this);
  return rep;
}

double LinearSystem::margin() const {
  if (margin_cache_) return *margin_cache_;
  double m;
  if (drift_K == 0.0) {
    m = lambda2;
  } else {
    const double hardy = hardy_quick(*domain, grad_gram, mesh);
    const double analytic = lambda2 - drift_K * std::sqrt(hardy) / 2.0;
    m = (analytic > 0.0) ? analytic : coercivity_margin_exact(*this);
  }
  margin_cache_ = m;
  return m;
}

Complex form_value(const LinearSystem& system, const Eigen::VectorXcd& u,
                   const Eigen::VectorXcd& w, bool conjugate_test) {
  // Real P1 basis: B[u, conj(w)] = w^H K u, unconjugated pairing B[u, w] = w^T K u.
  if (conjugate_test) return w.dot(system.stiffness * u);
  return w.transpose() * (system.stiffness * u);
}

SolutionField solve_dirichlet(const LinearSystem& system, const BoundaryData& data) {
  if (!(system.margin() > 0.0))
    throw ComputationError("solve_dirichlet: coercivity margin <= 0, solve refused");

  const Mesh& mesh = system.mesh;
  const int nn = static_cast<int>(mesh.nodes.size());
  Eigen::VectorXcd full = Eigen::VectorXcd::Zero(nn);
  for (int i = 0; i < nn; ++i)
    if (mesh.node_on_boundary[i]) full[i] = data.eval(mesh.nodes[i]);

  const auto KII = interior_block(system.stiffness, mesh);
  Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(mesh.interior_nodes.size());
  {
    // rhs = -K_IB f_B, accumulated from the full matrix.
    std::vector<int> pos(nn, -1);
    for (std::size_t k = 0; k < mesh.interior_nodes.size(); ++k)
      pos[mesh.interior_nodes[k]] = static_cast<int>(k);
    for (int col = 0; col < system.stiffness.outerSize(); ++col)
      for (Eigen::SparseMatrix<Complex>::InnerIterator it(system.stiffness, col); it;
           ++it)
        if (pos[it.row()] >= 0 && mesh.node_on_boundary[it.col()])
          rhs[pos[it.row()]] -= it.value() * full[it.col()];
  }

  Eigen::SparseLU<Eigen::SparseMatrix<Complex>> lu(KII);
  if (lu.info() != Eigen::Success)
    throw ComputationError("solve_dirichlet: factorization failed");
  const Eigen::VectorXcd x = lu.solve(rhs);

  const double rhs_norm = rhs.norm();
  const double res = (KII * x - rhs).norm() / (rhs_norm > 0 ? rhs_norm : 1.0);
  if (res > 1e-10)
    throw ComputationError("solve_dirichlet: residual " + std::to_string(res) +
                           " exceeds 1e-10");

  for (std::size_t k = 0; k < mesh.interior_nodes.size(); ++k)
    full[mesh.interior_nodes[k]] = x[k];

  SolutionField sol;
  sol.residual = res;
  sol.nodal.assign(full.data(), full.data() + nn);

  const auto& domain = *system.domain;
  const int dim = domain.dim();
  const int ncells = static_cast<int>(domain.cells().size());
  sol.cell_value.assign(ncells, Complex(0.0));
  sol.gradient.assign(ncells, Eigen::Vector3cd::Zero());
  const int corners = mesh.corners_per_cell();
  for (int c = 0; c < ncells; ++c) {
    Complex v = 0.0;
    for (int k = 0; k < corners; ++k) v += full[mesh.cell_corners[c][k]];
    sol.cell_value[c] = v / static_cast<double>(corners);
  }
  std::vector<double> cellvol(ncells, 0.0);
  for (std::size_t s = 0; s < mesh.simplices.size(); ++s) {
    const int c = mesh.simplex_cell[s];
    const auto geo = simplex_geometry(mesh, mesh.simplices[s], dim);
    Eigen::Vector3cd g = Eigen::Vector3cd::Zero();
    for (int i = 0; i <= dim; ++i) g += full[mesh.simplices[s][i]] * geo.grads.col(i);
    sol.gradient[c] += geo.volume * g;
    cellvol[c] += geo.volume;
  }
  for (int c = 0; c < ncells; ++c) sol.gradient[c] /= cellvol[c];
  return sol;
}

namespace {

double hardy_ratio(const DiscreteDomain& domain, const Mesh& mesh,
                   const Eigen::SparseMatrix<Complex>& G, const Eigen::VectorXd& w) {
  const double denom = w.dot((G * w.cast<Complex>()).real());
  if (denom <= 0.0) return 0.0;  // degenerate member, skipped
  double num = 0.0;
  const int corners = mesh.corners_per_cell();
  for (std::size_t c = 0; c < domain.cells().size(); ++c) {
    double v = 0.0;
    for (int k = 0; k < corners; ++k) v += w[mesh.cell_corners[c][k]];
    v /= corners;
    const auto& cell = domain.cells()[c];
    num += cell.volume * v * v / (cell.delta * cell.delta);
  }
  return num / denom;
}

Eigen::VectorXd nodal_values(const DiscreteDomain& domain, const Mesh& mesh,
                             const std::function<double(const Vec&)>& f,
                             bool enforce_zero) {
  Eigen::VectorXd w(mesh.nodes.size());
  for (std::size_t i = 0; i < mesh.nodes.size(); ++i) w[i] = f(mesh.nodes[i]);
  const double sup = w.cwiseAbs().maxCoeff();
  // Staircase meshes place mesh-boundary nodes up to O(h) inside the exact
  // boundary; tolerate values of that size and clamp them to zero.
  const double tol = 4.0 * domain.h() * std::max(1.0, sup);
  for (std::size_t i = 0; i < mesh.nodes.size(); ++i)
    if (mesh.node_on_boundary[i]) {
      if (!enforce_zero && std::abs(w[i]) > tol)
        throw std::domain_error("hardy_check: family member not vanishing on boundary");
      w[i] = 0.0;
    }
  return w;
}

double hardy_quick(const DiscreteDomain& domain, const Eigen::SparseMatrix<Complex>& G,
                   const Mesh& mesh) {
  double best = 0.0;
  auto deltaf = [&](const Vec& p) {
    return domain.inside(p) ? domain.boundary_distance(p) : 0.0;
  };
  const std::function<double(const Vec&)> family[] = {
      deltaf, [&](const Vec& p) { double d = deltaf(p); return d * d; }};
  for (const auto& f : family) {
    const Eigen::VectorXd w = nodal_values(domain, mesh, f, true);
    best = std::max(best, hardy_ratio(domain, mesh, G, w));
  }
  return best;
}

}  // namespace

double hardy_check(const DiscreteDomain& domain,
                   const std::vector<std::function<double(const Vec&)>>& family) {
  const Mesh mesh = Mesh::build(domain);
  const auto sys = assemble(MatrixField::preset("identity", domain.dim()),
                            DriftField::zero(), domain);
  const auto& G = sys.grad_gram;

  double best = 0.0;
  if (!family.empty()) {
    for (const auto& f : family) {
      const Eigen::VectorXd w = nodal_values(domain, mesh, f, false);
      best = std::max(best, hardy_ratio(domain, mesh, G, w));
    }
    return best;
  }

  best = hardy_quick(domain, G, mesh);

  // Tent over the deepest point.
  const Cell* deepest = &domain.cells().front();
  for (const auto& c : domain.cells())
    if (c.delta > deepest->delta) deepest = &c;
  const Vec apex = deepest->center;
  const double reach = deepest->delta;
  auto tent = [apex, reach](const Vec& p) {
    return std::max(0.0, 1.0 - (p - apex).norm() / reach);
  };
  best = std::max(best, hardy_ratio(domain, mesh, G,
                                    nodal_values(domain, mesh, tent, true)));

  // First Laplacian eigenfunction by inverse iteration on the pencil (G, M).
  const auto GII = interior_block(G, mesh);
  Eigen::SparseMatrix<double> Gr = GII.real();
  Eigen::VectorXd mass = Eigen::VectorXd::Zero(mesh.nodes.size());
  const int corners = mesh.corners_per_cell();
  for (std::size_t c = 0; c < domain.cells().size(); ++c)
    for (int k = 0; k < corners; ++k)
      mass[mesh.cell_corners[c][k]] += domain.cells()[c].volume / corners;
  Eigen::VectorXd mI(mesh.interior_nodes.size());
  for (std::size_t k = 0; k < mesh.interior_nodes.size(); ++k)
    mI[k] = mass[mesh.interior_nodes[k]];
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(Gr);
  if (ldlt.info() == Eigen::Success) {
    Eigen::VectorXd z = Eigen::VectorXd::Ones(mI.size());
    for (int it = 0; it < 60; ++it) {
      z = ldlt.solve(mI.asDiagonal() * z);
      z /= z.norm();
    }
    Eigen::VectorXd w = Eigen::VectorXd::Zero(mesh.nodes.size());
    for (std::size_t k = 0; k < mesh.interior_nodes.size(); ++k)
      w[mesh.interior_nodes[k]] = z[k];
    best = std::max(best, hardy_ratio(domain, mesh, G, w));
  }
  return best;
}

double max_nodal_error(const Mesh& mesh, const SolutionField& u,
                       const std::function<Complex(const Vec&)>& ref) {
  double err = 0.0;
  for (std::size_t i = 0; i < mesh.nodes.size(); ++i)
    err = std::max(err, std::abs(u.nodal[i] - ref(mesh.nodes[i])));
  return err;
}

}  // namespace pel
