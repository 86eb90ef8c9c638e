#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <array>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pel/common.hpp"
#include "pel/ellipticity.hpp"
#include "pel/geometry.hpp"

namespace pel {

/// First-order coefficient B with the critical scaling |B(x)| = K delta(x)^{-1}
/// (optionally damped by delta^decay to model the o(1/delta) regime).
struct DriftField {
  enum class Rule { zero, radial_inward, constant_direction };
  Rule rule = Rule::zero;
  double K = 0.0;
  double decay = 0.0;  // |B| = K * delta^decay / delta
  Vec direction = Vec::UnitX();

  static DriftField zero() { return {}; }
  static DriftField radial_inward(double K, double decay = 0.0) {
    return {Rule::radial_inward, K, decay, Vec::UnitX()};
  }
  static DriftField constant_direction(double K, const Vec& v, double decay = 0.0) {
    return {Rule::constant_direction, K, decay, v.normalized()};
  }
};

/// Boundary datum as a position rule; evaluated at mesh boundary nodes for
/// the solve and at face centroids for boundary norms.
struct BoundaryData {
  std::string tag;
  std::function<Complex(const Vec&)> eval;

  static BoundaryData constant(Complex c);
  // Named traces: "x2my2" (x^2 - y^2), "expcos" (e^x cos y), "linear_x".
  static BoundaryData polynomial_trace(const std::string& name);
  static BoundaryData random_bumps(const DiscreteDomain& domain, unsigned seed,
                                   int count, double scale);
  static BoundaryData atom(const Vec& q, double r);
  // Forces the wrapped datum to vanish identically on Delta(center, radius).
  static BoundaryData zero_on(const Vec& center, double radius, BoundaryData inner);
};

/// Simplicial split of the cell grid: 2 triangles per square, 6 Kuhn
/// tetrahedra per cube. Nodes are grid vertices of interior cells.
struct Mesh {
  const DiscreteDomain* domain = nullptr;
  std::vector<Vec> nodes;
  std::vector<std::array<int, 4>> simplices;  // last entry -1 in 2D
  std::vector<int> simplex_cell;
  std::vector<std::array<int, 8>> cell_corners;  // 4 used in 2D
  std::vector<char> node_on_boundary;
  std::vector<int> interior_nodes;

  static Mesh build(const DiscreteDomain& domain);
  int corners_per_cell() const { return domain->dim() == 2 ? 4 : 8; }
};

struct SolutionField {
  std::vector<Complex> nodal;                 // per mesh node
  std::vector<Complex> cell_value;            // corner mean, per cell
  std::vector<Eigen::Vector3cd> gradient;     // per cell (z = 0 in 2D)
  double residual = 0.0;
};

struct CoercivityReport {
  double margin = 0.0;           // 0.5 * lambda_min(Herm(K_II), G_II)
  double analytic_lower = 0.0;   // lambda_2(A) - K * sqrt(C_hardy) / 2
  double hardy_constant = 0.0;
};

class LinearSystem {
public:
  Mesh mesh;
  Eigen::SparseMatrix<Complex> stiffness;  // full bilinear form, all nodes
  Eigen::SparseMatrix<Complex> grad_gram;  // A = I, B = 0 block for the same mesh
  const DiscreteDomain* domain = nullptr;
  double lambda2 = 0.0;  // worst lambda_2 over field samples
  double drift_K = 0.0;

  /// Measured coercivity margin (cached); the exact generalized-eigenvalue
  /// route runs only when the analytic lower bound fails to certify.
  double margin() const;
  CoercivityReport coercivity_report() const;

private:
  mutable std::optional<double> margin_cache_;
};

/// Galerkin assembly of B[u, conj(w)] = int A_ij d_j u d_i conj(w)
///                                    + B_i (d_i u) conj(w).
/// Coefficients are sampled at cell centers; quadrature is exact for them.
LinearSystem assemble(const MatrixField& field, const DriftField& drift,
                      const DiscreteDomain& domain);

/// Exact route: 0.5 * smallest generalized eigenvalue of the Hermitian part
/// of the interior stiffness block in the gradient-Gram inner product.
double coercivity_margin_exact(const LinearSystem& system, double tol = 1e-9);

/// Evaluate the assembled form on coefficient vectors; `conjugate_test`
/// selects B[u, conj(w)] (default) versus the unconjugated B[u, w].
Complex form_value(const LinearSystem& system, const Eigen::VectorXcd& u,
                   const Eigen::VectorXcd& w, bool conjugate_test = true);

/// Dirichlet solve; refuses when the coercivity margin is not positive.
SolutionField solve_dirichlet(const LinearSystem& system, const BoundaryData& data);

/// Measured Hardy constant: max over the test family of
/// int |w|^2/delta^2 dx / int |grad w|^2 dx.
/// An empty family selects the built-in one (delta, delta^2, center tent,
/// first Laplacian eigenfunction).
double hardy_check(const DiscreteDomain& domain,
                   const std::vector<std::function<double(const Vec&)>>& family = {});

/// L^inf nodal distance between a solution and a reference function.
double max_nodal_error(const Mesh& mesh, const SolutionField& u,
                       const std::function<Complex(const Vec&)>& ref);

}  // namespace pel
