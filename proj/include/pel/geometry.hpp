#pragma once

#include <Eigen/Dense>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pel/common.hpp"

namespace pel {

using Vec = Eigen::Vector3d;  // z = 0 in 2D

struct Segment {
  Vec a, b;
};

struct Cell {
  Vec center;
  double volume = 0.0;
  double delta = 0.0;  // exact distance to the polygonal boundary
};

struct BoundaryFace {
  Vec centroid;
  double weight = 0.0;  // sigma_f, exact length (2D) or area (3D)
};

struct SurfaceBall {
  Vec center;
  double radius = 0.0;
  std::vector<int> faces;  // member face indices
};

enum class RegionKind { carleson, standard_cone, modified_cone, truncated_cone };

struct Region {
  RegionKind kind = RegionKind::carleson;
  std::vector<int> cells;
  Vec q = Vec::Zero();
  double aperture = 0.0;
  double radius = 0.0;
  bool degenerate = false;
};

struct HarnackChainBall {
  Vec center;
  double radius = 0.0;
};

struct ChordArcCertificate {
  bool ok = false;
  std::string failure;
  double adr_constant = 0.0;           // >= 1, two-sided
  double interior_corkscrew_c = 0.0;   // in (0, 1)
  double exterior_corkscrew_c = 0.0;   // in (0, 1)
  std::map<int, int> harnack_N;        // Lambda in {1,2,4,8} -> chain length
  double harnack_comparability = 0.0;  // C with C^-1 diam <= dist <= C diam
  std::vector<double> scales_tested;
  std::string to_json() const;
};

struct DomainParams {
  double side = 1.0;
  double slope = 1.0;
  double period = 0.25;
};

class DiscreteDomain {
public:
  /// Presets: "square", "cube", "l_shape", "lipschitz_graph", "sawtooth".
  /// Cells are axis-aligned boxes of side h with strictly interior centers.
  static DiscreteDomain build(const std::string& preset, const DomainParams& params,
                              double h);

  int dim() const { return dim_; }
  double h() const { return h_; }
  const std::string& preset() const { return preset_; }
  const std::vector<Cell>& cells() const { return cells_; }
  const std::vector<BoundaryFace>& faces() const { return faces_; }
  const std::vector<Segment>& boundary_segments() const { return segments_; }

  /// Exact distance from an interior point to the polygonal boundary.
  /// Throws std::domain_error when x lies outside the domain.
  double delta(const Vec& x) const;
  /// Distance to the boundary with no interior check (usable outside).
  double boundary_distance(const Vec& x) const;
  bool inside(const Vec& x) const;

  double diameter() const { return diameter_; }
  double boundary_measure() const;            // sum of face weights
  double surface_measure(const Vec& q, double r) const;  // sigma(Delta(q, r))

  SurfaceBall surface_ball(const Vec& q, double r) const;
  /// Dyadic radii {2^k h : 4h <= 2^k h <= diam/2}.
  std::vector<double> dyadic_scales() const;

  // Structured-grid lookup of the cell containing x (-1 when none).
  int cell_at(const Vec& x) const;
  const Vec& grid_origin() const { return origin_; }
  int grid_extent(int axis) const { return nsub_[axis]; }
  int cell_grid_index(int cell, int axis) const;

  void export_boundary_csv(const std::string& path) const;

private:
  int dim_ = 2;
  double h_ = 0.0;
  double diameter_ = 0.0;
  std::string preset_;
  std::vector<Cell> cells_;
  std::vector<BoundaryFace> faces_;
  std::vector<Segment> segments_;   // 2D exact boundary (3D: box edges unused)
  Vec box_lo_ = Vec::Zero(), box_hi_ = Vec::Zero();  // cube uses exact box math
  bool is_box_ = false;
  std::vector<Vec> polygon_;  // 2D vertex loop
  Vec origin_ = Vec::Zero();
  int nsub_[3] = {0, 0, 1};
  std::vector<int> grid_cells_;  // nsub_[0]*nsub_[1]*nsub_[2], -1 when no cell
};

/// gamma_a(Q) = {x in Omega : |x - Q| < (1+a) delta(x)}.
Region standard_cone(const DiscreteDomain& domain, const Vec& q, double a);

/// Gamma_a(Q): cells y admitting a face centroid Q0 with
/// |y - Q0| < (1+a) delta(y) and |Q - Q0| < a delta(y).
Region modified_cone(const DiscreteDomain& domain, const Vec& q, double a);

/// T(Delta) = B(Q, r) intersect Omega, as a cell set.
Region carleson_region(const DiscreteDomain& domain, const SurfaceBall& ball);

/// Membership of a single cell in Gamma_a(Q); shared with the functionals.
bool in_modified_cone(const DiscreteDomain& domain, int cell, const Vec& q, double a);

ChordArcCertificate certify(const DiscreteDomain& domain,
                            const std::vector<double>& scales);

/// Explicit Harnack chain between two interior points (ball radius
/// delta(center)/2, greedy cover of a bottleneck-widest cell path).
/// Empty result means no chain was found.
std::vector<HarnackChainBall> harnack_chain(const DiscreteDomain& domain, int cell_from,
                                            int cell_to);

/// sigma({P in 2*Delta : y in Gamma_a(P)}) / sigma(2*Delta), Delta = Delta(q, d).
double check_prop_size(const DiscreteDomain& domain, const Vec& q, double d, int cell,
                       double a);

}  // namespace pel
