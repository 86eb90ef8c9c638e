#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "pel/geometry.hpp"
#include "pel/solver.hpp"

namespace pel {

struct NTReport {
  std::vector<double> values;   // per boundary face, NaN when missing
  std::vector<char> missing;    // empty cone at this face
  int missing_count = 0;
  double p = 2.0;
  double aperture = 1.0;
  std::optional<double> truncation;  // M1/M2 height when applicable
};

struct SquareFunctionReport {
  std::vector<double> values;
  std::vector<char> missing;
  int missing_count = 0;
  double aperture = 1.0;
  double scale = 0.0;
};

/// Shared cone machinery for one (domain, aperture) pair. Face-to-face
/// neighbor lists make batched Gamma_a membership cheap.
class ConeGeometry {
public:
  ConeGeometry(const DiscreteDomain& domain, double a);

  double aperture() const { return a_; }
  const DiscreteDomain& domain() const { return *domain_; }

  /// Exact membership y in Gamma_a(Q_face).
  bool member(int cell, int face) const;

  /// Visit every face Q with cell in Gamma_a(Q), once.
  void for_each_member_face(int cell, const std::function<void(int)>& fn) const;

private:
  const DiscreteDomain* domain_;
  double a_;
  // Per face: all faces sorted by distance, ascending.
  std::vector<std::vector<std::pair<double, int>>> neighbors_;
  mutable std::vector<int> mark_;
  mutable int epoch_ = 0;
};

/// Volume-weighted (mean over cells in B_{delta(x)/2}(x) of |u|^p)^{1/p}.
double local_average(const DiscreteDomain& domain, const SolutionField& u, int cell,
                     double p);

/// All local averages at once (row prefix sums over the cell grid).
std::vector<double> local_averages(const DiscreteDomain& domain,
                                   const SolutionField& u, double p);

/// Ntilde_{p,a}(u) per boundary face: sup of local averages over Gamma_a(Q).
NTReport ntmax(const ConeGeometry& cones, const SolutionField& u, double p);

/// The split at height d: M1 over delta(y) <= d, M2 over delta(y) > d.
std::pair<NTReport, NTReport> ntmax_split(const ConeGeometry& cones,
                                          const SolutionField& u, double p, double d);

/// Truncated square function at one boundary face:
/// (d^{-1} sum_{z in Gamma_a(P), |z-P|<2d} |grad v(z)|^2 delta(z)^{1-n} vol)^{1/2}.
double square_function(const ConeGeometry& cones, const SolutionField& v, int face,
                       double d);

SquareFunctionReport square_function_all(const ConeGeometry& cones,
                                         const SolutionField& v, double d);

/// v = |u|^{s/2-1} u nodally; gradients by the chain rule per cell with the
/// floored convention at zeros of u.
SolutionField power_transform(const DiscreteDomain& domain, const Mesh& mesh,
                              const SolutionField& u, double s);

/// (sum_f sigma_f |g_f|^p)^{1/p}; a mask excludes missing entries.
double boundary_lp_norm(const DiscreteDomain& domain, const std::vector<double>& g,
                        double p, const std::vector<char>* missing = nullptr);

/// Evaluate a boundary datum at every face centroid (modulus).
std::vector<double> face_values(const DiscreteDomain& domain, const BoundaryData& data);

}  // namespace pel
