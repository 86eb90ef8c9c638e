#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pel/ellipticity.hpp"
#include "pel/functionals.hpp"
#include "pel/geometry.hpp"
#include "pel/solver.hpp"

namespace pel {

struct Operator {
  std::string id;
  MatrixField field;
  DriftField drift;
};

struct RHRecord {
  std::string ball_id;
  double radius = 0.0;
  double q = 0.0, p = 0.0;
  double lhs = 0.0, rhs = 0.0, ratio = 0.0;
  // Caccioppoli-type gradient pair: sum of |grad u|^2 |u|^{q-2} against the
  // r^{-2}-scaled q-mass (boundary variant taken over (2B \ B) cap Omega).
  double grad_lhs = 0.0, grad_rhs = 0.0, grad_ratio = 0.0;
  int refinement = 0;
  bool degenerate = false;
  std::string reason;
};

struct LocalizationRecord {
  double d = 0.0;
  double m = 0.0;
  double p = 0.0, q = 0.0;
  double lhs = 0.0, rhs = 0.0, ratio = 0.0;
  int refinement = 0;
  bool degenerate = false;
  std::string reason;
};

struct ScanRecord {
  std::string operator_id;
  double p = 0.0;
  std::string data_family;
  double c_hat = 0.0;  // estimated constant, a lower bound for the true one
  int refinement = 0;
  double predicted_endpoint = 0.0;
  std::string verdict;  // STABLE / UNSTABLE / "" on non-final refinements
};

/// Interior reverse Hölder on B_r(x) vs B_2r(x); skipped (degenerate record)
/// when r >= delta(x)/4 or q is not below the measured p0.
RHRecord interior_rh(const DiscreteDomain& domain, const SolutionField& u, const Vec& x,
                     double r, double q, double p, double p0, int refinement);

/// Boundary reverse Hölder + Caccioppoli pair on a ball centered on the
/// boundary, for data vanishing on 2B. Throws std::domain_error when the
/// datum does not vanish there.
RHRecord boundary_rh(const DiscreteDomain& domain, const SolutionField& u, const Vec& q_center,
                     double r, double q, double p, const BoundaryData& data,
                     int refinement);

/// Gamma_a^{2d}(P) subset T(m Delta) for all P in 2 Delta, cell-exactly.
bool truncated_cone_contained(const DiscreteDomain& domain, const ConeGeometry& cones,
                              const Vec& q_center, double d, double m);

/// Localization ratio of the two nontangential averages; m auto-escalates
/// from 2 to 4 when the truncated-cone containment fails.
LocalizationRecord localization_check(const DiscreteDomain& domain, const Operator& op,
                                      const Vec& q_center, double d,
                                      const BoundaryData& f, double p, double q,
                                      double m, double aperture, int refinement);

/// Ratio read off a precomputed NT report (shared by the campaign driver).
LocalizationRecord localization_ratio(const DiscreteDomain& domain, const NTReport& nt,
                                      const Vec& q_center, double d, double p, double q,
                                      double m, int refinement);

struct ScanConfig {
  std::string domain_preset = "square";
  DomainParams params;
  std::vector<double> hs;      // one refinement level per entry, fine last
  std::vector<double> p_grid = {2.0, 4.0, 8.0, 16.0};
  int family_size = 12;
  std::uint32_t seed = 1;
  double aperture = 1.0;
  double stability_factor = 1.5;  // measurement convention, recorded in reports
};

/// Shipped boundary-data family: constant, polynomial traces, seeded bumps,
/// one atom. Always family_size members, deterministic in the seed.
std::vector<BoundaryData> data_family(const DiscreteDomain& domain, int family_size,
                                      std::uint32_t seed);

std::vector<ScanRecord> solvability_scan(const std::vector<Operator>& operators,
                                         const ScanConfig& config);

struct ReportBundle {
  std::vector<RHRecord> rh;
  std::vector<ScanRecord> scan;
  std::vector<LocalizationRecord> localization;
  nlohmann::json config = nlohmann::json::object();  // fully resolved
  nlohmann::json extra = nlohmann::json::object();   // certificates, verdicts
  bool empty() const { return rh.empty() && scan.empty() && localization.empty(); }
};

/// CSV per record type plus summary.json; byte-stable for identical inputs.
void report_emit(const ReportBundle& bundle, const std::string& out_dir);

/// Exact rational bookkeeping for 1/r = 1/2 - 1/(2(n-1)) and p = r s / 2.
struct Rational {
  long long num = 0, den = 1;
  Rational() = default;
  Rational(long long n, long long d);
  bool operator==(const Rational& o) const { return num == o.num && den == o.den; }
  Rational operator*(const Rational& o) const;
};

Rational square_function_exponent(int n);          // r = 2(n-1)/(n-2), n >= 3
Rational endpoint_exponent(int n, Rational s);     // p = r s / 2
bool endpoint_identity_holds(int n, Rational s);   // p == s (n-1)/(n-2) exactly

}  // namespace pel
