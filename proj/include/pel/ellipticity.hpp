#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

#include "pel/common.hpp"

namespace pel {

using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;

/// J_p scales the real part of a complex vector by 1/p and the imaginary
/// part by 1/p', p' = p/(p-1).
ComplexVector jp_apply(double p, const ComplexVector& xi);

/// Realification of the form Re<A xi, J_p xi> (conjugate-second pairing):
/// returns the symmetric 2n x 2n matrix M with
///   (alpha, beta)^T M (alpha, beta) = Re<A xi, J_p xi>,  xi = alpha + i beta.
Eigen::MatrixXd rayleigh_matrix(const ComplexMatrix& A, double p);

/// Optimal lambda_p: smallest eigenvalue of rayleigh_matrix(A, p).
/// May be <= 0, which signals failure of p-ellipticity at this p.
double lambda_p(const ComplexMatrix& A, double p);

/// A coefficient field A(x). Samples are the measure atoms of the
/// discretization; a constant field has a single sample.
class MatrixField {
public:
  // Throws ConfigError if any sample fails 2-ellipticity.
  explicit MatrixField(std::vector<ComplexMatrix> samples);

  static MatrixField constant(ComplexMatrix A);
  // Presets: "identity" (dim), "scalar_complex" (tau), "real_spd"
  // (eigenvalue list), "perturbed_real" (base, epsilon),
  // "grid_sampled" (CSV path).
  static MatrixField preset(const std::string& name, int dim, double tau = 1.0,
                            const std::vector<double>& eigenvalues = {},
                            double base = 1.0, double epsilon = 0.0);
  static MatrixField grid_sampled_csv(const std::string& path, int dim);

  int dim() const { return dim_; }
  const std::vector<ComplexMatrix>& samples() const { return samples_; }
  const ComplexMatrix& at(std::size_t cell) const;
  bool is_real(double tol = 1e-14) const;
  double operator_norm_bound() const;  // sup of largest singular value

private:
  int dim_ = 0;
  std::vector<ComplexMatrix> samples_;
};

struct EllipticityReport {
  double mu = 0.0;       // in (0, 1]
  double p_lower = 0.0;  // 2/(1+mu)
  double p_upper = 0.0;  // p0 = 2/(1-mu), or +inf sentinel
  double endpoint = 0.0; // p0 (n-1)/(n-2), +inf when n == 2 or p0 = +inf
  std::vector<std::pair<double, double>> lambda_samples;  // (p, lambda_p)
  double tolerance = 0.0;
};

// Threshold separating genuine degeneracy of lambda_p from round-off.
inline constexpr double kLambdaPositivityTol = 1e-12;
// Absolute bisection tolerance for mu.
inline constexpr double kMuBisectionTol = 1e-9;
// Cap for the reported lambda_p curve when p0 is infinite or near-infinite.
inline constexpr double kPSampleCap = 64.0;

/// mu(A) = sup{ s in [0,1) : lambda_p > 0 for both p with |1-2/p| = s, at
/// every sample }. Returns exactly 1 for real fields.
double mu_of(const MatrixField& field);

/// Full report: p-elliptic interval, solvability endpoint p0(n-1)/(n-2),
/// and a log-spaced lambda_p curve.
EllipticityReport p_ellipticity_range(const MatrixField& field, int n);

}  // namespace pel
