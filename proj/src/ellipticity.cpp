#include "pel/ellipticity.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <fstream>
#include <sstream>

namespace pel {

ComplexVector jp_apply(double p, const ComplexVector& xi) {
  if (!(p > 1.0)) throw std::domain_error("jp_apply: requires p > 1");
  const double pprime = p / (p - 1.0);
  ComplexVector out(xi.size());
  for (Eigen::Index k = 0; k < xi.size(); ++k)
    out[k] = Complex(xi[k].real() / p, xi[k].imag() / pprime);
  return out;
}

Eigen::MatrixXd rayleigh_matrix(const ComplexMatrix& A, double p) {
  if (!(p > 1.0)) throw std::domain_error("rayleigh_matrix: requires p > 1");
  const auto n = A.rows();
  const double pprime = p / (p - 1.0);
  const Eigen::MatrixXd Ar = A.real();
  const Eigen::MatrixXd Ai = A.imag();

  // With xi = alpha + i beta and conjugate-second pairing,
  //   Re<A xi, J_p xi> = (1/p) a'Ar a + (1/p') b'Ar b
  //                      + a'(Ai'/p' - Ai/p) b.
  const Eigen::MatrixXd symAr = 0.5 * (Ar + Ar.transpose());
  Eigen::MatrixXd M(2 * n, 2 * n);
  M.topLeftCorner(n, n) = symAr / p;
  M.bottomRightCorner(n, n) = symAr / pprime;
  const Eigen::MatrixXd cross = 0.5 * (Ai.transpose() / pprime - Ai / p);
  M.topRightCorner(n, n) = cross;
  M.bottomLeftCorner(n, n) = cross.transpose();
  return M;
}

double lambda_p(const ComplexMatrix& A, double p) {
  const Eigen::MatrixXd M = rayleigh_matrix(A, p);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success)
    throw ComputationError("lambda_p: eigen-solver failed for p=" + std::to_string(p));
  return es.eigenvalues().minCoeff();
}

MatrixField::MatrixField(std::vector<ComplexMatrix> samples)
    : samples_(std::move(samples)) {
  if (samples_.empty()) throw ConfigError("MatrixField: no samples");
  dim_ = static_cast<int>(samples_.front().rows());
  if (dim_ < 2) throw ConfigError("MatrixField: dim must be >= 2");
  for (const auto& A : samples_) {
    if (A.rows() != dim_ || A.cols() != dim_)
      throw ConfigError("MatrixField: inconsistent sample dimension");
    if (lambda_p(A, 2.0) <= 0.0)
      throw ConfigError("MatrixField: sample is not 2-elliptic");
  }
}

MatrixField MatrixField::constant(ComplexMatrix A) {
  std::vector<ComplexMatrix> s;
  s.push_back(std::move(A));
  return MatrixField(std::move(s));
}

MatrixField MatrixField::preset(const std::string& name, int dim, double tau,
                                const std::vector<double>& eigenvalues,
                                double base, double epsilon) {
  if (name == "identity") {
    return constant(ComplexMatrix::Identity(dim, dim));
  }
  if (name == "scalar_complex") {
    return constant(Complex(1.0, tau) * ComplexMatrix::Identity(dim, dim));
  }
  if (name == "real_spd") {
    if (static_cast<int>(eigenvalues.size()) != dim)
      throw ConfigError("real_spd preset: need one eigenvalue per dimension");
    ComplexMatrix A = ComplexMatrix::Zero(dim, dim);
    for (int i = 0; i < dim; ++i) A(i, i) = eigenvalues[i];
    return constant(std::move(A));
  }
  if (name == "perturbed_real") {
    // Real part base*I, imaginary part epsilon on every entry.
    ComplexMatrix A = base * ComplexMatrix::Identity(dim, dim);
    A.array() += Complex(0.0, epsilon);
    return constant(std::move(A));
  }
  if (name == "grid_sampled")
    throw ConfigError("grid_sampled preset: use grid_sampled_csv with a path");
  throw ConfigError("unknown matrix preset: " + name);
}

MatrixField MatrixField::grid_sampled_csv(const std::string& path, int dim) {
  std::ifstream in(path);
  if (!in) throw ConfigError("grid_sampled: cannot open " + path);
  std::vector<ComplexMatrix> samples;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::stringstream ss(line);
    std::string tok;
    std::vector<double> vals;
    while (std::getline(ss, tok, ',')) vals.push_back(std::stod(tok));
    if (static_cast<int>(vals.size()) != 1 + 2 * dim * dim)
      throw ConfigError("grid_sampled: bad row length in " + path);
    ComplexMatrix A(dim, dim);
    std::size_t k = 1;  // vals[0] is the cell index
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j, k += 2) A(i, j) = Complex(vals[k], vals[k + 1]);
    samples.push_back(std::move(A));
  }
  return MatrixField(std::move(samples));
}

const ComplexMatrix& MatrixField::at(std::size_t cell) const {
  if (samples_.size() == 1) return samples_.front();
  if (cell >= samples_.size())
    throw std::domain_error("MatrixField::at: cell index out of range");
  return samples_[cell];
}

bool MatrixField::is_real(double tol) const {
  for (const auto& A : samples_)
    if (A.imag().cwiseAbs().maxCoeff() > tol) return false;
  return true;
}

double MatrixField::operator_norm_bound() const {
  double bound = 0.0;
  for (const auto& A : samples_) {
    Eigen::JacobiSVD<ComplexMatrix> svd(A);
    bound = std::max(bound, svd.singularValues()(0));
  }
  return bound;
}

namespace {

// lambda_p > threshold at every sample, for both p with |1 - 2/p| = s.
bool elliptic_at_level(const MatrixField& field, double s) {
  const double p_minus = 2.0 / (1.0 + s);
  const double p_plus = 2.0 / (1.0 - s);
  for (const auto& A : field.samples()) {
    if (lambda_p(A, p_minus) <= kLambdaPositivityTol) return false;
    if (lambda_p(A, p_plus) <= kLambdaPositivityTol) return false;
  }
  return true;
}

}  // namespace

double mu_of(const MatrixField& field) {
  for (const auto& A : field.samples())
    if (lambda_p(A, 2.0) <= 0.0)
      throw std::domain_error("mu_of: field is not 2-elliptic");
  if (field.is_real()) return 1.0;

  double lo = 0.0, hi = 1.0;  // elliptic at lo, not known at hi
  if (!elliptic_at_level(field, 0.0))
    throw std::domain_error("mu_of: field fails at p = 2 with positivity threshold");
  // Iterate well past the advertised tolerance; downstream endpoint algebra
  // amplifies mu errors by roughly 2/(1-mu)^2.
  while (hi - lo > 1e-14) {
    const double mid = 0.5 * (lo + hi);
    if (elliptic_at_level(field, mid))
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

EllipticityReport p_ellipticity_range(const MatrixField& field, int n) {
  if (n < 2) throw std::domain_error("p_ellipticity_range: n >= 2 required");
  EllipticityReport rep;
  rep.tolerance = kLambdaPositivityTol;
  rep.mu = mu_of(field);
  rep.p_lower = 2.0 / (1.0 + rep.mu);
  rep.p_upper = (rep.mu >= 1.0) ? infinity_sentinel() : 2.0 / (1.0 - rep.mu);
  if (n == 2 || std::isinf(rep.p_upper))
    rep.endpoint = infinity_sentinel();
  else
    rep.endpoint = rep.p_upper * static_cast<double>(n - 1) / static_cast<double>(n - 2);

  const double lo = rep.p_lower * 0.9;
  const double hi = std::isinf(rep.p_upper) ? kPSampleCap
                                            : std::min(rep.p_upper * 1.1, kPSampleCap);
  const int num = 33;
  for (int k = 0; k < num; ++k) {
    const double t = static_cast<double>(k) / (num - 1);
    const double p = lo * std::pow(hi / lo, t);
    if (!(p > 1.0)) continue;
    double worst = std::numeric_limits<double>::infinity();
    for (const auto& A : field.samples()) worst = std::min(worst, lambda_p(A, p));
    rep.lambda_samples.emplace_back(p, worst);
  }
  return rep;
}

}  // namespace pel
