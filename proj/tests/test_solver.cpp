#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>

#include "pel/solver.hpp"

using namespace pel;

namespace {

SolutionField solve_preset(const std::string& preset, double h, const MatrixField& field,
                           const DriftField& drift, const BoundaryData& f,
                           DiscreteDomain* out_domain = nullptr) {
  DomainParams params;
  auto domain = DiscreteDomain::build(preset, params, h);
  auto sys = assemble(field, drift, domain);
  auto u = solve_dirichlet(sys, f);
  if (out_domain) *out_domain = domain;
  return u;
}

double max_abs_diff(const SolutionField& a, const SolutionField& b) {
  REQUIRE(a.nodal.size() == b.nodal.size());
  double m = 0.0;
  for (std::size_t i = 0; i < a.nodal.size(); ++i) {
    m = std::max(m, std::abs(a.nodal[i] - b.nodal[i]));
  }
  return m;
}

}  // namespace

TEST_CASE("constant data are preserved exactly") {
  const Complex c(0.7, -0.3);
  for (double tau : {0.0, 1.0}) {
    for (double K : {0.0, 0.05}) {
      auto field = tau == 0.0 ? MatrixField::preset("identity", 2)
                              : MatrixField::preset("scalar_complex", 2, tau);
      auto drift = K == 0.0 ? DriftField::zero() : DriftField::radial_inward(K);
      auto u = solve_preset("square", 1.0 / 16, field, drift, BoundaryData::constant(c));
      for (const auto& v : u.nodal) CHECK(std::abs(v - c) <= 1e-10);
      CHECK(u.residual <= 1e-10);
    }
  }
  // Also in 3D.
  auto u = solve_preset("cube", 1.0 / 8, MatrixField::preset("identity", 3),
                        DriftField::zero(), BoundaryData::constant(c));
  for (const auto& v : u.nodal) CHECK(std::abs(v - c) <= 1e-10);
}

TEST_CASE("scalar complex factor multiplies the system and cancels in the solve") {
  DomainParams params;
  auto domain = DiscreteDomain::build("square", params, 1.0 / 16);
  auto real_sys = assemble(MatrixField::preset("identity", 2), DriftField::zero(), domain);
  auto cplx_sys =
      assemble(MatrixField::preset("scalar_complex", 2, 1.0), DriftField::zero(), domain);

  Eigen::SparseMatrix<Complex> diff =
      cplx_sys.stiffness - Complex(1.0, 1.0) * real_sys.stiffness;
  CHECK(diff.coeffs().cwiseAbs().maxCoeff() <= 1e-12);

  const auto f = BoundaryData::polynomial_trace("x2my2");
  auto u_real = solve_dirichlet(real_sys, f);
  auto u_cplx = solve_dirichlet(cplx_sys, f);
  CHECK(max_abs_diff(u_real, u_cplx) <= 1e-10);

  // General covariance: z A with Re z > 0.
  auto z_field = MatrixField::constant(Complex(2.0, 1.0) *
                                       Eigen::MatrixXcd::Identity(2, 2));
  auto z_sys = assemble(z_field, DriftField::zero(), domain);
  auto u_z = solve_dirichlet(z_sys, f);
  CHECK(max_abs_diff(u_real, u_z) <= 1e-10);
}

TEST_CASE("interior stiffness rows kill constants") {
  DomainParams params;
  auto domain = DiscreteDomain::build("square", params, 1.0 / 8);
  auto sys = assemble(MatrixField::preset("identity", 2), DriftField::zero(), domain);
  Eigen::VectorXcd ones = Eigen::VectorXcd::Ones(sys.mesh.nodes.size());
  Eigen::VectorXcd row_sums = sys.stiffness * ones;
  for (int i : sys.mesh.interior_nodes) CHECK(std::abs(row_sums[i]) <= 1e-12);
}

TEST_CASE("x^2 - y^2 is reproduced to solver tolerance on the diagonal split") {
  DiscreteDomain domain;
  auto u = solve_preset("square", 1.0 / 16, MatrixField::preset("identity", 2),
                        DriftField::zero(), BoundaryData::polynomial_trace("x2my2"),
                        &domain);
  auto mesh = Mesh::build(domain);
  const double err = max_nodal_error(mesh, u, [](const Vec& x) {
    return Complex(x.x() * x.x() - x.y() * x.y(), 0.0);
  });
  CHECK(err <= 1e-9);
}

TEST_CASE("manufactured harmonic solution converges at second order") {
  const auto exact = [](const Vec& x) {
    return Complex(std::exp(x.x()) * std::cos(x.y()), 0.0);
  };
  double prev = 0.0;
  int level = 0;
  for (double h : {1.0 / 8, 1.0 / 16, 1.0 / 32}) {
    DiscreteDomain domain;
    auto u = solve_preset("square", h, MatrixField::preset("identity", 2),
                          DriftField::zero(), BoundaryData::polynomial_trace("expcos"),
                          &domain);
    auto mesh = Mesh::build(domain);
    const double err = max_nodal_error(mesh, u, exact);
    if (level > 0) {
      const double ratio = prev / err;
      CHECK(ratio >= 3.2);
      CHECK(ratio <= 4.8);
    }
    prev = err;
    ++level;
  }
}

TEST_CASE("coercivity margin: identity and complex scalar fields give 1/2") {
  DomainParams params;
  auto domain = DiscreteDomain::build("square", params, 1.0 / 16);
  for (double tau : {0.0, 1.0}) {
    auto field = tau == 0.0 ? MatrixField::preset("identity", 2)
                            : MatrixField::preset("scalar_complex", 2, tau);
    auto sys = assemble(field, DriftField::zero(), domain);
    CHECK(coercivity_margin_exact(sys) == doctest::Approx(0.5).epsilon(1e-8));
    CHECK(sys.margin() > 0.0);
  }
}

TEST_CASE("large drift destroys coercivity and the solve refuses") {
  DomainParams params;
  auto domain = DiscreteDomain::build("square", params, 1.0 / 16);
  auto sys = assemble(MatrixField::preset("identity", 2),
                      DriftField::constant_direction(5.0, Vec::UnitX()), domain);
  CHECK(coercivity_margin_exact(sys) <= 0.0);
  CHECK_THROWS_AS(solve_dirichlet(sys, BoundaryData::constant(1.0)), ComputationError);

  auto report = sys.coercivity_report();
  CHECK(report.hardy_constant > 0.0);
  CHECK(report.analytic_lower <= 0.0);
}

TEST_CASE("drift continuity as K goes to zero") {
  DomainParams params;
  auto domain = DiscreteDomain::build("square", params, 1.0 / 16);
  const auto f = BoundaryData::polynomial_trace("x2my2");
  auto sys0 = assemble(MatrixField::preset("identity", 2), DriftField::zero(), domain);
  auto u0 = solve_dirichlet(sys0, f);

  double prev_err = 1e300;
  std::vector<double> errs;
  for (double K : {0.1, 0.05, 0.025}) {
    auto sys = assemble(MatrixField::preset("identity", 2),
                        DriftField::radial_inward(K), domain);
    auto u = solve_dirichlet(sys, f);
    const double err = max_abs_diff(u, u0);
    CHECK(err < prev_err);
    prev_err = err;
    errs.push_back(err);
  }
  // Observed decay is linear in K: halving K roughly halves the error.
  CHECK(errs[1] / errs[0] <= 0.7);
  CHECK(errs[2] / errs[1] <= 0.7);
}

TEST_CASE("drift block norm respects the Hardy-constant bound") {
  DomainParams params;
  auto domain = DiscreteDomain::build("square", params, 1.0 / 16);
  const double K = 0.1;
  auto sys0 = assemble(MatrixField::preset("identity", 2), DriftField::zero(), domain);
  auto sysK = assemble(MatrixField::preset("identity", 2),
                       DriftField::radial_inward(K), domain);
  const double hardy = hardy_check(domain);
  CHECK(hardy > 0.0);

  // |B[u,u] - B_0[u,u]| <= K sqrt(hardy) ||grad u||^2 on random interior vectors.
  std::srand(5);
  for (int t = 0; t < 20; ++t) {
    Eigen::VectorXcd u = Eigen::VectorXcd::Zero(sys0.mesh.nodes.size());
    for (int i : sys0.mesh.interior_nodes) {
      u[i] = Complex(std::rand() / (double)RAND_MAX - 0.5,
                     std::rand() / (double)RAND_MAX - 0.5);
    }
    const Complex drift_part = form_value(sysK, u, u) - form_value(sys0, u, u);
    const double grad2 = std::real(form_value(sys0, u, u));
    CHECK(std::abs(drift_part) <= K * std::sqrt(hardy) * grad2 * (1.0 + 1e-9));
  }
}

TEST_CASE("hardy check: stability, degeneracy, and boundary vanishing") {
  DomainParams params;
  auto c16 = DiscreteDomain::build("square", params, 1.0 / 16);
  auto c32 = DiscreteDomain::build("square", params, 1.0 / 32);
  const double h16 = hardy_check(c16);
  const double h32 = hardy_check(c32);
  CHECK(h16 > 0.0);
  CHECK(std::abs(h16 - h32) / h32 <= 0.10);

  // Zero member is degenerate and skipped.
  CHECK(hardy_check(c16, {[](const Vec&) { return 0.0; },
                          [&](const Vec& x) { return c16.boundary_distance(x); }}) ==
        doctest::Approx(hardy_check(c16, {[&](const Vec& x) {
          return c16.boundary_distance(x);
        }})));

  // Members must vanish on the boundary.
  CHECK_THROWS_AS(hardy_check(c16, {[](const Vec&) { return 1.0; }}), std::domain_error);

  // Tent at the center is dominated by the reported constant.
  const double tent = hardy_check(c16, {[](const Vec& x) {
    return std::max(0.0, 0.5 - std::max(std::abs(x.x() - 0.5), std::abs(x.y() - 0.5)));
  }});
  CHECK(tent <= h16 * (1.0 + 1e-9));
}

TEST_CASE("gradients follow the element differentiation rule") {
  DiscreteDomain domain;
  auto u = solve_preset("square", 1.0 / 16, MatrixField::preset("identity", 2),
                        DriftField::zero(), BoundaryData::polynomial_trace("linear_x"),
                        &domain);
  // u = x: gradient (1, 0) on every cell.
  for (const auto& g : u.gradient) {
    CHECK(std::abs(g[0] - Complex(1.0, 0.0)) <= 1e-9);
    CHECK(std::abs(g[1]) <= 1e-9);
  }
}
