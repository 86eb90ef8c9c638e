#include "pel/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

namespace pel {

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string ball_label(const char* kind, const Vec& x, double r) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "%s(%g,%g,%g;r=%g)", kind, x.x(), x.y(), x.z(), r);
  return buf;
}

double safe_pow_mod(double m, double e) {
  if (m <= 0.0) return 0.0;
  return std::pow(m, e);
}

}  // namespace

RHRecord interior_rh(const DiscreteDomain& domain, const SolutionField& u, const Vec& x,
                     double r, double q, double p, double p0, int refinement) {
  RHRecord rec;
  rec.ball_id = ball_label("interior", x, r);
  rec.radius = r;
  rec.q = q;
  rec.p = p;
  rec.refinement = refinement;
  if (q <= 0.0 || p <= 0.0) throw ConfigError("interior_rh: exponents must be positive");
  if (!domain.inside(x) || r >= 0.25 * domain.delta(x)) {
    rec.degenerate = true;
    rec.reason = "ball not compactly interior (needs r < delta(x)/4)";
    return rec;
  }
  if (std::isfinite(p0) && q >= p0) {
    rec.degenerate = true;
    rec.reason = "q not below the measured p0";
    return rec;
  }

  double vol1 = 0.0, vol2 = 0.0, sum_q = 0.0, sum_p = 0.0, sum_q_2r = 0.0;
  double grad_sum = 0.0;
  const auto& cells = domain.cells();
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const double dist = (cells[i].center - x).norm();
    if (dist >= 2.0 * r) continue;
    const double m = std::abs(u.cell_value[i]);
    const double vol = cells[i].volume;
    vol2 += vol;
    sum_p += vol * safe_pow_mod(m, p);
    sum_q_2r += vol * safe_pow_mod(m, q);
    if (dist < r) {
      vol1 += vol;
      sum_q += vol * safe_pow_mod(m, q);
      const double g2 = u.gradient[i].squaredNorm();
      if (m > 1e-300 || q >= 2.0) grad_sum += vol * g2 * safe_pow_mod(m, q - 2.0);
    }
  }
  if (vol1 <= 0.0 || vol2 <= 0.0) {
    rec.degenerate = true;
    rec.reason = "no cells inside the ball at this resolution";
    return rec;
  }
  rec.lhs = std::pow(sum_q / vol1, 1.0 / q);
  rec.rhs = std::pow(sum_p / vol2, 1.0 / p);
  rec.grad_lhs = grad_sum;
  rec.grad_rhs = sum_q_2r / (r * r);
  if (rec.rhs < 1e-14 && rec.lhs < 1e-14) {
    rec.degenerate = true;
    rec.reason = "solution vanishes on the ball";
    return rec;
  }
  rec.ratio = rec.lhs / rec.rhs;
  rec.grad_ratio = rec.grad_rhs > 0.0 ? rec.grad_lhs / rec.grad_rhs : 0.0;
  return rec;
}

RHRecord boundary_rh(const DiscreteDomain& domain, const SolutionField& u, const Vec& q_center,
                     double r, double q, double p, const BoundaryData& data,
                     int refinement) {
  RHRecord rec;
  rec.ball_id = ball_label("boundary", q_center, r);
  rec.radius = r;
  rec.q = q;
  rec.p = p;
  rec.refinement = refinement;
  if (q <= 0.0 || p <= 0.0) throw ConfigError("boundary_rh: exponents must be positive");

  const auto vals = face_values(domain, data);
  const auto& faces = domain.faces();
  for (std::size_t f = 0; f < faces.size(); ++f) {
    if ((faces[f].centroid - q_center).norm() < 2.0 * r && vals[f] > 1e-12) {
      throw std::domain_error("boundary_rh: datum does not vanish on 2B");
    }
  }

  double vol1 = 0.0, vol2 = 0.0, sum_q = 0.0, sum_p = 0.0, sum_q_ann = 0.0;
  double grad_sum = 0.0;
  const auto& cells = domain.cells();
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const double dist = (cells[i].center - q_center).norm();
    if (dist >= 2.0 * r) continue;
    const double m = std::abs(u.cell_value[i]);
    const double vol = cells[i].volume;
    vol2 += vol;
    sum_p += vol * safe_pow_mod(m, p);
    if (dist < r) {
      vol1 += vol;
      sum_q += vol * safe_pow_mod(m, q);
      const double g2 = u.gradient[i].squaredNorm();
      if (m > 1e-300 || q >= 2.0) grad_sum += vol * g2 * safe_pow_mod(m, q - 2.0);
    } else {
      sum_q_ann += vol * safe_pow_mod(m, q);
    }
  }
  if (vol1 <= 0.0 || vol2 <= 0.0) {
    rec.degenerate = true;
    rec.reason = "no cells inside the ball at this resolution";
    return rec;
  }
  rec.lhs = std::pow(sum_q / vol1, 1.0 / q);
  rec.rhs = std::pow(sum_p / vol2, 1.0 / p);
  rec.grad_lhs = grad_sum;
  rec.grad_rhs = sum_q_ann / (r * r);
  if (rec.rhs < 1e-14 && rec.lhs < 1e-14) {
    rec.degenerate = true;
    rec.reason = "solution vanishes on 2B";
    return rec;
  }
  rec.ratio = rec.lhs / rec.rhs;
  rec.grad_ratio = rec.grad_rhs > 0.0 ? rec.grad_lhs / rec.grad_rhs : 0.0;
  return rec;
}

bool truncated_cone_contained(const DiscreteDomain& domain, const ConeGeometry& cones,
                              const Vec& q_center, double d, double m) {
  const auto& faces = domain.faces();
  const auto& cells = domain.cells();
  std::vector<int> near_faces;
  for (std::size_t f = 0; f < faces.size(); ++f) {
    if ((faces[f].centroid - q_center).norm() < 2.0 * d) near_faces.push_back((int)f);
  }
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const double dq = (cells[i].center - q_center).norm();
    if (dq >= 4.0 * d) continue;  // |y-P| < 2d forces |y-Q| < 4d
    if (dq < m * d) continue;     // already inside T(m Delta)
    for (int f : near_faces) {
      if ((cells[i].center - faces[f].centroid).norm() < 2.0 * d &&
          cones.member((int)i, f)) {
        return false;
      }
    }
  }
  return true;
}

LocalizationRecord localization_ratio(const DiscreteDomain& domain, const NTReport& nt,
                                      const Vec& q_center, double d, double p, double q,
                                      double m, int refinement) {
  LocalizationRecord rec;
  rec.d = d;
  rec.m = m;
  rec.p = p;
  rec.q = q;
  rec.refinement = refinement;
  if (q > p || p <= 0.0) throw ConfigError("localization: needs 0 < q <= p");
  if (8.0 * m * d >= domain.diameter()) {
    rec.degenerate = true;
    rec.reason = "enlarged ball exceeds the domain";
    return rec;
  }

  const auto& faces = domain.faces();
  double sig1 = 0.0, sig2 = 0.0, sum_p = 0.0, sum_q = 0.0;
  for (std::size_t f = 0; f < faces.size(); ++f) {
    const double dist = (faces[f].centroid - q_center).norm();
    if (dist >= 8.0 * m * d) continue;
    if (nt.missing[f]) continue;
    const double v = nt.values[f];
    const double w = faces[f].weight;
    sig2 += w;
    sum_q += w * safe_pow_mod(v, q);
    if (dist < d) {
      sig1 += w;
      sum_p += w * safe_pow_mod(v, p);
    }
  }
  if (sig1 <= 0.0 || sig2 <= 0.0) {
    rec.degenerate = true;
    rec.reason = "surface ball holds no faces at this resolution";
    return rec;
  }
  rec.lhs = std::pow(sum_p / sig1, 1.0 / p);
  rec.rhs = std::pow(sum_q / sig2, 1.0 / q);
  if (rec.rhs < 1e-14 && rec.lhs < 1e-14) {
    rec.degenerate = true;
    rec.reason = "datum vanishes identically near Delta";
    return rec;
  }
  rec.ratio = rec.rhs > 0.0 ? rec.lhs / rec.rhs : infinity_sentinel();
  return rec;
}

LocalizationRecord localization_check(const DiscreteDomain& domain, const Operator& op,
                                      const Vec& q_center, double d,
                                      const BoundaryData& f, double p, double q,
                                      double m, double aperture, int refinement) {
  ConeGeometry cones(domain, aperture);
  if (!truncated_cone_contained(domain, cones, q_center, d, m)) {
    m = 4.0;  // triangle inequality: |y-Q| <= |y-P| + |P-Q| < 4d
  }

  const auto vals = face_values(domain, f);
  const auto& faces = domain.faces();
  for (std::size_t j = 0; j < faces.size(); ++j) {
    if ((faces[j].centroid - q_center).norm() < 16.0 * m * d && vals[j] > 1e-12) {
      throw std::domain_error("localization_check: datum does not vanish on 16m Delta");
    }
  }

  auto sys = assemble(op.field, op.drift, domain);
  auto u = solve_dirichlet(sys, f);
  auto nt = ntmax(cones, u, 2.0);
  return localization_ratio(domain, nt, q_center, d, p, q, m, refinement);
}

std::vector<BoundaryData> data_family(const DiscreteDomain& domain, int family_size,
                                      std::uint32_t seed) {
  if (family_size < 1) throw ConfigError("data_family: needs at least one member");
  std::vector<BoundaryData> out;
  out.push_back(BoundaryData::constant(Complex(1.0, 0.0)));
  if ((int)out.size() < family_size) out.push_back(BoundaryData::constant(Complex(0.6, 0.8)));
  if ((int)out.size() < family_size) out.push_back(BoundaryData::polynomial_trace("linear_x"));
  if ((int)out.size() < family_size) {
    out.push_back(BoundaryData::polynomial_trace(domain.dim() == 2 ? "x2my2" : "harmonic3d"));
  }
  if ((int)out.size() < family_size && domain.dim() == 2) {
    out.push_back(BoundaryData::polynomial_trace("expcos"));
  }
  if ((int)out.size() < family_size) {
    const auto& faces = domain.faces();
    out.push_back(BoundaryData::atom(faces.front().centroid, domain.diameter() / 8.0));
  }
  int k = 0;
  while ((int)out.size() < family_size) {
    out.push_back(BoundaryData::random_bumps(domain, seed * 1000u + (unsigned)k, 3 + k % 4,
                                             1.0));
    ++k;
  }
  return out;
}

std::vector<ScanRecord> solvability_scan(const std::vector<Operator>& operators,
                                         const ScanConfig& config) {
  if (config.hs.empty()) throw ConfigError("solvability_scan: no refinement levels");
  if (config.p_grid.empty()) throw ConfigError("solvability_scan: empty p grid");

  std::vector<ScanRecord> records;
  std::ostringstream fam;
  fam << "family" << config.family_size << ":seed" << config.seed;
  const std::string family_id = fam.str();

  const int n = config.domain_preset == "cube" ? 3 : 2;
  for (const auto& op : operators) {
    const auto report = p_ellipticity_range(op.field, n);
    const double endpoint = report.endpoint;

    // p -> c_hat per refinement, in refinement order.
    std::vector<std::vector<double>> c_hat(config.p_grid.size());
    for (std::size_t lev = 0; lev < config.hs.size(); ++lev) {
      DiscreteDomain domain =
          DiscreteDomain::build(config.domain_preset, config.params, config.hs[lev]);
      ConeGeometry cones(domain, config.aperture);
      const auto family = data_family(domain, config.family_size, config.seed);

      std::vector<double> best(config.p_grid.size(), 0.0);
      bool gap = false;
      try {
        auto sys = assemble(op.field, op.drift, domain);
        for (const auto& f : family) {
          auto u = solve_dirichlet(sys, f);
          auto nt = ntmax(cones, u, 2.0);
          const auto fvals = face_values(domain, f);
          for (std::size_t ip = 0; ip < config.p_grid.size(); ++ip) {
            const double p = config.p_grid[ip];
            const double denom = boundary_lp_norm(domain, fvals, p);
            if (denom <= 0.0) continue;
            const double ratio =
                boundary_lp_norm(domain, nt.values, p, &nt.missing) / denom;
            best[ip] = std::max(best[ip], ratio);
          }
        }
      } catch (const ComputationError&) {
        gap = true;  // solve refusal: recorded as an explicit gap, never silent
      }
      for (std::size_t ip = 0; ip < config.p_grid.size(); ++ip) {
        ScanRecord rec;
        rec.operator_id = op.id;
        rec.p = config.p_grid[ip];
        rec.data_family = family_id;
        rec.c_hat = gap ? std::numeric_limits<double>::quiet_NaN() : best[ip];
        rec.refinement = (int)lev;
        rec.predicted_endpoint = endpoint;
        if (gap) rec.verdict = "GAP";
        records.push_back(rec);
        c_hat[ip].push_back(rec.c_hat);
      }
    }

    // Verdict on the finest refinement: STABLE when c_hat grows by at most
    // the stability factor at every step.
    for (std::size_t ip = 0; ip < config.p_grid.size(); ++ip) {
      bool stable = true;
      bool gap = false;
      for (std::size_t lev = 0; lev < c_hat[ip].size(); ++lev) {
        if (std::isnan(c_hat[ip][lev])) gap = true;
        if (lev > 0 && !gap &&
            c_hat[ip][lev] > config.stability_factor * c_hat[ip][lev - 1] * (1 + 1e-12)) {
          stable = false;
        }
      }
      if (gap) continue;
      for (auto it = records.rbegin(); it != records.rend(); ++it) {
        if (it->operator_id == op.id && it->p == config.p_grid[ip]) {
          it->verdict = stable ? "STABLE" : "UNSTABLE";
          break;
        }
      }
    }
  }
  return records;
}

namespace {

void open_out(std::ofstream& out, const std::filesystem::path& p) {
  out.open(p, std::ios::binary | std::ios::trunc);
  if (!out) throw ComputationError("report_emit: cannot write " + p.string());
}

}  // namespace

void report_emit(const ReportBundle& bundle, const std::string& out_dir) {
  if (bundle.empty()) throw ConfigError("report_emit: no records");
  const std::filesystem::path dir(out_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ComputationError("report_emit: cannot create " + out_dir);

  if (!bundle.rh.empty()) {
    std::ofstream out;
    open_out(out, dir / "rh.csv");
    out << "ball_id,radius,q,p,lhs,rhs,ratio,grad_lhs,grad_rhs,grad_ratio,"
           "refinement,degenerate,reason\n";
    for (const auto& r : bundle.rh) {
      out << r.ball_id << ',' << num(r.radius) << ',' << num(r.q) << ',' << num(r.p)
          << ',' << num(r.lhs) << ',' << num(r.rhs) << ',' << num(r.ratio) << ','
          << num(r.grad_lhs) << ',' << num(r.grad_rhs) << ',' << num(r.grad_ratio)
          << ',' << r.refinement << ',' << (r.degenerate ? 1 : 0) << ',' << r.reason
          << '\n';
    }
  }
  if (!bundle.scan.empty()) {
    std::ofstream out;
    open_out(out, dir / "scan.csv");
    out << "operator_id,p,data_family,c_hat,refinement,predicted_endpoint,verdict\n";
    for (const auto& r : bundle.scan) {
      out << r.operator_id << ',' << num(r.p) << ',' << r.data_family << ','
          << num(r.c_hat) << ',' << r.refinement << ',' << num(r.predicted_endpoint)
          << ',' << r.verdict << '\n';
    }
  }
  if (!bundle.localization.empty()) {
    std::ofstream out;
    open_out(out, dir / "localization.csv");
    out << "d,m,p,q,lhs,rhs,ratio,refinement,degenerate,reason\n";
    for (const auto& r : bundle.localization) {
      out << num(r.d) << ',' << num(r.m) << ',' << num(r.p) << ',' << num(r.q) << ','
          << num(r.lhs) << ',' << num(r.rhs) << ',' << num(r.ratio) << ','
          << r.refinement << ',' << (r.degenerate ? 1 : 0) << ',' << r.reason << '\n';
    }
  }

  nlohmann::json summary;
  summary["schema"] = "pellipt-summary-v1";
  summary["config"] = bundle.config;
  summary["counts"] = {{"rh", bundle.rh.size()},
                       {"scan", bundle.scan.size()},
                       {"localization", bundle.localization.size()}};
  nlohmann::json verdicts = nlohmann::json::object();
  for (const auto& r : bundle.scan) {
    if (!r.verdict.empty()) {
      verdicts[r.operator_id]["p=" + num(r.p)] = r.verdict;
    }
  }
  summary["verdicts"] = verdicts;
  summary["stability_factor_note"] =
      "constants are estimated lower bounds; stability factor is a measurement "
      "convention";
  summary["extra"] = bundle.extra;
  std::ofstream out;
  open_out(out, dir / "summary.json");
  out << summary.dump(2) << '\n';
}

Rational::Rational(long long n, long long d) : num(n), den(d) {
  if (den == 0) throw ConfigError("Rational: zero denominator");
  if (den < 0) {
    num = -num;
    den = -den;
  }
  const long long g = std::gcd(num < 0 ? -num : num, den);
  if (g > 1) {
    num /= g;
    den /= g;
  }
}

Rational Rational::operator*(const Rational& o) const {
  return Rational(num * o.num, den * o.den);
}

Rational square_function_exponent(int n) {
  if (n < 3) throw ConfigError("square_function_exponent: needs n >= 3");
  // 1/r = 1/2 - 1/(2(n-1)), computed literally and then inverted.
  const Rational inv_r(1LL * (2 * (n - 1)) - 2LL, 2LL * 2 * (n - 1));
  return Rational(inv_r.den, inv_r.num);
}

Rational endpoint_exponent(int n, Rational s) {
  return square_function_exponent(n) * s * Rational(1, 2);
}

bool endpoint_identity_holds(int n, Rational s) {
  return endpoint_exponent(n, s) == s * Rational(n - 1, n - 2);
}

}  // namespace pel
