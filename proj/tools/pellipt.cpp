#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "pel/experiments.hpp"

using namespace pel;
using nlohmann::json;

namespace {

double parse_length(const std::string& s) {
  const auto slash = s.find('/');
  if (slash == std::string::npos) return std::stod(s);
  const double num = std::stod(s.substr(0, slash));
  const double den = std::stod(s.substr(slash + 1));
  if (den == 0.0) throw ConfigError("bad fraction: " + s);
  return num / den;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// JSON config file supplies defaults; explicitly passed flags win.
struct Resolver {
  json cfg = json::object();

  template <typename T>
  T get(const CLI::Option* opt, const std::string& key, T cli_value, T fallback) const {
    if (opt && opt->count() > 0) return cli_value;
    if (cfg.contains(key)) return cfg.at(key).get<T>();
    return fallback;
  }
};

std::filesystem::path output_root(const std::string& flag_value) {
  if (!flag_value.empty()) return flag_value;
  if (const char* env = std::getenv("PELLIPT_OUT")) return env;
  return "out";
}

MatrixField make_field(const std::string& preset, int dim, double tau,
                       const std::vector<double>& eigs, double base, double epsilon,
                       const std::string& csv) {
  if (preset == "grid_sampled") return MatrixField::grid_sampled_csv(csv, dim);
  return MatrixField::preset(preset, dim, tau, eigs, base, epsilon);
}

BoundaryData make_data(const std::string& spec, const DiscreteDomain& domain) {
  std::vector<std::string> parts;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ':')) parts.push_back(item);
  if (parts.empty()) throw ConfigError("empty data spec");
  if (parts[0] == "constant") {
    const double re = parts.size() > 1 ? std::stod(parts[1]) : 1.0;
    const double im = parts.size() > 2 ? std::stod(parts[2]) : 0.0;
    return BoundaryData::constant(Complex(re, im));
  }
  if (parts[0] == "poly") {
    if (parts.size() != 2) throw ConfigError("poly data spec needs a name");
    return BoundaryData::polynomial_trace(parts[1]);
  }
  if (parts[0] == "bumps") {
    const unsigned seed = parts.size() > 1 ? (unsigned)std::stoul(parts[1]) : 1u;
    const int count = parts.size() > 2 ? std::stoi(parts[2]) : 4;
    const double scale = parts.size() > 3 ? std::stod(parts[3]) : 1.0;
    return BoundaryData::random_bumps(domain, seed, count, scale);
  }
  if (parts[0] == "atom") {
    if (parts.size() != 4) throw ConfigError("atom data spec: atom:x:y:r");
    return BoundaryData::atom(Vec(std::stod(parts[1]), std::stod(parts[2]), 0.0),
                              std::stod(parts[3]));
  }
  throw ConfigError("unknown data spec: " + spec);
}

DriftField make_drift(const std::string& rule, double K, double decay) {
  if (rule == "zero" || K == 0.0) return DriftField::zero();
  if (rule == "radial") return DriftField::radial_inward(K, decay);
  if (rule == "direction") return DriftField::constant_direction(K, Vec::UnitX(), decay);
  throw ConfigError("unknown drift rule: " + rule);
}

void write_json(const std::filesystem::path& p, const json& j) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw ComputationError("cannot write " + p.string());
  out << j.dump(2) << '\n';
}

int run(int argc, char** argv) {
  CLI::App app{"p-ellipticity laboratory"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path, out_flag;
  int jobs = 1;
  app.add_option("--config", config_path, "JSON config with default values");
  app.add_option("--out", out_flag, "output root (default: $PELLIPT_OUT or ./out)");
  app.add_option("--jobs", jobs, "worker cap (modules are internally sequential)");

  // Shared flags, registered per subcommand.
  struct Common {
    std::string preset = "square", matrix = "identity", data = "constant:1",
                drift_rule = "zero", h = "1/32", csv;
    int dim = 2;
    double tau = 1.0, base = 1.0, epsilon = 0.0, K = 0.0, decay = 0.0;
    double p = 2.0, q = 2.0, aperture = 1.0, d = 0.125, m = 2.0, side = 1.0,
           slope = 1.0, period = 0.25;
    unsigned seed = 1;
    std::vector<double> eigs;
    CLI::Option *o_preset = nullptr, *o_matrix = nullptr, *o_data = nullptr,
                *o_drift = nullptr, *o_h = nullptr, *o_dim = nullptr, *o_tau = nullptr,
                *o_K = nullptr, *o_p = nullptr, *o_q = nullptr, *o_a = nullptr,
                *o_d = nullptr, *o_m = nullptr, *o_side = nullptr, *o_seed = nullptr;
  };
  auto add_common = [](CLI::App* cmd, Common& c) {
    cmd->set_help_flag("--help", "print help");
    c.o_preset = cmd->add_option("--preset", c.preset, "domain or matrix preset");
    c.o_matrix = cmd->add_option("--matrix", c.matrix, "matrix preset");
    c.o_data = cmd->add_option("--data", c.data, "boundary datum spec");
    c.o_drift = cmd->add_option("--drift", c.drift_rule, "drift rule");
    c.o_h = cmd->add_option("--h", c.h, "mesh size, decimal or fraction");
    c.o_dim = cmd->add_option("--dim", c.dim, "ambient dimension");
    c.o_tau = cmd->add_option("--tau", c.tau, "scalar_complex parameter");
    cmd->add_option("--eigs", c.eigs, "real_spd eigenvalues");
    cmd->add_option("--base", c.base, "perturbed_real base");
    cmd->add_option("--epsilon", c.epsilon, "perturbed_real epsilon");
    cmd->add_option("--csv", c.csv, "grid_sampled CSV path");
    c.o_K = cmd->add_option("--K", c.K, "drift strength");
    cmd->add_option("--decay", c.decay, "drift decay exponent");
    c.o_p = cmd->add_option("--p", c.p, "exponent p");
    c.o_q = cmd->add_option("--q", c.q, "exponent q");
    c.o_a = cmd->add_option("--a", c.aperture, "cone aperture");
    c.o_d = cmd->add_option("--d", c.d, "surface ball radius");
    c.o_m = cmd->add_option("--m", c.m, "enlargement factor");
    c.o_side = cmd->add_option("--side", c.side, "domain side length");
    cmd->add_option("--slope", c.slope, "graph slope");
    cmd->add_option("--period", c.period, "graph period");
    c.o_seed = cmd->add_option("--seed", c.seed, "random seed");
  };

  Common ell, cert, solve_c, nt, rh_c, loc, ext;
  auto* cmd_ell = app.add_subcommand("ellipticity", "p-ellipticity range of a field");
  add_common(cmd_ell, ell);
  auto* cmd_cert = app.add_subcommand("certify", "chord-arc certification");
  add_common(cmd_cert, cert);
  auto* cmd_solve = app.add_subcommand("solve", "Dirichlet solve");
  add_common(cmd_solve, solve_c);
  auto* cmd_nt = app.add_subcommand("ntmax", "nontangential maximal function");
  add_common(cmd_nt, nt);
  auto* cmd_rh = app.add_subcommand("rh", "reverse Holder campaign");
  add_common(cmd_rh, rh_c);
  auto* cmd_loc = app.add_subcommand("localize", "localization campaign");
  add_common(cmd_loc, loc);
  auto* cmd_ext = app.add_subcommand("extrapolate", "solvability scan");
  add_common(cmd_ext, ext);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;  // unknown flags and malformed arguments are configuration errors
  }

  Resolver res;
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) throw ConfigError("cannot read config " + config_path);
    in >> res.cfg;
  }
  const auto out_dir = output_root(out_flag);

  auto resolve = [&](Common& c, const std::string& domain_default_h) {
    c.preset = res.get(c.o_preset, "preset", c.preset, c.preset);
    c.matrix = res.get(c.o_matrix, "matrix", c.matrix, c.matrix);
    c.data = res.get(c.o_data, "data", c.data, c.data);
    c.drift_rule = res.get(c.o_drift, "drift", c.drift_rule, c.drift_rule);
    c.h = res.get(c.o_h, "h", c.h, domain_default_h);
    c.dim = res.get(c.o_dim, "dim", c.dim, c.dim);
    c.tau = res.get(c.o_tau, "tau", c.tau, c.tau);
    c.K = res.get(c.o_K, "K", c.K, c.K);
    c.p = res.get(c.o_p, "p", c.p, c.p);
    c.q = res.get(c.o_q, "q", c.q, c.q);
    c.aperture = res.get(c.o_a, "a", c.aperture, c.aperture);
    c.d = res.get(c.o_d, "d", c.d, c.d);
    c.m = res.get(c.o_m, "m", c.m, c.m);
    c.side = res.get(c.o_side, "side", c.side, c.side);
    c.seed = res.get(c.o_seed, "seed", c.seed, c.seed);
  };
  auto resolved_json = [&](const Common& c) {
    json j;
    j["preset"] = c.preset;
    j["matrix"] = c.matrix;
    j["data"] = c.data;
    j["drift"] = c.drift_rule;
    j["h"] = c.h;
    j["dim"] = c.dim;
    j["tau"] = c.tau;
    j["K"] = c.K;
    j["p"] = c.p;
    j["q"] = c.q;
    j["a"] = c.aperture;
    j["d"] = c.d;
    j["m"] = c.m;
    j["side"] = c.side;
    j["seed"] = c.seed;
    j["jobs"] = jobs;
    return j;
  };
  auto domain_params = [](const Common& c) {
    DomainParams params;
    params.side = c.side;
    params.slope = c.slope;
    params.period = c.period;
    return params;
  };

  if (*cmd_ell) {
    resolve(ell, "1/32");
    auto field = make_field(ell.o_preset->count() ? ell.preset : ell.matrix, ell.dim,
                            ell.tau, ell.eigs, ell.base, ell.epsilon, ell.csv);
    auto report = p_ellipticity_range(field, ell.dim);
    std::printf("mu = %.7f\n", report.mu);
    std::printf("p_lower = %.7f\np0 = %.7f\nendpoint = %.7f\n", report.p_lower,
                report.p_upper, report.endpoint);
    json j;
    j["config"] = resolved_json(ell);
    j["mu"] = report.mu;
    j["p_lower"] = report.p_lower;
    j["p0"] = report.p_upper;
    j["endpoint"] = report.endpoint;
    json curve = json::array();
    for (const auto& [p, lam] : report.lambda_samples) curve.push_back({p, lam});
    j["lambda_samples"] = curve;
    write_json(out_dir / "ellipticity.json", j);
    return 0;
  }

  if (*cmd_cert) {
    resolve(cert, "1/64");
    auto domain = DiscreteDomain::build(cert.preset, domain_params(cert),
                                        parse_length(cert.h));
    auto certificate = certify(domain, domain.dyadic_scales());
    json j = json::parse(certificate.to_json());
    j["config"] = resolved_json(cert);
    write_json(out_dir / "certificate.json", j);
    std::printf("certified=%s adr=%.6f\n", certificate.ok ? "true" : "false",
                certificate.adr_constant);
    return certificate.ok ? 0 : 3;
  }

  if (*cmd_solve || *cmd_nt) {
    Common& c = *cmd_solve ? solve_c : nt;
    resolve(c, "1/32");
    auto domain = DiscreteDomain::build(c.preset, domain_params(c), parse_length(c.h));
    auto field = make_field(c.matrix, domain.dim(), c.tau, c.eigs, c.base, c.epsilon,
                            c.csv);
    auto sys = assemble(field, make_drift(c.drift_rule, c.K, c.decay), domain);
    auto f = make_data(c.data, domain);
    auto u = solve_dirichlet(sys, f);

    if (f.tag == "constant") {
      // Constants solve the equation for every admissible operator.
      const Complex cval = f.eval(Vec::Zero());
      for (const auto& v : u.nodal) {
        if (std::abs(v - cval) > 1e-10) {
          std::fprintf(stderr, "invariant violated: constant datum not preserved\n");
          return 1;
        }
      }
    }

    json j;
    j["config"] = resolved_json(c);
    j["residual"] = u.residual;
    j["nodes"] = u.nodal.size();

    std::filesystem::create_directories(out_dir);
    if (*cmd_solve) {
      std::ofstream csv(out_dir / "solution.csv", std::ios::binary | std::ios::trunc);
      csv << "cell,re,im\n";
      for (std::size_t i = 0; i < u.cell_value.size(); ++i) {
        csv << i << ',' << fmt(u.cell_value[i].real()) << ','
            << fmt(u.cell_value[i].imag()) << '\n';
      }
      write_json(out_dir / "solution.json", j);
      std::printf("solved: %zu nodes, residual %.3e\n", u.nodal.size(), u.residual);
    } else {
      ConeGeometry cones(domain, c.aperture);
      auto rep = ntmax(cones, u, c.p);
      std::ofstream csv(out_dir / "ntmax.csv", std::ios::binary | std::ios::trunc);
      csv << "face,value,missing\n";
      for (std::size_t fidx = 0; fidx < rep.values.size(); ++fidx) {
        csv << fidx << ',' << fmt(rep.values[fidx]) << ',' << (int)rep.missing[fidx]
            << '\n';
      }
      j["p"] = rep.p;
      j["a"] = rep.aperture;
      j["missing_count"] = rep.missing_count;
      write_json(out_dir / "ntmax.json", j);
      std::printf("ntmax: %zu faces, %d missing\n", rep.values.size(),
                  rep.missing_count);
    }
    return 0;
  }

  if (*cmd_rh) {
    resolve(rh_c, "1/32");
    ReportBundle bundle;
    bundle.config = resolved_json(rh_c);
    const std::vector<double> hs = {1.0 / 16, 1.0 / 32, 1.0 / 64};
    for (double tau : {0.0, 1.0}) {
      for (double K : {0.0, 0.05}) {
        auto field = tau == 0.0 ? MatrixField::preset("identity", 2)
                                : MatrixField::preset("scalar_complex", 2, tau);
        auto drift = K == 0.0 ? DriftField::zero() : DriftField::radial_inward(K);
        for (std::size_t lev = 0; lev < hs.size(); ++lev) {
          auto domain = DiscreteDomain::build("square", DomainParams{}, hs[lev]);
          auto sys = assemble(field, drift, domain);
          auto uc = solve_dirichlet(sys, BoundaryData::constant(1.0));
          auto rc = interior_rh(domain, uc, Vec(0.5, 0.5, 0.0), 1.0 / 16, 4.0, 2.0,
                                infinity_sentinel(), (int)lev);
          if (!rc.degenerate && std::abs(rc.ratio - 1.0) > 1e-9) {
            std::fprintf(stderr, "invariant violated: constant interior ratio != 1\n");
            return 1;
          }
          bundle.rh.push_back(rc);

          auto u = solve_dirichlet(sys, BoundaryData::polynomial_trace("x2my2"));
          bundle.rh.push_back(interior_rh(domain, u, Vec(0.5, 0.5, 0.0), 1.0 / 16, 4.0,
                                          2.0, infinity_sentinel(), (int)lev));
          auto atom = BoundaryData::atom(Vec(0.5, 1.0, 0.0), 1.0 / 8);
          auto ua = solve_dirichlet(sys, atom);
          for (double p : {0.5, 1.0, 2.0}) {
            bundle.rh.push_back(boundary_rh(domain, ua, Vec(0.5, 0.0, 0.0), 1.0 / 8,
                                            2.0, p, atom, (int)lev));
          }
        }
      }
    }
    report_emit(bundle, (out_dir / "rh").string());
    std::printf("rh campaign: %zu records\n", bundle.rh.size());
    return 0;
  }

  if (*cmd_loc) {
    resolve(loc, "1/32");
    if (loc.o_p->count() == 0 && !res.cfg.contains("p")) loc.p = 4.0;
    ReportBundle bundle;
    bundle.config = resolved_json(loc);
    DomainParams params;
    params.side = 8.0;
    auto domain = DiscreteDomain::build("square", params, parse_length(loc.h));
    Operator op{"identity", MatrixField::preset("identity", 2), DriftField::zero()};
    const Vec q_center(4.0, 0.0, 0.0);
    auto f = BoundaryData::zero_on(q_center, 8.0,
                                   BoundaryData::random_bumps(domain, loc.seed, 6, 1.0));
    for (double d : {1.0 / 32, 1.0 / 16, 1.0 / 8}) {
      bundle.localization.push_back(localization_check(
          domain, op, q_center, d, f, loc.p, loc.q, loc.m, loc.aperture, 0));
    }
    report_emit(bundle, (out_dir / "localize").string());
    std::printf("localization: %zu records\n", bundle.localization.size());
    return 0;
  }

  if (*cmd_ext) {
    resolve(ext, "1/8");
    ScanConfig config;
    config.domain_preset = ext.preset;
    config.params = domain_params(ext);
    config.hs = ext.preset == "cube" ? std::vector<double>{1.0 / 4, 1.0 / 8}
                                     : std::vector<double>{1.0 / 8, 1.0 / 16, 1.0 / 32};
    config.p_grid = {2.0, 4.0, 8.0, 16.0};
    config.seed = ext.seed;
    config.aperture = ext.aperture;
    std::vector<Operator> ops;
    if (ext.matrix == "identity") {
      ops.push_back({"identity",
                     MatrixField::preset("identity", ext.preset == "cube" ? 3 : 2),
                     DriftField::zero()});
    } else {
      ops.push_back({"scalar_complex:" + fmt(ext.tau),
                     MatrixField::preset("scalar_complex", ext.preset == "cube" ? 3 : 2,
                                         ext.tau),
                     DriftField::zero()});
    }
    ReportBundle bundle;
    bundle.config = resolved_json(ext);
    bundle.scan = solvability_scan(ops, config);
    for (const auto& rec : bundle.scan) {
      if (rec.data_family.rfind("family", 0) == 0 && rec.c_hat == rec.c_hat &&
          rec.c_hat <= 0.0) {
        std::fprintf(stderr, "invariant violated: nonpositive scan constant\n");
        return 1;
      }
    }
    report_emit(bundle, (out_dir / "extrapolate").string());
    std::printf("scan: %zu records\n", bundle.scan.size());
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return 2;
  } catch (const std::domain_error& e) {
    std::fprintf(stderr, "domain error: %s\n", e.what());
    return 2;
  } catch (const ComputationError& e) {
    std::fprintf(stderr, "computation error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
}
