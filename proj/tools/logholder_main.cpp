#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "logholder/experiments.hpp"
#include "logholder/verify.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitAssertion = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

// Geometric grid spec "r1..r2:steps".
std::vector<double> parse_grid_spec(const std::string& spec) {
  auto dots = spec.find("..");
  auto colon = spec.rfind(':');
  if (dots == std::string::npos || colon == std::string::npos || colon < dots) {
    throw logholder::ConfigError("grid spec must look like r1..r2:steps");
  }
  double lo = std::stod(spec.substr(0, dots));
  double hi = std::stod(spec.substr(dots + 2, colon - dots - 2));
  int steps = std::stoi(spec.substr(colon + 1));
  if (!(lo > 0.0 && hi > lo && steps >= 2)) {
    throw logholder::ConfigError("grid spec needs 0 < r1 < r2 and steps >= 2");
  }
  std::vector<double> out(steps);
  double q = std::pow(hi / lo, 1.0 / (steps - 1));
  double r = lo;
  for (int i = 0; i < steps; ++i, r *= q) out[i] = r;
  return out;
}

int run_command(const std::string& config_path, int threads) {
  logholder::ExperimentConfig cfg = logholder::load_config(config_path);
  if (threads > 0) cfg.threads = threads;

  logholder::EmpiricalMeasure final_measure = logholder::EmpiricalMeasure::delta(0.0);
  logholder::ExperimentReport report = logholder::run_iteration(cfg, &final_measure);
  bool meets = true;
  try {
    report.exponent = logholder::exponent_comparison(final_measure, cfg, report.summary);
    if (report.exponent->meets_target.has_value()) meets = *report.exponent->meets_target;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "exponent fit skipped: %s\n", e.what());
  }

  std::string dir = cfg.output_dir.empty() ? "logholder_out" : cfg.output_dir;
  logholder::write_report_files(report, dir);
  logholder::save_measure_csv(final_measure, dir + "/final_measure.csv");

  std::printf("steps: %zu  final e_pair: %.6g  lambda_hat: %.4f  c_tilde: %.6g\n",
              report.steps.size() - 1, report.steps.back().e_pair, report.summary.lambda_hat,
              report.summary.c_tilde_hat);
  if (report.exponent.has_value()) {
    std::printf("fitted exponent: %.4f (%s)\n", report.exponent->fit.alpha_hat,
                report.exponent->flag.c_str());
  }
  std::printf("report written to %s\n", dir.c_str());
  return meets ? kExitOk : kExitAssertion;
}

int verify_command(const std::string& suite, const std::string& tol_file,
                   const std::string& json_out, int threads) {
  if (threads > 0) logholder::set_thread_count(threads);
  logholder::Tolerances tol;
  if (!tol_file.empty()) {
    std::ifstream in(tol_file);
    if (!in) throw logholder::ConfigError("cannot open tolerance file " + tol_file);
    tol.apply(nlohmann::ordered_json::parse(in));
  }
  auto reports = logholder::verify_suites(suite, tol);
  bool all_passed = true;
  nlohmann::ordered_json verdict = nlohmann::ordered_json::array();
  for (const auto& r : reports) {
    for (const auto& c : r.checks) {
      std::printf("[%s] %s/%s  value=%.6g%s%s\n", c.passed ? "PASS" : "FAIL", r.suite.c_str(),
                  c.name.c_str(), c.value, c.note.empty() ? "" : "  ",
                  c.note.c_str());
    }
    std::printf("suite %s: %s (%.1fs)\n", r.suite.c_str(), r.passed() ? "PASS" : "FAIL",
                r.seconds);
    all_passed = all_passed && r.passed();
    verdict.push_back(logholder::suite_to_json(r));
  }
  if (!json_out.empty()) {
    std::ofstream out(json_out);
    out << verdict.dump(2) << "\n";
  } else {
    std::cout << verdict.dump(2) << "\n";
  }
  return all_passed ? kExitOk : kExitAssertion;
}

int fit_command(const std::string& csv, const std::string& radii_spec, std::size_t centers) {
  logholder::EmpiricalMeasure nu = logholder::load_measure_csv(csv);
  std::vector<double> radii = parse_grid_spec(radii_spec);
  logholder::LogHolderFit fit =
      logholder::fit_log_holder(nu, logholder::CircleGrid(centers), radii);
  nlohmann::ordered_json out;
  out["alpha_hat"] = fit.alpha_hat;
  out["c_hat"] = fit.c_hat;
  out["worst_center"] = fit.worst_center.position();
  out["r_min"] = fit.r_min;
  out["r_max"] = fit.r_max;
  out["residual"] = fit.residual;
  out["points_used"] = fit.points_used;
  std::cout << out.dump(2) << "\n";
  return kExitOk;
}

int kernel_table_command(double alpha, double eps, int dim, const std::string& r_spec,
                         const std::string& out_path) {
  logholder::KernelParams p(alpha, eps, dim);
  logholder::QuadratureSpec spec{1e-8, 1e-12, 40000};
  std::vector<double> rs = parse_grid_spec(r_spec);
  std::ostream* out = &std::cout;
  std::ofstream file;
  if (!out_path.empty()) {
    file.open(out_path);
    if (!file) throw std::runtime_error("cannot open " + out_path);
    out = &file;
  }
  (*out) << (eps > 0.0 ? "r,u,envelope\n" : "r,u\n");
  char buf[120];
  for (double r : rs) {
    double u = logholder::convolved_potential_cached(p, r, spec);
    if (eps > 0.0 && r < logholder::kSupportRadius) {
      std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g\n", r, u,
                    logholder::comparison_envelope(p, r));
    } else {
      std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", r, u);
    }
    (*out) << buf;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"logholder: energies, kernels and regularity estimation for random circle maps"};
  app.require_subcommand(1);

  std::string config_path, suite, tol_file, json_out, csv_path, radii_spec, r_spec, out_path;
  std::size_t centers = 256;
  double alpha = 1.0, eps = 1e-3;
  int dim = 1, threads = 0;

  auto* run = app.add_subcommand("run", "run a configured iteration experiment");
  run->add_option("config", config_path, "JSON or TOML experiment config")->required();
  run->add_option("--threads", threads, "worker thread count (0 = hardware)");

  auto* verify = app.add_subcommand("verify", "run an invariant verification suite");
  verify->add_option("suite", suite, "kernel | energy | measure | rds | all")->required();
  verify->add_option("--tol-file", tol_file, "JSON tolerance overrides");
  verify->add_option("--json-out", json_out, "write the JSON verdict to a file");
  verify->add_option("--threads", threads, "worker thread count (0 = hardware)");

  auto* fit = app.add_subcommand("fit", "fit a log-Hoelder exponent to a measure CSV");
  fit->add_option("measure", csv_path, "CSV with position,weight header")->required();
  fit->add_option("--radii", radii_spec, "geometric radii spec r1..r2:steps")->required();
  fit->add_option("--centers", centers, "number of candidate centers");

  auto* table = app.add_subcommand("kernel-table", "emit a CSV table of the convolved potential");
  table->add_option("--alpha", alpha, "regularity exponent")->required();
  table->add_option("--eps", eps, "cutoff (0 for the raw potential)")->required();
  table->add_option("--dim", dim, "ambient dimension 1..3")->required();
  table->add_option("--r-grid", r_spec, "geometric grid spec r1..r2:steps")->required();
  table->add_option("--out", out_path, "output file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (run->parsed()) return run_command(config_path, threads);
    if (verify->parsed()) return verify_command(suite, tol_file, json_out, threads);
    if (fit->parsed()) return fit_command(csv_path, radii_spec, centers);
    if (table->parsed()) return kernel_table_command(alpha, eps, dim, r_spec, out_path);
  } catch (const logholder::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const logholder::QuadratureError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return kExitNumerical;
  } catch (const logholder::GridTooCoarseError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return kExitNumerical;
  } catch (const logholder::SingularEvalError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return kExitNumerical;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitAssertion;
  }
  return kExitConfig;
}
