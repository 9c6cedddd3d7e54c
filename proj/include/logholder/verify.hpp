#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "logholder/energy.hpp"
#include "logholder/experiments.hpp"
#include "logholder/kernel.hpp"
#include "logholder/measure.hpp"
#include "logholder/rds.hpp"

namespace logholder {

// Named tolerances and windows for the verification suites. Values not
// taken from closed forms were produced by the quadrature/closed-form
// oracles in the test suite and frozen here.
struct Tolerances {
  double annulus_rel = 1e-6;
  double monotone_slack = 1e-6;
  // Appendix tail/strip ratios. The closed-form oracle gives
  // half_space_tail(k=1, alpha=1, r=1e-6) = 0.8774459204 and
  // middle_strip(k=1, alpha=1, r=1e-6) = 0.52092; the windows below wrap
  // those values.
  double half_space_window = 0.13;
  double half_space_k2_value = 0.67875832;
  double half_space_k2_tol = 2e-3;
  double middle_strip_at_1e6 = 0.55;
  double middle_strip_alpha_half_at_1e6 = 0.52;
  double envelope_ratio_lo = 0.8;
  double envelope_ratio_hi = 1.25;
  double triple_identity_rel = 1e-8;
  double variance_identity_rel = 1e-10;
  double comparability_lo = 0.8;
  double comparability_hi = 1.25;
  double comparability_energy_floor = 10.0;
  double averaged_ratio_lo = 0.8;
  double averaged_ratio_hi = 1.2;
  double stability_noise_band = 0.10;
  double planted_exponent_rel = 0.05;
  std::size_t force_energy_grid_size = 0;  // nonzero forces a coarse grid (failure demo)

  void apply(const nlohmann::ordered_json& overrides) {
    for (auto it = overrides.begin(); it != overrides.end(); ++it) {
      const std::string& k = it.key();
      if (k == "annulus_rel") annulus_rel = it.value().get<double>();
      else if (k == "monotone_slack") monotone_slack = it.value().get<double>();
      else if (k == "half_space_window") half_space_window = it.value().get<double>();
      else if (k == "half_space_k2_value") half_space_k2_value = it.value().get<double>();
      else if (k == "half_space_k2_tol") half_space_k2_tol = it.value().get<double>();
      else if (k == "middle_strip_at_1e6") middle_strip_at_1e6 = it.value().get<double>();
      else if (k == "middle_strip_alpha_half_at_1e6")
        middle_strip_alpha_half_at_1e6 = it.value().get<double>();
      else if (k == "envelope_ratio_lo") envelope_ratio_lo = it.value().get<double>();
      else if (k == "envelope_ratio_hi") envelope_ratio_hi = it.value().get<double>();
      else if (k == "triple_identity_rel") triple_identity_rel = it.value().get<double>();
      else if (k == "variance_identity_rel") variance_identity_rel = it.value().get<double>();
      else if (k == "comparability_lo") comparability_lo = it.value().get<double>();
      else if (k == "comparability_hi") comparability_hi = it.value().get<double>();
      else if (k == "comparability_energy_floor")
        comparability_energy_floor = it.value().get<double>();
      else if (k == "averaged_ratio_lo") averaged_ratio_lo = it.value().get<double>();
      else if (k == "averaged_ratio_hi") averaged_ratio_hi = it.value().get<double>();
      else if (k == "stability_noise_band") stability_noise_band = it.value().get<double>();
      else if (k == "planted_exponent_rel") planted_exponent_rel = it.value().get<double>();
      else if (k == "force_energy_grid_size")
        force_energy_grid_size = it.value().get<std::size_t>();
      else
        throw ConfigError("tolerance file: unknown key '" + k + "'");
    }
  }
};

struct CheckResult {
  std::string name;
  bool passed = false;
  double value = 0.0;
  std::string note;
};

struct SuiteReport {
  std::string suite;
  std::vector<CheckResult> checks;
  double seconds = 0.0;

  bool passed() const {
    for (const auto& c : checks) {
      if (!c.passed) return false;
    }
    return true;
  }
};

inline nlohmann::ordered_json suite_to_json(const SuiteReport& r) {
  nlohmann::ordered_json out;
  out["suite"] = r.suite;
  out["passed"] = r.passed();
  out["seconds"] = r.seconds;
  nlohmann::ordered_json checks = nlohmann::ordered_json::array();
  for (const auto& c : r.checks) {
    checks.push_back(nlohmann::ordered_json{
        {"name", c.name}, {"passed", c.passed}, {"value", c.value}, {"note", c.note}});
  }
  out["checks"] = checks;
  return out;
}

namespace verify_detail {

class Recorder {
 public:
  explicit Recorder(SuiteReport& report) : report_(report) {}

  void record(const std::string& name, bool passed, double value, const std::string& note = "") {
    report_.checks.push_back({name, passed, value, note});
  }

  // Collapses a family of pointwise conditions into one check carrying the
  // worst margin (negative margin = violation).
  void record_margin(const std::string& name, double worst_margin, const std::string& note = "") {
    report_.checks.push_back({name, worst_margin >= 0.0, worst_margin, note});
  }

 private:
  SuiteReport& report_;
};

inline EmpiricalMeasure mixture_measure(std::uint64_t seed, std::size_t n = 400) {
  // Half clustered in a short arc, half spread out; exercises both the
  // concentrated and diffuse regimes of the energy bounds.
  SeedStream rng = make_stream(seed, 0x6d6978ULL);
  std::vector<double> pos, w;
  double center = rng.next_unit();
  double arc = std::pow(10.0, -3.5 + 2.0 * rng.next_unit());
  for (std::size_t i = 0; i < n / 2; ++i) {
    pos.push_back(CirclePoint::reduce(center + (rng.next_unit() - 0.5) * arc));
    w.push_back(1.0);
  }
  for (std::size_t i = n / 2; i < n; ++i) {
    pos.push_back(rng.next_unit());
    w.push_back(1.0);
  }
  double total = static_cast<double>(n);
  for (auto& x : w) x /= total;
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < w.size(); ++i) s += w[i];
  w.back() = 1.0 - s;
  return EmpiricalMeasure(std::move(pos), std::move(w));
}

}  // namespace verify_detail

inline SuiteReport verify_kernel(const Tolerances& tol = {}) {
  auto t0 = std::chrono::steady_clock::now();
  SuiteReport report;
  report.suite = "kernel";
  verify_detail::Recorder rec(report);
  const QuadratureSpec spec{1e-9, 1e-13, 40000};

  {
    double worst = 0.0;
    for (double alpha : {0.5, 1.0, 2.0}) {
      for (int dim : {1, 2}) {
        for (double r : {std::exp(-2.0), std::exp(-3.0), std::exp(-5.0)}) {
          KernelParams p(alpha, 0.0, dim);
          double got = annulus_integral(p, r, spec);
          double want = kernel_constant(alpha, dim) * (std::pow(-std::log(r), alpha) - 1.0);
          worst = std::max(worst, std::fabs(got - want) / want);
        }
      }
    }
    rec.record("annulus_closed_form", worst <= tol.annulus_rel, worst,
               "max relative error over the (alpha, k, r) grid");
  }

  {
    // Part I: U non-increasing along r-ladders.
    double worst = 1e300;
    int points = 0;
    auto ladder_check = [&](const KernelParams& p, const std::vector<double>& ladder) {
      double prev = convolved_potential_cached(p, ladder.front(), spec);
      for (std::size_t i = 1; i < ladder.size(); ++i) {
        double v = convolved_potential_cached(p, ladder[i], spec);
        worst = std::min(worst, prev - v + tol.monotone_slack * std::max(1.0, prev));
        prev = v;
        ++points;
      }
    };
    for (double alpha : {0.25, 0.5, 1.0}) {
      for (double eps : {1e-3, 1e-4}) {
        KernelParams p(alpha, eps, 1);
        ladder_check(p, {0.0, 0.5 * eps, eps, 2.0 * eps, 1e-3, 3e-3, 1e-2, 0.05, 0.2, 0.5, 0.72});
      }
    }
    ladder_check(KernelParams(0.5, 1e-3, 2), {0.0, 1e-3, 1e-2, 0.1, 0.5});
    rec.record_margin("uaeps_I_monotone", worst, std::to_string(points) + " ladder steps");
  }

  {
    // Parts II and III on the configured windows.
    double worst2 = 1e300, worst3 = 1e300;
    int n2 = 0, n3 = 0;
    auto window_check = [&](int dim, double alpha, double eps, double r) {
      KernelParams p(alpha, eps, dim);
      double u = convolved_potential_cached(p, r, spec);
      double env = kernel_constant(alpha, dim) * std::pow(-std::log(r), alpha);
      worst2 = std::min(worst2, (2.0 * env - u) / env);
      ++n2;
      if (r > eps) {
        worst3 = std::min(worst3, (u - 0.5 * env) / env);
        ++n3;
      }
    };
    for (double alpha : {0.25, 0.5, 1.0}) {
      for (double eps : {1e-3, 1e-4, 1e-5}) {
        for (double r : {1e-2, 3e-3, 1e-3, 3e-4, 1e-4, 1e-5}) {
          window_check(1, alpha, eps, r);
        }
      }
    }
    for (double alpha : {0.5, 1.0}) {
      for (double r : {1e-2, 1e-3}) window_check(2, alpha, 1e-3, r);
    }
    rec.record_margin("uaeps_II_upper", worst2,
                      std::to_string(n2) + " points, margin in envelope units");
    rec.record_margin("uaeps_III_lower", worst3,
                      std::to_string(n3) + " points, margin in envelope units");
  }

  {
    // Part IV with delta = 0.5 on the window eps <= 1e-4, r <= 1e-3.
    double worst = 1e300;
    int pairs = 0;
    for (double alpha : {0.25, 0.5, 1.0}) {
      for (double eps : {1e-4, 1e-5}) {
        KernelParams p(alpha, eps, 1);
        std::vector<double> ladder;
        for (double r : {eps, 3.0 * eps, 1e-4, 3e-4, 1e-3}) {
          if (r >= eps && r <= 1e-3) ladder.push_back(r);
        }
        for (std::size_t i = 0; i < ladder.size(); ++i) {
          for (std::size_t j = i; j < ladder.size(); ++j) {
            double r1 = ladder[i], r2 = ladder[j];
            double u1 = convolved_potential_cached(p, r1, spec);
            double u2 = convolved_potential_cached(p, r2, spec);
            double bound = 1.5 * std::pow(std::log(r1) / std::log(r2), alpha) * u2;
            worst = std::min(worst, (bound - u1) / bound);
            ++pairs;
          }
        }
      }
    }
    rec.record_margin("uaeps_IV_log_ratio", worst,
                      std::to_string(pairs) + " ordered pairs at delta = 0.5");
  }

  {
    // Half-space tails: monotone approach to 1 plus frozen values.
    KernelParams p(1.0, 0.0, 1);
    double prev = 0.0;
    bool monotone = true;
    double v6 = 0.0;
    for (double r : {1e-3, 1e-4, 1e-5, 1e-6}) {
      double v = half_space_tail(p, r, spec);
      monotone = monotone && v > prev && v < 1.0;
      prev = v;
      v6 = v;
    }
    rec.record("tail_ratio_monotone", monotone, prev);
    rec.record("tail_ratio_window", std::fabs(v6 - 1.0) <= tol.half_space_window, v6,
               "closed-form value 0.8774459204 at r = 1e-6");
    KernelParams q(0.5, 0.0, 2);
    double v2 = half_space_tail(q, 1e-6, spec);
    rec.record("tail_ratio_k2",
               std::fabs(v2 - tol.half_space_k2_value) <= tol.half_space_k2_tol, v2,
               "quadrature oracle value 0.67876");
  }

  {
    KernelParams p(1.0, 0.0, 1);
    double v2 = middle_strip(p, 1e-2, spec);
    double v4 = middle_strip(p, 1e-4, spec);
    double v6 = middle_strip(p, 1e-6, spec);
    rec.record("middle_strip_decreasing", v2 > v4 && v4 > v6, v6);
    rec.record("middle_strip_smallest", v6 < tol.middle_strip_at_1e6, v6,
               "oracle value 0.52092");
    double vh = middle_strip(KernelParams(0.5, 0.0, 1), 1e-6, spec);
    rec.record("middle_strip_alpha_half", vh < tol.middle_strip_alpha_half_at_1e6, vh,
               "oracle value 0.50448");
  }

  {
    // Envelope ratio window at alpha = 1, plus approach checks at other alpha.
    double lo = 1e300, hi = 0.0;
    for (double eps : {1e-8, 1e-7, 1e-6}) {
      KernelParams p(1.0, eps, 1);
      for (double r : {0.0, 1e-6, 1e-5, 1e-4}) {
        double ratio = envelope_ratio(p, r, spec);
        lo = std::min(lo, ratio);
        hi = std::max(hi, ratio);
      }
    }
    rec.record("envelope_ratio_window",
               lo > tol.envelope_ratio_lo && hi < tol.envelope_ratio_hi,
               hi, "alpha = 1 grid over eps <= 1e-6, r <= 1e-4");
    double r6 = envelope_ratio(KernelParams(2.0, 1e-8, 1), 1e-6, spec);
    double r4 = envelope_ratio(KernelParams(2.0, 1e-8, 1), 1e-4, spec);
    rec.record("envelope_ratio_approach", std::fabs(r6 - 1.0) < std::fabs(r4 - 1.0), r6,
               "deeper scale sits closer to 1 at alpha = 2");
  }

  {
    // Rotational symmetry of the planar integral: two center placements
    // against the polar quadrature.
    KernelParams p(1.0, 2e-2, 2);
    const double r = 0.05;
    double u = convolved_potential_cached(p, r, spec);
    auto brute = [&](double ang) {
      const int n = 700;
      CappedPotential phi(p);
      const double cx = r * std::cos(ang), cy = r * std::sin(ang);
      const double lox = std::min(0.0, cx) - kSupportRadius;
      const double hix = std::max(0.0, cx) + kSupportRadius;
      const double loy = std::min(0.0, cy) - kSupportRadius;
      const double hiy = std::max(0.0, cy) + kSupportRadius;
      double hx = (hix - lox) / n, hy = (hiy - loy) / n;
      double acc = 0.0;
      for (int i = 0; i < n; ++i) {
        double x = lox + (i + 0.5) * hx;
        for (int j = 0; j < n; ++j) {
          double y = loy + (j + 0.5) * hy;
          acc += phi(std::hypot(x, y)) * phi(std::hypot(x - cx, y - cy));
        }
      }
      return acc * hx * hy;
    };
    double axis = brute(0.0);
    double rotated = brute(0.6458);
    double worst = std::max(std::fabs(axis - u), std::fabs(rotated - u)) / u;
    rec.record("planar_symmetry", worst < 5e-3, worst,
               "two center placements vs polar quadrature");
  }

  {
    // Capped potential: non-increasing and bounded by the plateau.
    KernelParams p(0.7, 1e-3, 1);
    double plateau = capped_potential(p, 0.0);
    double prev = plateau;
    bool ok = true;
    for (double x = 0.0; x <= 0.5; x += 0.0004) {
      double v = capped_potential(p, x);
      ok = ok && v <= plateau * (1 + 1e-14) && v <= prev * (1 + 1e-14);
      prev = v;
    }
    rec.record("capped_potential_shape", ok, plateau);
  }

  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

inline SuiteReport verify_energy(const Tolerances& tol = {}) {
  auto t0 = std::chrono::steady_clock::now();
  SuiteReport report;
  report.suite = "energy";
  verify_detail::Recorder rec(report);
  const QuadratureSpec spec{1e-9, 1e-13, 40000};

  if (tol.force_energy_grid_size > 0) {
    // Failure demonstration path: a grid that cannot resolve the cutoff.
    KernelParams p(1.0, 1e-4, 1);
    CircleGrid coarse(tol.force_energy_grid_size);
    try {
      density_on_grid(EmpiricalMeasure::delta(0.0, 128), p, coarse);
      rec.record("forced_coarse_grid", false, static_cast<double>(coarse.size()),
                 "expected a grid-too-coarse failure but none was raised");
    } catch (const GridTooCoarseError& e) {
      rec.record("forced_coarse_grid", false, static_cast<double>(coarse.size()),
                 std::string("grid-too-coarse: ") + e.what());
    }
    report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
  }

  {
    // Triple-integral identity on a fixed grid.
    KernelParams p(1.0, 2e-2, 1);
    CircleGrid grid(2000);
    EmpiricalMeasure nu = verify_detail::mixture_measure(501, 24);
    double e_tilde = grid_energy(nu, p, grid);
    KahanSum pairs;
    for (std::size_t i = 0; i < nu.size(); ++i) {
      for (std::size_t j = 0; j < nu.size(); ++j) {
        pairs.add(nu.weights()[i] * nu.weights()[j] *
                  interaction_kernel(CirclePoint(nu.positions()[i]),
                                     CirclePoint(nu.positions()[j]), p, grid));
      }
    }
    double rel = std::fabs(e_tilde - pairs.value()) / e_tilde;
    rec.record("triple_identity", rel <= tol.triple_identity_rel, rel);
  }

  {
    // Unconditional upper bound across parameter grid and measures.
    bool ok = true;
    double worst = 1e300;
    for (double alpha : {0.5, 1.0, 2.0}) {
      for (double eps : {1e-2, 1e-3}) {
        KernelParams p(alpha, eps, 1);
        EnergyContext ctx(p, spec);
        double bound = pair_energy_upper_bound(p);
        for (std::uint64_t s : {11ull, 12ull, 13ull}) {
          double e = pair_energy(verify_detail::mixture_measure(s), ctx);
          ok = ok && e <= bound;
          worst = std::min(worst, (bound - e) / bound);
        }
      }
    }
    rec.record("energy_upper_bound", ok, worst, "18 measure/parameter combinations");
  }

  {
    // Ball-mass lower bound, restated: nu(B_r)^2 (c/2)(-log 2r)^a <= E.
    bool ok = true;
    int tested = 0;
    for (double alpha : {0.5, 1.0}) {
      KernelParams p(alpha, 1e-4, 1);
      EnergyContext ctx(p, spec);
      double c = kernel_constant(alpha, 1);
      for (std::uint64_t s = 0; s < 10; ++s) {
        EmpiricalMeasure nu = verify_detail::mixture_measure(600 + s);
        double e = pair_energy(nu, ctx);
        SortedMeasure sorted(nu);
        for (double x : {0.0, 0.25, 0.5, 0.75}) {
          for (double r : {2e-4, 1e-3, 3e-3, 5e-3}) {
            double m = sorted.ball_mass(x, r);
            double lhs = m * m * 0.5 * c * std::pow(-std::log(2.0 * r), alpha);
            ok = ok && lhs <= e * (1.0 + 1e-12);
            ++tested;
          }
        }
      }
    }
    rec.record("ball_mass_lower_bound", ok, static_cast<double>(tested),
               "zero violations allowed");
  }

  {
    // Comparability sweep: e_tilde / e_pair enters the window once the
    // energy exceeds the calibrated floor.
    KernelParams p(1.0, 1e-3, 1);
    EnergyContext ctx(p, spec);
    CircleGrid grid(1 << 15);
    bool ok = true;
    double worst_lo = 1e300, worst_hi = 0.0;
    for (double arc : {1e-1, 1e-2, 1e-3, 1e-4, 1e-5}) {
      EmpiricalMeasure nu = EmpiricalMeasure::uniform_arc(0.37, arc, 1500, 2025);
      double e = pair_energy(nu, ctx);
      if (e < tol.comparability_energy_floor) continue;
      double ratio = grid_energy(nu, p, grid) / e;
      worst_lo = std::min(worst_lo, ratio);
      worst_hi = std::max(worst_hi, ratio);
      ok = ok && ratio > tol.comparability_lo && ratio < tol.comparability_hi;
    }
    rec.record("comparability_sweep", ok, worst_hi,
               "ratio window over the concentration sweep");
  }

  {
    // Hilbert variance identity and the averaging inequality it implies.
    CircleGrid grid(4096);
    KernelParams p(1.0, 1e-2, 1);
    auto mu = RandomMapFamily::sl2_heavy_tail(3.0, 0.2);
    EmpiricalMeasure nu = EmpiricalMeasure::uniform_arc(0.3, 1e-2, 200, 7);
    std::vector<GridDensity> densities;
    std::vector<double> weights;
    const std::size_t m = 12;
    for (std::size_t j = 0; j < m; ++j) {
      SeedStream stream = make_stream(99, 0x766172ULL, j);
      CircleMap f = sample_map(mu, stream);
      densities.push_back(density_on_grid(pushforward(nu, f), p, grid));
      weights.push_back(1.0 / static_cast<double>(m));
    }
    auto [lhs, rhs] = variance_identity_check(densities, weights);
    double rel = std::fabs(lhs - rhs) / std::max(1e-300, std::fabs(rhs));
    rec.record("variance_identity", rel <= tol.variance_identity_rel, rel);

    // Jensen consequence: energy of the mean density <= mean energy.
    std::vector<double> mean(grid.size(), 0.0);
    double mean_energy = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      for (std::size_t g = 0; g < grid.size(); ++g) {
        mean[g] += densities[j].values()[g] / static_cast<double>(m);
      }
      mean_energy += grid_energy(densities[j]) / static_cast<double>(m);
    }
    double e_mean = grid_energy(GridDensity(grid, std::move(mean)));
    rec.record("averaging_inequality", e_mean <= mean_energy * (1.0 + 1e-12),
               mean_energy - e_mean);
  }

  {
    // One-step Hoelder bound for an isometry and a kink map.
    KernelParams p(0.5, 1e-4, 1);
    EnergyContext ctx(p, spec);
    EmpiricalMeasure nu = EmpiricalMeasure::uniform_arc(0.3, 5e-4, 300, 15);
    auto [l1, r1] = one_step_holder_bound(nu, CircleMap::rotation(0.37), ctx, 0.5);
    auto [l2, r2] = one_step_holder_bound(nu, CircleMap::power_kink(0.5, 0.11), ctx, 0.5);
    rec.record("one_step_bound", l1 <= r1 && l2 <= r2, std::max(l1 / r1, l2 / r2),
               "lhs/rhs for rotation and kink");
  }

  {
    // Averaged one-step ratio for a heavy-tail family at small alpha.
    KernelParams p(0.5, 1e-3, 1);
    CircleGrid grid(1 << 15);
    EmpiricalMeasure nu = EmpiricalMeasure::uniform_arc(0.55, 2e-3, 300, 8);
    auto mu = RandomMapFamily::sl2_heavy_tail(3.0, 0.05);
    AveragedStepRatio r = averaged_step_ratio(mu, nu, p, grid, 32, 4);
    rec.record("averaged_step_ratio",
               r.ratio > tol.averaged_ratio_lo && r.ratio < tol.averaged_ratio_hi, r.ratio,
               "std error " + std::to_string(r.std_error));
  }

  {
    // Pushforward stability of the normalized squared-density measure
    // shrinks along the concentration sweep (up to the noise band).
    KernelParams p(1.0, 1e-3, 1);
    CircleGrid grid(1 << 15);
    CircleMap f = CircleMap::sine_perturbed(0.17, 0.3);
    double prev = 1e300;
    bool ok = true;
    double last = 0.0;
    for (double arc : {1e-1, 1e-2, 1e-3, 1e-4}) {
      EmpiricalMeasure nu = EmpiricalMeasure::uniform_arc(0.4, arc, 400, 19);
      double w = wasserstein_stability(nu, f, p, grid);
      ok = ok && w <= prev * (1.0 + tol.stability_noise_band);
      prev = w;
      last = w;
    }
    rec.record("stability_sweep", ok, last, "final-stage stability distance");
  }

  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

inline SuiteReport verify_measure(const Tolerances& tol = {}) {
  auto t0 = std::chrono::steady_clock::now();
  SuiteReport report;
  report.suite = "measure";
  verify_detail::Recorder rec(report);

  {
    bool ok = true;
    for (int trial = 0; trial < 12; ++trial) {
      EmpiricalMeasure a = verify_detail::mixture_measure(100 + trial, 60);
      EmpiricalMeasure b = verify_detail::mixture_measure(200 + trial, 40);
      EmpiricalMeasure c = verify_detail::mixture_measure(300 + trial, 50);
      double ab = wasserstein_circle(a, b);
      double ba = wasserstein_circle(b, a);
      double bc = wasserstein_circle(b, c);
      double ac = wasserstein_circle(a, c);
      ok = ok && ab >= 0.0 && ab <= 0.5 + 1e-12;
      ok = ok && std::fabs(ab - ba) <= 1e-13;
      ok = ok && ac <= ab + bc + 1e-12;
      ok = ok && wasserstein_circle(a, a) <= 1e-13;
    }
    rec.record("wasserstein_metric", ok, 0.0, "symmetry, triangle, identity");
  }

  {
    // diam(M) * TV dominates W on random grid densities.
    CircleGrid grid(256);
    SeedStream rng = make_stream(31);
    bool ok = true;
    double worst = 1e300;
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<double> v1(grid.size()), v2(grid.size());
      for (auto& x : v1) x = rng.next_unit();
      for (auto& x : v2) x = std::pow(rng.next_unit(), 2.0);
      GridDensity a = GridDensity(grid, v1).normalized();
      GridDensity b = GridDensity(grid, v2).normalized();
      double w = wasserstein_circle(a, b);
      double tv = total_variation(a, b);
      ok = ok && w <= 0.5 * tv + 1e-12;
      worst = std::min(worst, 0.5 * tv - w);
    }
    rec.record("wasserstein_tv_bound", ok, worst, "min slack of W <= TV/2");
  }

  {
    // Planted log-Hoelder profile recovered within tolerance.
    const double planted = 2.0;
    std::vector<double> radii;
    for (int j = 0; j < 10; ++j) radii.push_back(1e-3 * std::pow(1.6, j));
    std::vector<double> pos, w;
    auto add_mass = [&](double distance, double mass) {
      int pieces = static_cast<int>(std::ceil(mass / 1e-4));
      for (int q = 0; q < pieces; ++q) {
        pos.push_back(CirclePoint::reduce(0.25 + distance));
        w.push_back(mass / pieces);
      }
    };
    auto target = [&](double r) { return std::pow(-std::log(r), -planted); };
    add_mass(0.5 * radii[0], target(radii[0]));
    for (std::size_t j = 0; j + 1 < radii.size(); ++j) {
      add_mass(0.5 * (radii[j] + radii[j + 1]), target(radii[j + 1]) - target(radii[j]));
    }
    double rest = 1.0 - target(radii.back());
    SeedStream rng = make_stream(404);
    for (int i = 0; i < 20000; ++i) {
      pos.push_back(0.55 + 0.25 * rng.next_unit());
      w.push_back(rest / 20000);
    }
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < w.size(); ++i) s += w[i];
    w.back() = 1.0 - s;
    LogHolderFit fit = fit_log_holder(EmpiricalMeasure(std::move(pos), std::move(w)),
                                      CircleGrid(64), radii);
    double rel = std::fabs(fit.alpha_hat - planted) / planted;
    rec.record("planted_exponent", rel <= tol.planted_exponent_rel, fit.alpha_hat,
               "target exponent 2.0");
  }

  {
    // Monte-Carlo convolution concentration at a fixed seed.
    auto mu = RandomMapFamily::finite_support(
        {CircleMap::rotation(0.25), CircleMap::rotation(-0.25)}, {0.5, 0.5});
    EmpiricalMeasure d0 = EmpiricalMeasure::delta(0.0, 10000);
    EmpiricalMeasure out = convolve(mu, d0, 7);
    double m1 = ball_mass(out, CirclePoint(0.25), 1e-9);
    double sigma = std::sqrt(0.25 / 10000.0);
    rec.record("convolve_concentration", std::fabs(m1 - 0.5) <= 4.0 * sigma, m1,
               "binomial window at n = 1e4");
    rec.record("convolve_mass_preserved", std::fabs(out.total_weight() - 1.0) <= 1e-12,
               out.total_weight());
  }

  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

inline SuiteReport verify_rds(const Tolerances& = {}) {
  auto t0 = std::chrono::steady_clock::now();
  SuiteReport report;
  report.suite = "rds";
  verify_detail::Recorder rec(report);

  {
    std::vector<CircleMap> maps{
        CircleMap::rotation(0.37), CircleMap::sine_perturbed(0.1, 0.8),
        CircleMap::projective(2, 0.3, 0.5, 0.575), CircleMap::power_kink(0.35, 0.77)};
    bool ok = true;
    for (const auto& f : maps) {
      double prev = f.lift(0.0);
      for (int i = 1; i <= 4000; ++i) {
        double y = f.lift(static_cast<double>(i) / 4000.0);
        ok = ok && y > prev;
        prev = y;
      }
    }
    rec.record("increasing_lifts", ok, 0.0, "all four map kinds");
  }

  {
    CircleMap f = CircleMap::rotation(0.3183);
    SeedStream rng = make_stream(3);
    double worst = 0.0;
    for (int i = 0; i < 2000; ++i) {
      double x = rng.next_unit(), y = rng.next_unit();
      worst = std::max(worst, std::fabs(circle_distance(x, y) -
                                        circle_distance(f.apply_frac(x), f.apply_frac(y))));
    }
    rec.record("isometry_exact", worst <= 1e-15, worst);
  }

  {
    bool ok = true;
    std::vector<CircleMap> maps{CircleMap::sine_perturbed(0.3, 0.6),
                                CircleMap::projective(2, 0, 0, 0.5)};
    SeedStream rng = make_stream(17);
    for (const auto& f : maps) {
      double lip = lipschitz_constant(f);
      for (int i = 0; i < 2000; ++i) {
        double x = rng.next_unit(), y = rng.next_unit();
        double d = circle_distance(x, y);
        double fd = circle_distance(f.apply_frac(x), f.apply_frac(y));
        ok = ok && fd <= lip * d * (1 + 1e-12) + 1e-15 && fd >= d / lip * (1 - 1e-12) - 1e-15;
      }
    }
    rec.record("bilipschitz_sandwich", ok, 0.0);
  }

  {
    CircleMap kink = CircleMap::power_kink(0.5, 0.0);
    HolderConstants hc = holder_constants(kink);
    SeedStream rng = make_stream(23);
    bool ok = hc.exponent == 0.5;
    for (int i = 0; i < 3000; ++i) {
      double x = rng.next_unit(), z = rng.next_unit();
      double d = circle_distance(x, z);
      if (d == 0.0) continue;
      double fd = circle_distance(kink.apply_frac(x), kink.apply_frac(z));
      ok = ok && fd >= std::pow(d / hc.scale, 2.0 / hc.exponent) * (1 - 1e-10);
    }
    rec.record("holder_sandwich", ok, hc.scale, "power kink at exponent 0.5");
  }

  {
    auto mu = RandomMapFamily::sl2_heavy_tail(3.0, 0.2);
    double worst = 0.0;
    for (int i = 0; i < 300; ++i) {
      SeedStream s = make_stream(77, i);
      CircleMap f = sample_map(mu, s);
      const double* m = f.matrix();
      worst = std::max(worst, std::fabs(m[0] * m[3] - m[1] * m[2] - 1.0));
    }
    rec.record("determinant_preserved", worst <= 1e-12, worst);
  }

  {
    CircleMap f1 = CircleMap::rotation(0.25);
    CircleMap f2 = CircleMap::rotation(0.75);
    double sep = map_separation(f1, f2);
    double self_sep = map_separation(f1, f1);
    rec.record("no_deterministic_image_proxy", sep > 0.1 && self_sep == 0.0, sep,
               "two-map family separates; degenerate family does not");
  }

  {
    auto mu = RandomMapFamily::sl2_heavy_tail(2.0, 0.1);
    MomentEstimate m1 = moment_integral(mu, 1.0, 20000, 42);
    bool ok = std::fabs(m1.value - 0.4) <= 0.05 && m1.declared_finite;
    ok = ok && !mu.declared_moment_finite(2.5);
    rec.record("pareto_moment", ok, m1.value, "closed form 2 p s0/(p-1) = 0.4");
  }

  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

inline std::vector<SuiteReport> verify_suites(const std::string& name, const Tolerances& tol = {}) {
  if (name == "kernel") return {verify_kernel(tol)};
  if (name == "energy") return {verify_energy(tol)};
  if (name == "measure") return {verify_measure(tol)};
  if (name == "rds") return {verify_rds(tol)};
  if (name == "all") {
    return {verify_kernel(tol), verify_energy(tol), verify_measure(tol), verify_rds(tol)};
  }
  throw ConfigError("unknown verification suite '" + name + "'");
}

}  // namespace logholder
