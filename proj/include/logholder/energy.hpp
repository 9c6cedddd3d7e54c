#pragma once

#include <cmath>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "logholder/kernel.hpp"
#include "logholder/measure.hpp"
#include "logholder/parallel.hpp"
#include "logholder/quadrature.hpp"
#include "logholder/rds.hpp"

namespace logholder {

/// Unconditional upper bound omega_k (-log eps)^(alpha-1) / (e^k eps^k)
/// on the pair energy of any probability measure.
inline double pair_energy_upper_bound(const KernelParams& p) {
  if (!(p.eps > 0.0)) throw std::invalid_argument("pair_energy_upper_bound: requires eps > 0");
  return unit_ball_volume(p.dim) * std::pow(-std::log(p.eps), p.alpha - 1.0) /
         (std::exp(static_cast<double>(p.dim)) * std::pow(p.eps, static_cast<double>(p.dim)));
}

struct PairEnergyOptions {
  std::size_t dedupe_limit = 512;    // below: try exact quadrature on deduplicated distances
  std::size_t max_exact_evals = 4096;  // dedupe fallback guard for generic positions
  std::size_t exact_limit = 20000;   // below: exact O(n^2) sum over the table
  std::size_t sample_pairs = 10000000;
  std::uint64_t seed = 1;
};

struct PairEnergyResult {
  double value = 0.0;
  double std_error = 0.0;  // zero for the exact paths
  std::string method;
};

/// Shared evaluation state for one kernel parameter set: the quadrature
/// spec and the lazily built interpolation table for U.
class EnergyContext {
 public:
  EnergyContext(const KernelParams& p, QuadratureSpec spec = {},
                std::size_t uniform_nodes = 1025, std::size_t log_nodes = 4097)
      : params_(p), spec_(spec), uniform_nodes_(uniform_nodes), log_nodes_(log_nodes) {}

  const KernelParams& params() const { return params_; }
  const QuadratureSpec& spec() const { return spec_; }

  const PotentialTable& table() const {
    if (!table_) {
      table_ = std::make_shared<PotentialTable>(params_, spec_, uniform_nodes_, log_nodes_);
    }
    return *table_;
  }

 private:
  KernelParams params_;
  QuadratureSpec spec_;
  std::size_t uniform_nodes_, log_nodes_;
  mutable std::shared_ptr<PotentialTable> table_;
};

namespace detail {

inline PairEnergyResult pair_energy_table(const EmpiricalMeasure& nu, const EnergyContext& ctx);

// Exact quadrature on the deduplicated distance multiset. Pays off for
// structured measures (grids, replicated deltas) whose distance sets are
// small; generic clouds fall back to the interpolation table.
inline PairEnergyResult pair_energy_dedupe(const EmpiricalMeasure& nu, const EnergyContext& ctx,
                                           std::size_t max_exact_evals) {
  const auto& pos = nu.positions();
  const auto& w = nu.weights();
  const std::size_t n = pos.size();
  std::vector<std::pair<double, double>> terms;  // (distance, pair weight)
  terms.reserve(n * (n + 1) / 2);
  double diag = 0.0;
  for (std::size_t i = 0; i < n; ++i) diag += w[i] * w[i];
  terms.push_back({0.0, diag});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      terms.push_back({circle_distance(pos[i], pos[j]), 2.0 * w[i] * w[j]});
    }
  }
  std::sort(terms.begin(), terms.end());
  std::vector<double> dists;
  std::vector<double> weights;
  for (const auto& [d, pw] : terms) {
    if (!dists.empty() && dists.back() == d) {
      weights.back() += pw;
    } else {
      dists.push_back(d);
      weights.push_back(pw);
    }
  }
  if (dists.size() > max_exact_evals) return pair_energy_table(nu, ctx);
  auto values = convolved_potential_batch(ctx.params(), dists, ctx.spec());
  KahanSum acc;
  for (std::size_t i = 0; i < dists.size(); ++i) acc.add(weights[i] * values[i]);
  return {acc.value(), 0.0, "dedupe-exact"};
}

inline PairEnergyResult pair_energy_table(const EmpiricalMeasure& nu, const EnergyContext& ctx) {
  const auto& pos = nu.positions();
  const auto& w = nu.weights();
  const std::size_t n = pos.size();
  const PotentialTable& u = ctx.table();
  double value = parallel_sum(n, 128, [&](std::size_t b, std::size_t e) {
    KahanSum acc;
    for (std::size_t i = b; i < e; ++i) {
      acc.add(w[i] * w[i] * u(0.0));
      const double xi = pos[i];
      for (std::size_t j = i + 1; j < n; ++j) {
        double d = std::fabs(pos[j] - xi);
        if (d > 0.5) d = 1.0 - d;
        acc.add(2.0 * w[i] * w[j] * u(d));
      }
    }
    return acc.value();
  });
  return {value, 0.0, "table-pairwise"};
}

// Walker alias table for weighted atom sampling.
class AliasTable {
 public:
  explicit AliasTable(const std::vector<double>& w) : prob_(w.size()), alias_(w.size()) {
    const std::size_t n = w.size();
    double total = 0.0;
    for (double x : w) total += x;
    std::vector<double> scaled(n);
    std::vector<std::size_t> small, large;
    for (std::size_t i = 0; i < n; ++i) {
      scaled[i] = w[i] / total * static_cast<double>(n);
      (scaled[i] < 1.0 ? small : large).push_back(i);
    }
    while (!small.empty() && !large.empty()) {
      std::size_t s = small.back(), l = large.back();
      small.pop_back();
      large.pop_back();
      prob_[s] = scaled[s];
      alias_[s] = l;
      scaled[l] = (scaled[l] + scaled[s]) - 1.0;
      (scaled[l] < 1.0 ? small : large).push_back(l);
    }
    for (std::size_t s : small) prob_[s] = 1.0, alias_[s] = s;
    for (std::size_t l : large) prob_[l] = 1.0, alias_[l] = l;
  }

  std::size_t draw(SeedStream& rng) const {
    double u = rng.next_unit() * static_cast<double>(prob_.size());
    std::size_t i = std::min(static_cast<std::size_t>(u), prob_.size() - 1);
    double frac = u - static_cast<double>(i);
    return frac < prob_[i] ? i : alias_[i];
  }

 private:
  std::vector<double> prob_;
  std::vector<std::size_t> alias_;
};

inline PairEnergyResult pair_energy_sampled(const EmpiricalMeasure& nu, const EnergyContext& ctx,
                                            const PairEnergyOptions& opts) {
  const auto& pos = nu.positions();
  const PotentialTable& u = ctx.table();
  AliasTable alias(nu.weights());
  const std::size_t m = opts.sample_pairs;
  std::vector<double> part_sum, part_sq;
  const std::size_t chunk = 1 << 16;
  const std::size_t n_chunks = (m + chunk - 1) / chunk;
  part_sum.assign(n_chunks, 0.0);
  part_sq.assign(n_chunks, 0.0);
  parallel_chunks(m, chunk, [&](std::size_t c, std::size_t b, std::size_t e) {
    KahanSum s, s2;
    for (std::size_t t = b; t < e; ++t) {
      SeedStream rng = make_stream(opts.seed, 0x70616972ULL, t);
      std::size_t i = alias.draw(rng);
      std::size_t j = alias.draw(rng);
      double d = std::fabs(pos[i] - pos[j]);
      if (d > 0.5) d = 1.0 - d;
      double x = u(d);
      s.add(x);
      s2.add(x * x);
    }
    part_sum[c] = s.value();
    part_sq[c] = s2.value();
  });
  KahanSum s, s2;
  for (std::size_t c = 0; c < n_chunks; ++c) {
    s.add(part_sum[c]);
    s2.add(part_sq[c]);
  }
  double mean = s.value() / static_cast<double>(m);
  double var = std::max(0.0, s2.value() / static_cast<double>(m) - mean * mean);
  return {mean, std::sqrt(var / static_cast<double>(m)), "sampled"};
}

}  // namespace detail

/// Pair energy sum_ij w_i w_j U(d(x_i, x_j)), diagonal included. Exact on
/// deduplicated distances for small atom sets, exact over the interpolation
/// table up to exact_limit atoms, unbiased random-pair estimate beyond.
inline PairEnergyResult pair_energy_detail(const EmpiricalMeasure& nu, const EnergyContext& ctx,
                                           const PairEnergyOptions& opts = {}) {
  if (!(ctx.params().eps > 0.0)) {
    throw std::invalid_argument("pair_energy: requires eps > 0");
  }
  if (nu.size() <= opts.dedupe_limit) {
    return detail::pair_energy_dedupe(nu, ctx, opts.max_exact_evals);
  }
  if (nu.size() <= opts.exact_limit) return detail::pair_energy_table(nu, ctx);
  return detail::pair_energy_sampled(nu, ctx, opts);
}

inline double pair_energy(const EmpiricalMeasure& nu, const EnergyContext& ctx,
                          const PairEnergyOptions& opts = {}) {
  return pair_energy_detail(nu, ctx, opts).value;
}

/// The circle-restricted interaction kernel
/// (1/G) sum_g phi_eps(d(x, y_g)) phi_eps(d(z, y_g)).
inline double interaction_kernel(CirclePoint x, CirclePoint z, const KernelParams& p,
                                 const CircleGrid& grid) {
  require_grid_resolves(grid, p.eps);
  CappedPotential phi(p);
  const double G = static_cast<double>(grid.size());
  const double xp = x.position(), zp = z.position();
  double total = parallel_sum(grid.size(), 8192, [&](std::size_t b, std::size_t e) {
    KahanSum acc;
    for (std::size_t g = b; g < e; ++g) {
      double y = static_cast<double>(g) / G;
      double dx = std::fabs(xp - y);
      if (dx > 0.5) dx = 1.0 - dx;
      double dz = std::fabs(zp - y);
      if (dz > 0.5) dz = 1.0 - dz;
      acc.add(phi(dx) * phi(dz));
    }
    return acc.value();
  });
  return total / G;
}

/// Grid energy: the squared L2 norm (1/G) sum_g rho_g^2 of the smoothed
/// density.
inline double grid_energy(const GridDensity& rho) {
  KahanSum acc;
  for (double v : rho.values()) acc.add(v * v);
  return acc.value() * rho.grid().cell_weight();
}

inline double grid_energy(const EmpiricalMeasure& nu, const KernelParams& p,
                          const CircleGrid& grid) {
  return grid_energy(density_on_grid(nu, p, grid));
}

/// The normalized squared-density measure rho^2 / grid_energy; integrates
/// to 1 on the grid.
inline GridDensity normalized_square_density(const EmpiricalMeasure& nu, const KernelParams& p,
                                             const CircleGrid& grid) {
  GridDensity rho = density_on_grid(nu, p, grid);
  double z = grid_energy(rho);
  if (!(z > 0.0)) throw std::invalid_argument("normalized_square_density: zero energy");
  std::vector<double> v(rho.values().size());
  for (std::size_t g = 0; g < v.size(); ++g) v[g] = rho.values()[g] * rho.values()[g] / z;
  return GridDensity(rho.grid(), std::move(v));
}

/// Energy snapshot of a measure; grid energy is optional (large runs track
/// the pair energy only).
struct EnergyReport {
  double e_pair = 0.0;
  std::optional<double> e_tilde;
  double alpha = 0.0;
  double eps = 0.0;
  int dim = 1;
  std::size_t grid_size = 0;
  std::size_t n_atoms = 0;
  double e_pair_std_error = 0.0;
  std::string method;
};

inline EnergyReport make_energy_report(const EmpiricalMeasure& nu, const EnergyContext& ctx,
                                       const CircleGrid* grid = nullptr,
                                       const PairEnergyOptions& opts = {}) {
  EnergyReport rep;
  PairEnergyResult pr = pair_energy_detail(nu, ctx, opts);
  rep.e_pair = pr.value;
  rep.e_pair_std_error = pr.std_error;
  rep.method = pr.method;
  rep.alpha = ctx.params().alpha;
  rep.eps = ctx.params().eps;
  rep.dim = ctx.params().dim;
  rep.n_atoms = nu.size();
  if (grid != nullptr) {
    rep.e_tilde = grid_energy(nu, ctx.params(), *grid);
    rep.grid_size = grid->size();
  }
  return rep;
}

/// One-step energy change bound for a Hoelder map: returns
/// (E(f nu), (2(1+log L)/gamma)^alpha ((1+delta) E(nu) + A)) with
/// A = 2 c_{alpha,k} (-log r0)^alpha for the configured window radius r0.
inline std::pair<double, double> one_step_holder_bound(const EmpiricalMeasure& nu,
                                                       const CircleMap& f,
                                                       const EnergyContext& ctx, double delta,
                                                       double window_radius = 1e-3) {
  const KernelParams& p = ctx.params();
  if (!(p.alpha < 1.0)) {
    throw std::invalid_argument("one_step_holder_bound: requires alpha < 1");
  }
  HolderConstants hc = holder_constants(f);
  double lhs = pair_energy(pushforward(nu, f), ctx);
  double factor = std::pow(2.0 * (1.0 + std::log(hc.scale)) / hc.exponent, p.alpha);
  double tail_const =
      2.0 * kernel_constant(p.alpha, p.dim) * std::pow(-std::log(window_radius), p.alpha);
  double rhs = factor * ((1.0 + delta) * pair_energy(nu, ctx) + tail_const);
  return {lhs, rhs};
}

struct AveragedStepRatio {
  double ratio = 0.0;
  double std_error = 0.0;
  std::size_t samples = 0;
};

/// Monte-Carlo mean of grid_energy(f nu) / grid_energy(nu) over i.i.d. maps.
inline AveragedStepRatio averaged_step_ratio(const RandomMapFamily& mu,
                                             const EmpiricalMeasure& nu, const KernelParams& p,
                                             const CircleGrid& grid, std::size_t m_samples,
                                             std::uint64_t seed) {
  if (m_samples == 0) throw std::invalid_argument("averaged_step_ratio: need samples");
  double base = grid_energy(nu, p, grid);
  double sum = 0.0, sum2 = 0.0;
  for (std::size_t j = 0; j < m_samples; ++j) {
    SeedStream stream = make_stream(seed, 0x617667ULL, j);
    CircleMap f = sample_map(mu, stream);
    double r = grid_energy(pushforward(nu, f), p, grid) / base;
    sum += r;
    sum2 += r * r;
  }
  double m = static_cast<double>(m_samples);
  double mean = sum / m;
  double var = std::max(0.0, sum2 / m - mean * mean);
  return {mean, m > 1 ? std::sqrt(var / m) : 0.0, m_samples};
}

/// Pushes a grid density through f as a measure: each cell mass travels to
/// f(node) and is split linearly between the two adjacent target nodes.
inline GridDensity push_grid_density(const GridDensity& d, const CircleMap& f) {
  const CircleGrid& grid = d.grid();
  const std::size_t G = grid.size();
  std::vector<double> mass(G, 0.0);
  for (std::size_t g = 0; g < G; ++g) {
    double m = d.values()[g] * grid.cell_weight();
    if (m == 0.0) continue;
    double y = f.apply_frac(grid.node(g)) * static_cast<double>(G);
    std::size_t lo = static_cast<std::size_t>(y) % G;
    double frac = y - std::floor(y);
    mass[lo] += m * (1.0 - frac);
    mass[(lo + 1) % G] += m * frac;
  }
  for (double& m : mass) m *= static_cast<double>(G);
  return GridDensity(grid, std::move(mass));
}

/// Wasserstein distance between the pushforward of the normalized
/// squared-density measure and the squared-density measure of the
/// pushforward. Small for high-energy measures under tame maps.
inline double wasserstein_stability(const EmpiricalMeasure& nu, const CircleMap& f,
                                    const KernelParams& p, const CircleGrid& grid) {
  GridDensity theta = normalized_square_density(nu, p, grid);
  GridDensity pushed = push_grid_density(theta, f);
  GridDensity theta_after = normalized_square_density(pushforward(nu, f), p, grid);
  return wasserstein_circle(pushed, theta_after);
}

/// One averaging step: energies before and after convolving with the family.
inline std::pair<EnergyReport, EnergyReport> contraction_step(
    const RandomMapFamily& mu, const EmpiricalMeasure& nu, const EnergyContext& ctx,
    std::uint64_t seed, const CircleGrid* grid = nullptr, const PairEnergyOptions& opts = {}) {
  EnergyReport before = make_energy_report(nu, ctx, grid, opts);
  EmpiricalMeasure next = convolve(mu, nu, seed);
  EnergyReport after = make_energy_report(next, ctx, grid, opts);
  return {before, after};
}

}  // namespace logholder
