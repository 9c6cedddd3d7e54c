#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "logholder/geometry.hpp"
#include "logholder/kernel.hpp"
#include "logholder/parallel.hpp"
#include "logholder/rds.hpp"
#include "logholder/rng.hpp"

namespace logholder {

class GridTooCoarseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A finitely supported probability measure on the circle.
class EmpiricalMeasure {
 public:
  EmpiricalMeasure(std::vector<double> positions, std::vector<double> weights)
      : positions_(std::move(positions)), weights_(std::move(weights)) {
    if (positions_.empty() || positions_.size() != weights_.size()) {
      throw std::invalid_argument("EmpiricalMeasure: need matching, nonempty atom lists");
    }
    KahanSum total;
    for (std::size_t i = 0; i < positions_.size(); ++i) {
      positions_[i] = CirclePoint::reduce(positions_[i]);
      if (!(weights_[i] > 0.0)) {
        throw std::invalid_argument("EmpiricalMeasure: weights must be positive");
      }
      total.add(weights_[i]);
    }
    if (std::fabs(total.value() - 1.0) > 1e-12) {
      throw std::invalid_argument("EmpiricalMeasure: weights must sum to 1");
    }
  }

  /// A Dirac mass, optionally replicated into n equal atoms for Monte Carlo.
  static EmpiricalMeasure delta(double position, std::size_t replicas = 1) {
    return EmpiricalMeasure(std::vector<double>(replicas, CirclePoint::reduce(position)),
                            std::vector<double>(replicas, 1.0 / static_cast<double>(replicas)));
  }

  /// n equally weighted atoms at the grid nodes j/n.
  static EmpiricalMeasure uniform_atoms(std::size_t n) {
    std::vector<double> pos(n), w(n, 1.0 / static_cast<double>(n));
    for (std::size_t j = 0; j < n; ++j) pos[j] = static_cast<double>(j) / static_cast<double>(n);
    return EmpiricalMeasure(std::move(pos), std::move(w));
  }

  /// n atoms spread uniformly (by seeded draw) over an arc of given length.
  static EmpiricalMeasure uniform_arc(double center, double length, std::size_t n,
                                      std::uint64_t seed) {
    std::vector<double> pos(n), w(n, 1.0 / static_cast<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
      SeedStream s = make_stream(seed, 0x617263ULL, i);
      pos[i] = CirclePoint::reduce(center + (s.next_unit() - 0.5) * length);
    }
    return EmpiricalMeasure(std::move(pos), std::move(w));
  }

  std::size_t size() const { return positions_.size(); }
  const std::vector<double>& positions() const { return positions_; }
  const std::vector<double>& weights() const { return weights_; }
  double max_weight() const { return *std::max_element(weights_.begin(), weights_.end()); }
  double total_weight() const { return std::accumulate(weights_.begin(), weights_.end(), 0.0); }

 private:
  std::vector<double> positions_;
  std::vector<double> weights_;
};

/// Total weight of atoms strictly inside the open ball B_r(x).
inline double ball_mass(const EmpiricalMeasure& nu, CirclePoint x, double r) {
  if (!(r > 0.0)) throw std::invalid_argument("ball_mass: radius must be positive");
  double acc = 0.0;
  double cx = x.position();
  const auto& pos = nu.positions();
  const auto& w = nu.weights();
  for (std::size_t i = 0; i < pos.size(); ++i) {
    if (circle_distance(pos[i], cx) < r) acc += w[i];
  }
  return acc;
}

/// Sorted-position view with prefix sums: O(log n) ball masses, used by the
/// per-step ball-mass tables and the exponent fits.
class SortedMeasure {
 public:
  explicit SortedMeasure(const EmpiricalMeasure& nu) {
    std::vector<std::size_t> order(nu.size());
    std::iota(order.begin(), order.end(), 0);
    const auto& pos = nu.positions();
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return pos[a] < pos[b]; });
    positions_.reserve(nu.size());
    prefix_.reserve(nu.size() + 1);
    prefix_.push_back(0.0);
    for (std::size_t idx : order) {
      positions_.push_back(pos[idx]);
      prefix_.push_back(prefix_.back() + nu.weights()[idx]);
    }
  }

  /// Mass of the open ball B_r(x); exact up to float compare at the rim.
  double ball_mass(double x, double r) const {
    if (r >= 0.5) return prefix_.back();
    double lo = x - r, hi = x + r;
    double m = arc_mass_open(lo, hi);
    return m;
  }

  double total() const { return prefix_.back(); }

 private:
  // Mass of the open arc (lo, hi) with hi - lo < 1, coordinates unwrapped.
  double arc_mass_open(double lo, double hi) const {
    double shift = std::floor(lo);
    lo -= shift;
    hi -= shift;
    double m = segment_mass(lo, std::min(hi, 1.0), false);
    // Wrapped tail [0, hi-1): coordinate 0 is interior to the arc here.
    if (hi > 1.0) m += segment_mass(0.0, hi - 1.0, true);
    return m;
  }

  // Mass of positions in (lo, hi), or [lo, hi) when include_lo is set.
  double segment_mass(double lo, double hi, bool include_lo) const {
    auto a = include_lo ? std::lower_bound(positions_.begin(), positions_.end(), lo)
                        : std::upper_bound(positions_.begin(), positions_.end(), lo);
    auto b = std::lower_bound(positions_.begin(), positions_.end(), hi);
    if (a >= b) return 0.0;
    std::size_t ia = static_cast<std::size_t>(a - positions_.begin());
    std::size_t ib = static_cast<std::size_t>(b - positions_.begin());
    return prefix_[ib] - prefix_[ia];
  }

  std::vector<double> positions_;
  std::vector<double> prefix_;
};

/// Pointwise image of the atoms; weights are untouched.
inline EmpiricalMeasure pushforward(const EmpiricalMeasure& nu, const CircleMap& f) {
  std::vector<double> pos(nu.size());
  const auto& src = nu.positions();
  parallel_chunks(nu.size(), 8192, [&](std::size_t, std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) pos[i] = f.apply_frac(src[i]);
  });
  return EmpiricalMeasure(std::move(pos), nu.weights());
}

/// Monte-Carlo convolution: atom i moves through its own independently
/// sampled map. Streams are keyed by (seed, atom), so the result does not
/// depend on the thread partition.
inline EmpiricalMeasure convolve(const RandomMapFamily& mu, const EmpiricalMeasure& nu,
                                 std::uint64_t seed) {
  std::vector<double> pos(nu.size());
  const auto& src = nu.positions();
  parallel_chunks(nu.size(), 4096, [&](std::size_t, std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      SeedStream stream = make_stream(seed, 0x636f6e76ULL, i);
      CircleMap f = sample_map(mu, stream);
      pos[i] = f.apply_frac(src[i]);
    }
  });
  return EmpiricalMeasure(std::move(pos), nu.weights());
}

/// Variance-reduction mode: m independent maps, each pushing the whole atom
/// set, averaged into an n*m-atom measure.
inline EmpiricalMeasure convolve_average(const RandomMapFamily& mu, const EmpiricalMeasure& nu,
                                         std::size_t m_maps, std::uint64_t seed) {
  if (m_maps == 0) throw std::invalid_argument("convolve_average: need at least one map");
  std::vector<double> pos;
  std::vector<double> w;
  pos.reserve(nu.size() * m_maps);
  w.reserve(nu.size() * m_maps);
  for (std::size_t j = 0; j < m_maps; ++j) {
    SeedStream stream = make_stream(seed, 0x61766754ULL, j);
    CircleMap f = sample_map(mu, stream);
    for (std::size_t i = 0; i < nu.size(); ++i) {
      pos.push_back(f.apply_frac(nu.positions()[i]));
      w.push_back(nu.weights()[i] / static_cast<double>(m_maps));
    }
  }
  return EmpiricalMeasure(std::move(pos), std::move(w));
}

/// Nonnegative function values on a uniform circle grid.
class GridDensity {
 public:
  GridDensity(CircleGrid grid, std::vector<double> values)
      : grid_(grid), values_(std::move(values)) {
    if (values_.size() != grid_.size()) {
      throw std::invalid_argument("GridDensity: value count must match grid size");
    }
    for (double v : values_) {
      if (!std::isfinite(v) || v < 0.0) {
        throw std::invalid_argument("GridDensity: values must be finite and nonnegative");
      }
    }
  }

  const CircleGrid& grid() const { return grid_; }
  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }

  double integral() const {
    KahanSum s;
    for (double v : values_) s.add(v);
    return s.value() * grid_.cell_weight();
  }

  bool is_probability(double tol = 1e-8) const { return std::fabs(integral() - 1.0) <= tol; }

  GridDensity normalized() const {
    double z = integral();
    if (!(z > 0.0)) throw std::invalid_argument("GridDensity: cannot normalize zero density");
    std::vector<double> v(values_);
    for (double& x : v) x /= z;
    return GridDensity(grid_, std::move(v));
  }

 private:
  CircleGrid grid_;
  std::vector<double> values_;
};

inline void require_grid_resolves(const CircleGrid& grid, double eps) {
  if (!(eps > 0.0) || grid.cell_weight() > eps / 10.0) {
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "grid too coarse: spacing %.3e exceeds eps/10 = %.3e (G = %zu)",
                  grid.cell_weight(), eps / 10.0, grid.size());
    throw GridTooCoarseError(buf);
  }
}

/// The smoothed density: values[g] = sum_i w_i phi_eps(d(x_i, y_g)).
/// Not a probability density; its square integrates to the grid energy.
inline GridDensity density_on_grid(const EmpiricalMeasure& nu, const KernelParams& p,
                                   const CircleGrid& grid) {
  require_grid_resolves(grid, p.eps);
  CappedPotential phi(p);
  const auto& pos = nu.positions();
  const auto& w = nu.weights();
  const std::size_t n = pos.size();
  const double G = static_cast<double>(grid.size());
  std::vector<double> values(grid.size());
  parallel_chunks(grid.size(), 2048, [&](std::size_t, std::size_t b, std::size_t e) {
    for (std::size_t g = b; g < e; ++g) {
      double y = static_cast<double>(g) / G;
      KahanSum acc;
      for (std::size_t i = 0; i < n; ++i) {
        double d = std::fabs(pos[i] - y);
        if (d > 0.5) d = 1.0 - d;
        acc.add(w[i] * phi(d));
      }
      values[g] = acc.value();
    }
  });
  return GridDensity(grid, std::move(values));
}

namespace detail {

struct Segment {
  double value;
  double length;
};

// Piecewise-constant difference of circular CDFs anchored at coordinate 0.
inline std::vector<Segment> cdf_difference(const EmpiricalMeasure& a,
                                           const EmpiricalMeasure& b) {
  std::vector<std::pair<double, double>> events;
  events.reserve(a.size() + b.size());
  for (std::size_t i = 0; i < a.size(); ++i) events.push_back({a.positions()[i], a.weights()[i]});
  for (std::size_t i = 0; i < b.size(); ++i) events.push_back({b.positions()[i], -b.weights()[i]});
  std::sort(events.begin(), events.end());
  std::vector<Segment> segs;
  segs.reserve(events.size() + 1);
  double acc = 0.0, prev = 0.0;
  std::size_t i = 0;
  while (i < events.size()) {
    double pos = events[i].first;
    if (pos > prev) segs.push_back({acc, pos - prev});
    while (i < events.size() && events[i].first == pos) acc += events[i++].second;
    prev = pos;
  }
  if (prev < 1.0) segs.push_back({acc, 1.0 - prev});
  return segs;
}

inline double weighted_median(std::vector<Segment> segs) {
  std::sort(segs.begin(), segs.end(),
            [](const Segment& x, const Segment& y) { return x.value < y.value; });
  double total = 0.0;
  for (const auto& s : segs) total += s.length;
  double acc = 0.0;
  for (const auto& s : segs) {
    acc += s.length;
    if (acc >= 0.5 * total) return s.value;
  }
  return segs.back().value;
}

}  // namespace detail

/// Exact 1-Wasserstein distance on the circle with geodesic cost: the
/// median-shifted L1 distance between the circular CDFs.
inline double wasserstein_circle(const EmpiricalMeasure& a, const EmpiricalMeasure& b) {
  if (std::fabs(a.total_weight() - 1.0) > 1e-9 || std::fabs(b.total_weight() - 1.0) > 1e-9) {
    throw std::invalid_argument("wasserstein_circle: inputs must be probability measures");
  }
  auto segs = detail::cdf_difference(a, b);
  double t = detail::weighted_median(segs);
  KahanSum cost;
  for (const auto& s : segs) cost.add(s.length * std::fabs(s.value - t));
  return cost.value();
}

/// Grid density as an atomic measure: one atom per node, weight v_g / G.
inline EmpiricalMeasure grid_density_atoms(const GridDensity& d) {
  if (!d.is_probability(1e-8)) {
    throw std::invalid_argument("grid_density_atoms: density must integrate to 1");
  }
  std::vector<double> pos, w;
  pos.reserve(d.grid().size());
  w.reserve(d.grid().size());
  double cw = d.grid().cell_weight();
  KahanSum total;
  for (std::size_t g = 0; g < d.grid().size(); ++g) {
    double m = d.values()[g] * cw;
    if (m > 0.0) {
      pos.push_back(d.grid().node(g));
      w.push_back(m);
      total.add(m);
    }
  }
  // Absorb the sub-1e-8 normalization slack so the atom weights sum to 1.
  for (double& x : w) x /= total.value();
  return EmpiricalMeasure(std::move(pos), std::move(w));
}

inline double wasserstein_circle(const GridDensity& a, const GridDensity& b) {
  return wasserstein_circle(grid_density_atoms(a), grid_density_atoms(b));
}

/// Total variation distance between probability densities on one grid.
inline double total_variation(const GridDensity& a, const GridDensity& b) {
  if (a.grid().size() != b.grid().size()) {
    throw std::invalid_argument("total_variation: grid mismatch");
  }
  KahanSum s;
  for (std::size_t g = 0; g < a.grid().size(); ++g) {
    s.add(std::fabs(a.values()[g] - b.values()[g]));
  }
  return 0.5 * a.grid().cell_weight() * s.value();
}

/// A fitted log-Hoelder profile: ball masses against C |log r|^-alpha.
struct LogHolderFit {
  double alpha_hat = 0.0;
  double c_hat = 0.0;
  CirclePoint worst_center;
  double r_min = 0.0;
  double r_max = 0.0;
  double residual = 0.0;
  std::size_t points_used = 0;
};

/// Least-squares fit of log ball mass against log(-log r) at the worst
/// center (the center with the largest mass at the smallest admissible
/// radius, ties broken at the next radius). Radii below the resolution
/// floor 10 * max atom weight are rejected.
inline LogHolderFit fit_log_holder(const EmpiricalMeasure& nu, const CircleGrid& centers,
                                   std::vector<double> radii) {
  double floor_r = 10.0 * nu.max_weight();
  std::sort(radii.begin(), radii.end());
  std::vector<double> usable;
  for (double r : radii) {
    if (r >= floor_r && r > 0.0 && r < kSupportRadius) usable.push_back(r);
  }
  if (usable.size() < 5) {
    throw std::invalid_argument("fit_log_holder: fewer than 5 radii above the resolution floor");
  }

  SortedMeasure sorted(nu);
  std::size_t best_center = 0;
  std::vector<double> best_masses;
  for (std::size_t c = 0; c < centers.size(); ++c) {
    double x = centers.node(c);
    std::vector<double> masses(usable.size());
    for (std::size_t j = 0; j < usable.size(); ++j) masses[j] = sorted.ball_mass(x, usable[j]);
    if (best_masses.empty() || masses > best_masses) {
      best_masses = std::move(masses);
      best_center = c;
    }
  }

  std::vector<double> xs, ys;
  for (std::size_t j = 0; j < usable.size(); ++j) {
    if (best_masses[j] > 0.0) {
      xs.push_back(std::log(-std::log(usable[j])));
      ys.push_back(std::log(best_masses[j]));
    }
  }
  if (xs.empty()) {
    throw std::invalid_argument("fit_log_holder: all ball masses are zero at the worst center");
  }
  LogHolderFit fit;
  fit.worst_center = centers.point(best_center);
  fit.r_min = usable.front();
  fit.r_max = usable.back();
  fit.points_used = xs.size();
  if (xs.size() == 1) {
    fit.alpha_hat = 0.0;
    fit.c_hat = std::exp(ys[0]);
    fit.residual = 0.0;
    return fit;
  }
  double n = static_cast<double>(xs.size());
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
  }
  double denom = n * sxx - sx * sx;
  double slope = denom != 0.0 ? (n * sxy - sx * sy) / denom : 0.0;
  double intercept = (sy - slope * sx) / n;
  fit.alpha_hat = -slope;
  fit.c_hat = std::exp(intercept);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    fit.residual = std::max(fit.residual, std::fabs(ys[i] - (intercept + slope * xs[i])));
  }
  return fit;
}

/// Both sides of the Hilbert-space variance identity under the grid inner
/// product <u, v> = (1/G) sum u_g v_g.
inline std::pair<double, double> variance_identity_check(const std::vector<GridDensity>& vectors,
                                                         const std::vector<double>& weights) {
  if (vectors.empty() || vectors.size() != weights.size()) {
    throw std::invalid_argument("variance_identity_check: size mismatch");
  }
  const std::size_t G = vectors.front().grid().size();
  for (const auto& v : vectors) {
    if (v.grid().size() != G) {
      throw std::invalid_argument("variance_identity_check: grids must match");
    }
  }
  double wsum = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (std::fabs(wsum - 1.0) > 1e-12) {
    throw std::invalid_argument("variance_identity_check: weights must sum to 1");
  }
  std::vector<double> mean(G, 0.0);
  for (std::size_t k = 0; k < vectors.size(); ++k) {
    for (std::size_t g = 0; g < G; ++g) mean[g] += weights[k] * vectors[k].values()[g];
  }
  auto inner = [&](const std::vector<double>& u, const std::vector<double>& v) {
    KahanSum s;
    for (std::size_t g = 0; g < G; ++g) s.add(u[g] * v[g]);
    return s.value() / static_cast<double>(G);
  };
  double lhs = 0.0, rhs = 0.0;
  for (std::size_t k = 0; k < vectors.size(); ++k) {
    std::vector<double> diff(G);
    for (std::size_t g = 0; g < G; ++g) diff[g] = vectors[k].values()[g] - mean[g];
    lhs += weights[k] * inner(diff, diff);
    rhs += weights[k] * inner(vectors[k].values(), vectors[k].values());
  }
  rhs -= inner(mean, mean);
  return {lhs, rhs};
}

// ---- CSV serialization ----

inline void save_measure_csv(const EmpiricalMeasure& nu, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_measure_csv: cannot open " + path);
  out << "position,weight\n";
  char buf[80];
  for (std::size_t i = 0; i < nu.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", nu.positions()[i], nu.weights()[i]);
    out << buf;
  }
}

inline EmpiricalMeasure load_measure_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_measure_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line.rfind("position,weight", 0) != 0) {
    throw std::runtime_error("load_measure_csv: missing position,weight header");
  }
  std::vector<double> pos, w;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    double p, x;
    if (std::sscanf(line.c_str(), "%lf,%lf", &p, &x) != 2) {
      throw std::runtime_error("load_measure_csv: malformed row: " + line);
    }
    pos.push_back(p);
    w.push_back(x);
  }
  return EmpiricalMeasure(std::move(pos), std::move(w));
}

inline void save_density_csv(const GridDensity& d, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_density_csv: cannot open " + path);
  out << "grid_index,value\n";
  char buf[64];
  for (std::size_t g = 0; g < d.grid().size(); ++g) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g\n", g, d.values()[g]);
    out << buf;
  }
}

inline GridDensity load_density_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_density_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line.rfind("grid_index,value", 0) != 0) {
    throw std::runtime_error("load_density_csv: missing grid_index,value header");
  }
  std::vector<double> values;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::size_t idx;
    double v;
    if (std::sscanf(line.c_str(), "%zu,%lf", &idx, &v) != 2) {
      throw std::runtime_error("load_density_csv: malformed row: " + line);
    }
    values.push_back(v);
  }
  std::size_t n = values.size();
  return GridDensity(CircleGrid(n), std::move(values));
}

}  // namespace logholder
