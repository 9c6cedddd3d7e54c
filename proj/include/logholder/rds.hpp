#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "logholder/geometry.hpp"
#include "logholder/rng.hpp"

namespace logholder {

enum class MapKind { rotation, sine_perturbed_rotation, projective_sl2, power_kink };

inline const char* map_kind_name(MapKind k) {
  switch (k) {
    case MapKind::rotation:
      return "rotation";
    case MapKind::sine_perturbed_rotation:
      return "sine_perturbed_rotation";
    case MapKind::projective_sl2:
      return "projective_sl2";
    default:
      return "power_kink";
  }
}

/// An orientation-preserving circle homeomorphism, one of four parametric
/// kinds. The lift is strictly increasing with lift(x+1) = lift(x) + 1.
class CircleMap {
 public:
  static CircleMap rotation(double angle) {
    CircleMap f(MapKind::rotation);
    f.a_ = CirclePoint::reduce(angle);
    return f;
  }

  static CircleMap sine_perturbed(double angle, double amplitude) {
    if (!(std::fabs(amplitude) < 1.0)) {
      throw std::invalid_argument("sine_perturbed: |amplitude| must be < 1");
    }
    CircleMap f(MapKind::sine_perturbed_rotation);
    f.a_ = CirclePoint::reduce(angle);
    f.b_ = amplitude;
    return f;
  }

  static CircleMap projective(double m00, double m01, double m10, double m11) {
    double det = m00 * m11 - m01 * m10;
    if (std::fabs(det - 1.0) > 1e-12) {
      throw std::invalid_argument("projective: matrix must have determinant 1");
    }
    CircleMap f(MapKind::projective_sl2);
    f.m_[0] = m00;
    f.m_[1] = m01;
    f.m_[2] = m10;
    f.m_[3] = m11;
    return f;
  }

  /// Kink profile x -> (2x)^g / 2 on [0, 1/2] glued to the mirrored inverse
  /// branch on [1/2, 1], composed with a rotation by `offset`.
  static CircleMap power_kink(double exponent, double offset) {
    if (!(exponent > 0.0 && exponent <= 1.0)) {
      throw std::invalid_argument("power_kink: exponent must be in (0, 1]");
    }
    CircleMap f(MapKind::power_kink);
    f.g_ = exponent;
    f.a_ = CirclePoint::reduce(offset);
    return f;
  }

  MapKind kind() const { return kind_; }
  double angle() const { return a_; }
  double amplitude() const { return b_; }
  double exponent() const { return g_; }
  const double* matrix() const { return m_; }

  /// Image of a fractional coordinate in [0, 1), reduced mod 1.
  double apply_frac(double x) const {
    switch (kind_) {
      case MapKind::rotation:
        return CirclePoint::reduce(x + a_);
      case MapKind::sine_perturbed_rotation:
        return CirclePoint::reduce(x + a_ + b_ / (2.0 * M_PI) * std::sin(2.0 * M_PI * x));
      case MapKind::projective_sl2: {
        double c = std::cos(M_PI * x), s = std::sin(M_PI * x);
        double wx = m_[0] * c + m_[1] * s;
        double wy = m_[2] * c + m_[3] * s;
        return CirclePoint::reduce(std::atan2(wy, wx) / M_PI);
      }
      default: {
        double y;
        if (x <= 0.5) {
          y = 0.5 * std::pow(2.0 * x, g_);
        } else {
          y = 1.0 - 0.5 * std::pow(2.0 * (1.0 - x), 1.0 / g_);
        }
        return CirclePoint::reduce(y + a_);
      }
    }
  }

  CirclePoint operator()(CirclePoint x) const { return CirclePoint(apply_frac(x.position())); }

  /// Increasing lift, pinned so that lift(x) - apply_frac(frac(x)) is an
  /// integer for every x.
  double lift(double x) const {
    double base = std::floor(x);
    double frac = x - base;
    double y0 = apply_frac(0.0);
    double y = apply_frac(frac);
    if (y < y0) y += 1.0;  // the image wrapped past 1 within this period
    return base + y;
  }

 private:
  explicit CircleMap(MapKind k) : kind_(k) {}

  MapKind kind_;
  double a_ = 0.0;   // rotation offset
  double b_ = 0.0;   // sine amplitude
  double g_ = 1.0;   // kink exponent
  double m_[4] = {1.0, 0.0, 0.0, 1.0};
};

/// Operator norm of the stored 2x2 matrix (largest singular value).
inline double sl2_operator_norm(const double* m) {
  double t = m[0] * m[0] + m[1] * m[1] + m[2] * m[2] + m[3] * m[3];
  double det = m[0] * m[3] - m[1] * m[2];
  double disc = std::sqrt(std::max(0.0, t * t - 4.0 * det * det));
  return std::sqrt(0.5 * (t + disc));
}

/// Analytic bi-Lipschitz constant. The projective action of A on the circle
/// has derivative |Av|^-2 at the unit vector v, so the constant is |A|^2.
inline double lipschitz_constant(const CircleMap& f) {
  switch (f.kind()) {
    case MapKind::rotation:
      return 1.0;
    case MapKind::sine_perturbed_rotation: {
      double b = std::fabs(f.amplitude());
      return std::max(1.0 + b, 1.0 / (1.0 - b));
    }
    case MapKind::projective_sl2: {
      double n = sl2_operator_norm(f.matrix());
      return n * n;
    }
    default:
      throw std::invalid_argument("lipschitz_constant: power_kink is not bi-Lipschitz");
  }
}

struct HolderConstants {
  double exponent;  // gamma(f)
  double scale;     // L(f), the sup ratio at exponent gamma/2
};

namespace detail {

// Sample separations and base points for the ratio maximizations: geometric
// separations down to 1e-9, base points both spread out and clustered at the
// kink locations 0 and 1/2.
inline std::vector<double> ratio_base_points(std::size_t n_spread) {
  std::vector<double> xs;
  xs.reserve(n_spread + 80);
  for (std::size_t i = 0; i < n_spread; ++i) {
    xs.push_back(static_cast<double>(i) / static_cast<double>(n_spread));
  }
  for (double anchor : {0.0, 0.5}) {
    for (double h = 1e-9; h < 0.2; h *= 2.5) {
      xs.push_back(CirclePoint::reduce(anchor + h));
      xs.push_back(CirclePoint::reduce(anchor - h));
    }
  }
  return xs;
}

inline std::vector<double> geometric_separations(double lo, double hi, std::size_t n) {
  std::vector<double> out(n);
  double q = std::pow(hi / lo, 1.0 / static_cast<double>(n - 1));
  double s = lo;
  for (std::size_t i = 0; i < n; ++i, s *= q) out[i] = s;
  return out;
}

inline double max_holder_ratios(const CircleMap& f, double exponent,
                                std::size_t n_spread = 512) {
  auto xs = ratio_base_points(n_spread);
  auto seps = geometric_separations(1e-9, 0.5, 64);
  double best = 0.0;
  for (double x : xs) {
    double fx = f.apply_frac(x);
    for (double s : seps) {
      double y = CirclePoint::reduce(x + s);
      double fy = f.apply_frac(y);
      double d = circle_distance(x, y);
      double fd = circle_distance(fx, fy);
      if (d <= 0.0 || fd <= 0.0) continue;
      best = std::max(best, fd / std::pow(d, exponent));
      best = std::max(best, d / std::pow(fd, exponent));
    }
  }
  return best;
}

}  // namespace detail

/// (gamma(f), L(f)). The exponent is analytic per kind; the scale is the
/// maximum of the two halved-exponent ratios over a dense pair sample with
/// refinement at the kink.
inline HolderConstants holder_constants(const CircleMap& f) {
  double gamma = (f.kind() == MapKind::power_kink) ? f.exponent() : 1.0;
  double scale = detail::max_holder_ratios(f, 0.5 * gamma);
  return {gamma, scale};
}

struct RegularityEstimate {
  double lip_hat;
  double gamma_hat;
  double sep_min;
  double sep_max;
};

/// Empirical regularity: lip_hat is the max of both distance ratios over
/// sampled pairs; gamma_hat combines the log-log slopes of the extremal
/// image separations over dyadic input separations, taking the weaker of
/// the forward and inverse branches.
inline RegularityEstimate estimate_regularity(const CircleMap& f, std::size_t n_pairs,
                                              std::uint64_t seed) {
  if (n_pairs < 1000) {
    throw std::invalid_argument("estimate_regularity: need at least 1000 pairs");
  }
  SeedStream rng = make_stream(seed, 0x7265677573ULL);

  double lip = 0.0;
  for (std::size_t i = 0; i < n_pairs; ++i) {
    double x = rng.next_unit();
    double s = std::pow(10.0, -8.0 + 7.0 * rng.next_unit());
    double y = CirclePoint::reduce(x + s);
    double d = circle_distance(x, y);
    double fd = circle_distance(f.apply_frac(x), f.apply_frac(y));
    if (d <= 0.0 || fd <= 0.0) continue;
    lip = std::max(lip, std::max(fd / d, d / fd));
  }

  // Dyadic separations; base points include geometric clusters at the kinks.
  auto xs = detail::ratio_base_points(256);
  const int j_lo = 6, j_hi = 26;
  std::vector<double> log_h, log_max, log_min;
  for (int j = j_lo; j <= j_hi; ++j) {
    double h = std::ldexp(1.0, -j);
    double hi = 0.0, lo = 1e300;
    for (double x : xs) {
      double fd = circle_distance(f.apply_frac(x), f.apply_frac(CirclePoint::reduce(x + h)));
      if (fd <= 0.0) continue;
      hi = std::max(hi, fd);
      lo = std::min(lo, fd);
    }
    if (hi <= 0.0 || lo >= 1e300) continue;
    log_h.push_back(std::log(h));
    log_max.push_back(std::log(hi));
    log_min.push_back(std::log(lo));
  }
  auto slope = [](const std::vector<double>& x, const std::vector<double>& y) {
    double n = static_cast<double>(x.size());
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      sx += x[i];
      sy += y[i];
      sxx += x[i] * x[i];
      sxy += x[i] * y[i];
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
  };
  double gamma_fwd = slope(log_h, log_max);
  double slope_min = slope(log_h, log_min);
  double gamma_inv = slope_min > 0.0 ? 1.0 / slope_min : 0.0;
  return {lip, std::min(gamma_fwd, gamma_inv), std::ldexp(1.0, -j_hi), std::ldexp(1.0, -j_lo)};
}

enum class FamilyKind { finite_support, rotation_uniform, sl2_heavy_tail, kink_heavy_tail };

enum class MomentProfile { exponential, logarithmic_alpha };

inline const char* family_kind_name(FamilyKind k) {
  switch (k) {
    case FamilyKind::finite_support:
      return "finite_support";
    case FamilyKind::rotation_uniform:
      return "rotation_uniform";
    case FamilyKind::sl2_heavy_tail:
      return "sl2_heavy_tail";
    default:
      return "kink_heavy_tail";
  }
}

/// A sampleable distribution over circle maps. Heavy-tailed kinds draw a
/// Pareto-distributed severity, so the log-regularity moment of order
/// `alpha` is finite exactly when alpha < tail_index. Tails are truncated
/// at bi-Lipschitz constant 1e12 (recorded) for floating-point safety.
class RandomMapFamily {
 public:
  static RandomMapFamily finite_support(std::vector<CircleMap> maps,
                                        std::vector<double> weights) {
    if (maps.empty() || maps.size() != weights.size()) {
      throw std::invalid_argument("finite_support: maps/weights size mismatch");
    }
    double total = 0.0;
    for (double w : weights) {
      if (!(w >= 0.0)) throw std::invalid_argument("finite_support: negative weight");
      total += w;
    }
    if (std::fabs(total - 1.0) > 1e-12) {
      throw std::invalid_argument("finite_support: weights must sum to 1");
    }
    RandomMapFamily mu(FamilyKind::finite_support, MomentProfile::exponential);
    mu.maps_ = std::move(maps);
    mu.weights_ = std::move(weights);
    return mu;
  }

  static RandomMapFamily rotation_uniform() {
    return RandomMapFamily(FamilyKind::rotation_uniform, MomentProfile::exponential);
  }

  static RandomMapFamily sl2_heavy_tail(double tail_index, double scale,
                                        double truncation = 1e12) {
    if (!(tail_index > 0.0) || !(scale > 0.0)) {
      throw std::invalid_argument("sl2_heavy_tail: tail index and scale must be positive");
    }
    RandomMapFamily mu(FamilyKind::sl2_heavy_tail, MomentProfile::logarithmic_alpha);
    mu.tail_index_ = tail_index;
    mu.scale_ = scale;
    mu.truncation_ = truncation;
    return mu;
  }

  static RandomMapFamily kink_heavy_tail(double tail_index, double max_inverse_exponent = 40.0) {
    if (!(tail_index > 0.0)) {
      throw std::invalid_argument("kink_heavy_tail: tail index must be positive");
    }
    RandomMapFamily mu(FamilyKind::kink_heavy_tail, MomentProfile::logarithmic_alpha);
    mu.tail_index_ = tail_index;
    mu.scale_ = max_inverse_exponent;
    return mu;
  }

  FamilyKind kind() const { return kind_; }
  MomentProfile moment_profile() const { return profile_; }
  double tail_index() const { return tail_index_; }
  double scale() const { return scale_; }
  double truncation() const { return truncation_; }
  const std::vector<CircleMap>& maps() const { return maps_; }
  const std::vector<double>& weights() const { return weights_; }

  bool is_lipschitz_class() const { return kind_ != FamilyKind::kink_heavy_tail; }

  /// Whether the declared moment class makes the order-alpha log moment finite.
  bool declared_moment_finite(double alpha) const {
    if (profile_ == MomentProfile::exponential) return true;
    return alpha < tail_index_;
  }

 private:
  RandomMapFamily(FamilyKind k, MomentProfile p) : kind_(k), profile_(p) {}

  FamilyKind kind_;
  MomentProfile profile_;
  std::vector<CircleMap> maps_;
  std::vector<double> weights_;
  double tail_index_ = 0.0;
  double scale_ = 0.0;
  double truncation_ = 1e12;
};

/// One draw from the family, consuming the supplied counter-based stream.
inline CircleMap sample_map(const RandomMapFamily& mu, SeedStream& stream) {
  switch (mu.kind()) {
    case FamilyKind::finite_support: {
      double u = stream.next_unit();
      double acc = 0.0;
      const auto& w = mu.weights();
      for (std::size_t i = 0; i + 1 < w.size(); ++i) {
        acc += w[i];
        if (u < acc) return mu.maps()[i];
      }
      return mu.maps().back();
    }
    case FamilyKind::rotation_uniform:
      return CircleMap::rotation(stream.next_unit());
    case FamilyKind::sl2_heavy_tail: {
      double theta = M_PI * stream.next_unit();
      double u = stream.next_unit_open0();
      double s = mu.scale() * std::pow(u, -1.0 / mu.tail_index());
      double s_max = 0.5 * std::log(mu.truncation());
      s = std::min(s, s_max);
      double c = std::cos(theta), sn = std::sin(theta);
      double es = std::exp(s), esi = std::exp(-s);
      // R_theta * diag(e^s, e^-s); log biLip = 2s.
      return CircleMap::projective(c * es, -sn * esi, sn * es, c * esi);
    }
    default: {
      double u = stream.next_unit_open0();
      double inv_gamma = std::pow(u, -1.0 / mu.tail_index());
      inv_gamma = std::min(inv_gamma, mu.scale());
      double offset = stream.next_unit();
      return CircleMap::power_kink(1.0 / inv_gamma, offset);
    }
  }
}

struct MomentEstimate {
  double value;
  double std_error;
  bool declared_finite;
};

/// Monte-Carlo estimate of the order-alpha regularity moment: the Lipschitz
/// form (log biLip)^alpha for bi-Lipschitz families, the Hoelder form
/// ((1 + log L)/gamma)^alpha for the kink family.
inline MomentEstimate moment_integral(const RandomMapFamily& mu, double alpha,
                                      std::size_t n_samples, std::uint64_t seed) {
  if (n_samples == 0) throw std::invalid_argument("moment_integral: need samples");
  double sum = 0.0, sum2 = 0.0;
  for (std::size_t i = 0; i < n_samples; ++i) {
    SeedStream stream = make_stream(seed, 0x6d6f6dULL, i);
    CircleMap f = sample_map(mu, stream);
    double x;
    if (mu.is_lipschitz_class()) {
      x = std::pow(std::log(lipschitz_constant(f)), alpha);
    } else {
      HolderConstants hc = holder_constants(f);
      x = std::pow((1.0 + std::log(hc.scale)) / hc.exponent, alpha);
    }
    sum += x;
    sum2 += x * x;
  }
  double n = static_cast<double>(n_samples);
  double mean = sum / n;
  double var = std::max(0.0, sum2 / n - mean * mean);
  return {mean, std::sqrt(var / n), mu.declared_moment_finite(alpha)};
}

/// Max pointwise displacement between two maps; the no-deterministic-image
/// proxy used by the negative controls.
inline double map_separation(const CircleMap& f, const CircleMap& g, std::size_t n = 4096) {
  double best = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double x = static_cast<double>(i) / static_cast<double>(n);
    best = std::max(best, circle_distance(f.apply_frac(x), g.apply_frac(x)));
  }
  return best;
}

/// Bookkeeping for iterated compositions T_n = f_n o ... o f_1.
struct CompositionState {
  std::size_t step = 0;
  std::size_t maps_applied = 0;
  std::uint64_t seed_lineage = 0;
};

}  // namespace logholder
