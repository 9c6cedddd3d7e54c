#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "logholder/geometry.hpp"
#include "logholder/parallel.hpp"
#include "logholder/quadrature.hpp"

namespace logholder {

/// Radius beyond which the singular potential vanishes.
inline constexpr double kSupportRadius = 0.367879441171442321595523770161461;  // 1/e

class SingularEvalError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Parameters of the potential family: regularity exponent alpha,
/// cutoff eps, ambient dimension for the convolution integrals.
struct KernelParams {
  double alpha;
  double eps;
  int dim;

  KernelParams(double alpha_, double eps_, int dim_)
      : alpha(alpha_), eps(eps_), dim(dim_) {
    if (!(alpha > 0.0 && alpha <= 4.0)) {
      throw std::invalid_argument("KernelParams: alpha must be in (0, 4]");
    }
    if (!(eps >= 0.0 && eps < kSupportRadius)) {
      throw std::invalid_argument("KernelParams: eps must be in [0, 1/e)");
    }
    if (dim < 1 || dim > 3) {
      throw std::invalid_argument("KernelParams: dim must be 1, 2 or 3");
    }
  }
};

/// c_{alpha,k} = k * omega_k / alpha, the constant in the log-power envelope.
inline double kernel_constant(double alpha, int dim) {
  if (!(alpha > 0.0)) throw std::invalid_argument("kernel_constant: alpha must be positive");
  return dim * unit_ball_volume(dim) / alpha;
}

namespace detail {

// (-log t)^((alpha-1)/2) / t^(k/2) for t in (0, 1/e), without range checks.
inline double potential_core(double t, double alpha, int dim) {
  double lg = -std::log(t);
  double num;
  if (alpha == 1.0) {
    num = 1.0;
  } else if (alpha == 3.0) {
    num = lg;
  } else {
    num = std::pow(lg, 0.5 * (alpha - 1.0));
  }
  switch (dim) {
    case 1:
      return num / std::sqrt(t);
    case 2:
      return num / t;
    default:
      return num / (t * std::sqrt(t));
  }
}

}  // namespace detail

/// The uncapped singular potential. Vanishes for x >= 1/e, diverges at 0.
inline double potential(const KernelParams& p, double x) {
  if (!(x >= 0.0)) throw std::invalid_argument("potential: x must be nonnegative");
  if (x >= kSupportRadius) return 0.0;
  if (x == 0.0) {
    throw SingularEvalError("potential: evaluation at the singular point 0");
  }
  return detail::potential_core(x, p.alpha, p.dim);
}

/// The capped potential: plateau value potential(eps) on [0, eps),
/// uncapped elsewhere. Non-increasing, bounded by potential(eps).
inline double capped_potential(const KernelParams& p, double x) {
  if (!(x >= 0.0)) throw std::invalid_argument("capped_potential: x must be nonnegative");
  if (x >= kSupportRadius) return 0.0;
  double t = std::max(x, p.eps);
  if (t == 0.0) {
    throw SingularEvalError("capped_potential: singular evaluation with eps = 0");
  }
  return detail::potential_core(t, p.alpha, p.dim);
}

/// Hot-path functor form of capped_potential with the parameters baked in.
class CappedPotential {
 public:
  explicit CappedPotential(const KernelParams& p) : alpha_(p.alpha), eps_(p.eps), dim_(p.dim) {}

  double operator()(double x) const {
    if (x >= kSupportRadius) return 0.0;
    double t = x > eps_ ? x : eps_;
    return detail::potential_core(t, alpha_, dim_);
  }

  double plateau() const { return detail::potential_core(eps_, alpha_, dim_); }

 private:
  double alpha_, eps_;
  int dim_;
};

/// The log-power comparison envelope: c_{alpha,k} (-log max(r, eps))^alpha.
inline double comparison_envelope(const KernelParams& p, double r) {
  if (!(p.eps > 0.0)) throw std::invalid_argument("comparison_envelope: requires eps > 0");
  if (!(r >= 0.0 && r < kSupportRadius)) {
    throw std::invalid_argument("comparison_envelope: r must be in [0, 1/e)");
  }
  double t = std::max(r, p.eps);
  return kernel_constant(p.alpha, p.dim) * std::pow(-std::log(t), p.alpha);
}

namespace detail {

// One side of a singular-center panel: int_0^b f(c +/- u^2) 2u du.
// The u^2 substitution flattens the x^(-1/2) endpoint singularity (k = 1).
template <typename F>
double integrate_sqrt_sub(F&& f, double center, double sign, double width,
                          const QuadratureSpec& spec) {
  if (!(width > 0.0)) return 0.0;
  double ub = std::sqrt(width);
  auto g = [&](double u) { return 2.0 * u * f(center + sign * u * u); };
  return integrate(g, 0.0, ub, spec);
}

inline void push_knot(std::vector<double>& knots, double v) { knots.push_back(v); }

// U in dimension 1: a line integral over the support intersection.
inline double convolved_potential_1d(const KernelParams& p, double r,
                                     const QuadratureSpec& spec) {
  const double lo = r - kSupportRadius;
  const double hi = kSupportRadius;
  CappedPotential phi(p);
  auto f = [&](double x) { return phi(std::fabs(x)) * phi(std::fabs(r - x)); };

  if (p.eps > 0.0) {
    std::vector<double> knots{-p.eps, 0.0, p.eps, r - p.eps, r, r + p.eps};
    return integrate(f, lo, hi, spec, knots);
  }

  // eps = 0: split at the two singular centers and flatten each side.
  auto bare = [&](double t) {
    return t > 0.0 && t < kSupportRadius ? potential_core(t, p.alpha, p.dim) : 0.0;
  };
  double mid = 0.5 * r;
  double total = 0.0;
  // x < 0: singular at 0 only.
  total += integrate_sqrt_sub([&](double x) { return bare(-x) * bare(r - x); }, 0.0, -1.0,
                              -lo, spec);
  // 0 < x < r/2: singular at 0.
  total += integrate_sqrt_sub([&](double x) { return bare(x) * bare(r - x); }, 0.0, 1.0,
                              mid, spec);
  // r/2 < x < r: singular at r.
  total += integrate_sqrt_sub([&](double x) { return bare(x) * bare(r - x); }, r, -1.0,
                              r - mid, spec);
  // x > r: singular at r.
  total += integrate_sqrt_sub([&](double x) { return bare(x) * bare(x - r); }, r, 1.0,
                              hi - r, spec);
  return total;
}

// Angles where the distance to the second center crosses `level`.
inline bool crossing_angle(double rho, double r, double level, double& theta) {
  if (rho <= 0.0 || r <= 0.0) return false;
  double c = (rho * rho + r * r - level * level) / (2.0 * rho * r);
  if (c <= -1.0 || c >= 1.0) return false;
  theta = std::acos(c);
  return true;
}

// U in dimension 2 or 3 by polar quadrature around the first center: the
// inner integral sweeps the angle to the second center, the outer the radius.
inline double convolved_potential_polar(const KernelParams& p, double r,
                                        const QuadratureSpec& spec) {
  CappedPotential phi(p);
  const int k = p.dim;

  QuadratureSpec inner = spec;
  inner.rel_tol = std::max(spec.rel_tol * 0.2, 1e-12);
  inner.max_panels = std::max(spec.max_panels / 8, 2000);

  auto shell = [&](double rho) {
    if (r == 0.0) {
      double full = (k == 2) ? 2.0 * M_PI : 4.0 * M_PI;
      return phi(rho) * full;
    }
    auto dist = [&](double theta) {
      return std::sqrt(std::max(0.0, rho * rho + r * r - 2.0 * rho * r * std::cos(theta)));
    };
    auto g = [&](double theta) {
      double v = phi(dist(theta));
      return (k == 2) ? 2.0 * v : 2.0 * M_PI * std::sin(theta) * v;
    };
    std::vector<double> knots;
    double th;
    if (crossing_angle(rho, r, p.eps, th)) push_knot(knots, th);
    if (crossing_angle(rho, r, kSupportRadius, th)) push_knot(knots, th);
    return integrate(g, 0.0, M_PI, inner, knots);
  };

  auto outer = [&](double rho) {
    double w = (k == 2) ? rho : rho * rho;
    double v = phi(rho);
    if (v == 0.0) return 0.0;
    return w * v * shell(rho);
  };

  std::vector<double> knots{p.eps, 2.0 * p.eps, r - 2.0 * p.eps, r - p.eps, r,
                            r + p.eps, r + 2.0 * p.eps, std::fabs(r - kSupportRadius)};
  return integrate(outer, 0.0, kSupportRadius, spec, knots);
}

}  // namespace detail

/// U(r): the self-convolution of the capped potential in R^k, evaluated at
/// center separation r >= 0. Zero for r >= 2/e (disjoint supports).
inline double convolved_potential(const KernelParams& p, double r, const QuadratureSpec& spec) {
  if (!(r >= 0.0)) throw std::invalid_argument("convolved_potential: r must be nonnegative");
  if (p.eps == 0.0 && r == 0.0) {
    throw SingularEvalError("convolved_potential: r = 0 requires eps > 0");
  }
  if (r >= 2.0 * kSupportRadius) return 0.0;
  if (p.dim == 1) return detail::convolved_potential_1d(p, r, spec);
  return detail::convolved_potential_polar(p, r, spec);
}

/// Process-wide memo table for exact U evaluations, keyed by
/// (dim, alpha, eps, r) rounded to 12 significant digits.
class PotentialCache {
 public:
  double get(const KernelParams& p, double r, const QuadratureSpec& spec) {
    std::string key = make_key(p, r);
    {
      std::shared_lock lock(mutex_);
      auto it = table_.find(key);
      if (it != table_.end()) return it->second;
    }
    double value = convolved_potential(p, r, spec);
    std::unique_lock lock(mutex_);
    table_.emplace(std::move(key), value);
    return value;
  }

  static PotentialCache& instance() {
    static PotentialCache cache;
    return cache;
  }

 private:
  static std::string make_key(const KernelParams& p, double r) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%d|%.12e|%.12e|%.12e", p.dim, p.alpha, p.eps, r);
    return buf;
  }

  std::unordered_map<std::string, double> table_;
  std::shared_mutex mutex_;
};

inline double convolved_potential_cached(const KernelParams& p, double r,
                                         const QuadratureSpec& spec) {
  return PotentialCache::instance().get(p, r, spec);
}

/// Batch evaluation of U on a deduplicated, sorted set of distances.
inline std::vector<double> convolved_potential_batch(const KernelParams& p,
                                                     std::vector<double> distances,
                                                     const QuadratureSpec& spec) {
  std::sort(distances.begin(), distances.end());
  distances.erase(std::unique(distances.begin(), distances.end()), distances.end());
  std::vector<double> values(distances.size());
  parallel_chunks(distances.size(), 16, [&](std::size_t, std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      values[i] = convolved_potential_cached(p, distances[i], spec);
    }
  });
  return values;
}

/// Dense interpolation table for U(r), used by the pair-energy sums which
/// evaluate U at up to n^2 distances. A uniform segment resolves the plateau
/// scale, a log-spaced segment covers the rest of the support; linear
/// interpolation preserves monotonicity. Accuracy is validated against the
/// exact quadrature in the test suite (~1e-6 relative).
class PotentialTable {
 public:
  PotentialTable(const KernelParams& p, const QuadratureSpec& spec,
                 std::size_t uniform_nodes = 1025, std::size_t log_nodes = 4097)
      : params_(p) {
    if (!(p.eps > 0.0)) {
      throw std::invalid_argument("PotentialTable: requires eps > 0");
    }
    const double support = 2.0 * kSupportRadius;
    edge_ = std::min(8.0 * p.eps, 0.5 * support);
    uniform_.resize(uniform_nodes);
    parallel_chunks(uniform_nodes, 8, [&](std::size_t, std::size_t b, std::size_t e) {
      for (std::size_t i = b; i < e; ++i) {
        double r = edge_ * static_cast<double>(i) / static_cast<double>(uniform_nodes - 1);
        uniform_[i] = convolved_potential(p, r, spec);
      }
    });
    log_lo_ = std::log(edge_);
    log_hi_ = std::log(support);
    logv_.resize(log_nodes);
    parallel_chunks(log_nodes, 8, [&](std::size_t, std::size_t b, std::size_t e) {
      for (std::size_t i = b; i < e; ++i) {
        double t = log_lo_ + (log_hi_ - log_lo_) * static_cast<double>(i) /
                                 static_cast<double>(log_nodes - 1);
        logv_[i] = convolved_potential(p, std::exp(t), spec);
      }
    });
    logv_.back() = 0.0;  // exact zero at the support edge
    // Clamp out sub-tolerance wiggles so the tabulated U is non-increasing,
    // keeping the Markov-inequality algebra of the energy bounds exact.
    for (std::size_t i = 1; i < uniform_.size(); ++i) {
      uniform_[i] = std::min(uniform_[i], uniform_[i - 1]);
    }
    logv_.front() = std::min(logv_.front(), uniform_.back());
    for (std::size_t i = 1; i < logv_.size(); ++i) {
      logv_[i] = std::min(logv_[i], logv_[i - 1]);
    }
  }

  const KernelParams& params() const { return params_; }

  double operator()(double r) const {
    if (r >= 2.0 * kSupportRadius) return 0.0;
    if (r <= edge_) {
      double x = r / edge_ * static_cast<double>(uniform_.size() - 1);
      std::size_t i = std::min(static_cast<std::size_t>(x), uniform_.size() - 2);
      double f = x - static_cast<double>(i);
      return uniform_[i] + f * (uniform_[i + 1] - uniform_[i]);
    }
    double t = std::log(r);
    double x = (t - log_lo_) / (log_hi_ - log_lo_) * static_cast<double>(logv_.size() - 1);
    std::size_t i = std::min(static_cast<std::size_t>(std::max(x, 0.0)), logv_.size() - 2);
    double f = std::clamp(x - static_cast<double>(i), 0.0, 1.0);
    return logv_[i] + f * (logv_[i + 1] - logv_[i]);
  }

 private:
  KernelParams params_;
  double edge_, log_lo_, log_hi_;
  std::vector<double> uniform_, logv_;
};

/// Surface area of the unit sphere in R^k: k * omega_k.
inline double sphere_surface(int k) { return k * unit_ball_volume(k); }

/// Annulus integral of the squared uncapped potential over r < |x| < 1/e,
/// computed by radial quadrature. Matches the closed form
/// c_{alpha,k}((-log r)^alpha - 1).
inline double annulus_integral(const KernelParams& p, double r, const QuadratureSpec& spec) {
  if (p.eps != 0.0) throw std::invalid_argument("annulus_integral: requires eps = 0");
  if (!(r > 0.0 && r < kSupportRadius)) {
    throw std::invalid_argument("annulus_integral: r must be in (0, 1/e)");
  }
  const int k = p.dim;
  const double surface = sphere_surface(k);
  auto f = [&](double y) {
    double v = detail::potential_core(y, p.alpha, k);
    double shell = (k == 1) ? 1.0 : (k == 2 ? y : y * y);
    return surface * v * v * shell;
  };
  std::vector<double> knots;
  for (double t = 2.0 * r; t < kSupportRadius; t *= 2.0) knots.push_back(t);
  return integrate(f, r, kSupportRadius, spec, knots);
}

/// Ratio of the doubled half-space tail integral of the squared potential to
/// the envelope c_{alpha,k}(-log r)^alpha. Tends to 1 as r -> 0.
inline double half_space_tail(const KernelParams& p, double r, const QuadratureSpec& spec,
                              double r_max = 1e-2) {
  if (p.eps != 0.0) throw std::invalid_argument("half_space_tail: requires eps = 0");
  if (!(r > 0.0 && r < r_max)) {
    throw std::invalid_argument("half_space_tail: r out of range");
  }
  const double c = kernel_constant(p.alpha, p.dim);
  const double denom = c * std::pow(-std::log(r), p.alpha);
  const int k = p.dim;
  if (k == 1) {
    // On the line the half-space {x1 > 2r} is half of the annulus.
    double numerator = c * (std::pow(-std::log(2.0 * r), p.alpha) - 1.0);
    return numerator / denom;
  }
  auto f = [&](double t) {
    double v = detail::potential_core(t, p.alpha, k);
    double cosr = 2.0 * r / t;
    double angular;
    if (k == 2) {
      angular = 2.0 * std::acos(std::min(1.0, cosr)) * t;
    } else {
      angular = 2.0 * M_PI * (1.0 - std::min(1.0, cosr)) * t * t;
    }
    return v * v * angular;
  };
  std::vector<double> knots;
  for (double t = 4.0 * r; t < kSupportRadius; t *= 2.0) knots.push_back(t);
  double tail = integrate(f, 2.0 * r, kSupportRadius, spec, knots);
  return 2.0 * tail / denom;
}

/// Ratio of the strip integral |x1| <= 2r of the product of uncapped
/// potentials centered at 0 and r to (-log r)^alpha. Tends to 0 as r -> 0.
inline double middle_strip(const KernelParams& p, double r, const QuadratureSpec& spec,
                           double r_max = 2e-2) {
  if (p.eps != 0.0) throw std::invalid_argument("middle_strip: requires eps = 0");
  if (!(r > 0.0 && r < r_max)) {
    throw std::invalid_argument("middle_strip: r out of range");
  }
  const double denom = std::pow(-std::log(r), p.alpha);
  const int k = p.dim;
  auto bare = [&](double t) {
    return t > 0.0 && t < kSupportRadius ? detail::potential_core(t, p.alpha, k) : 0.0;
  };
  if (k == 1) {
    double total = 0.0;
    // (-2r, 0): singular at 0.
    total += detail::integrate_sqrt_sub(
        [&](double x) { return bare(-x) * bare(r - x); }, 0.0, -1.0, 2.0 * r, spec);
    // (0, r/2): singular at 0.
    total += detail::integrate_sqrt_sub(
        [&](double x) { return bare(x) * bare(r - x); }, 0.0, 1.0, 0.5 * r, spec);
    // (r/2, r): singular at r.
    total += detail::integrate_sqrt_sub(
        [&](double x) { return bare(x) * bare(r - x); }, r, -1.0, 0.5 * r, spec);
    // (r, 2r): singular at r.
    total += detail::integrate_sqrt_sub(
        [&](double x) { return bare(x) * bare(x - r); }, r, 1.0, r, spec);
    return total / denom;
  }

  QuadratureSpec inner = spec;
  inner.rel_tol = std::max(spec.rel_tol * 0.2, 1e-10);
  inner.max_panels = std::max(spec.max_panels / 8, 2000);
  auto band = [&](double rho) {
    double w = (k == 2) ? rho : rho * rho;
    double v = bare(rho);
    if (v == 0.0) return 0.0;
    double cos_band = std::min(1.0, 2.0 * r / rho);
    double lo = std::acos(cos_band);
    double hi = M_PI - lo;
    auto dist = [&](double theta) {
      return std::sqrt(std::max(0.0, rho * rho + r * r - 2.0 * rho * r * std::cos(theta)));
    };
    auto g = [&](double theta) {
      double u = bare(dist(theta));
      return (k == 2) ? 2.0 * u : 2.0 * M_PI * std::sin(theta) * u;
    };
    std::vector<double> knots;
    double th;
    if (detail::crossing_angle(rho, r, kSupportRadius, th)) knots.push_back(th);
    return w * v * integrate(g, lo, hi, inner, knots);
  };
  std::vector<double> knots{0.5 * r, r, 2.0 * r, 4.0 * r};
  double strip = integrate(band, 0.0, kSupportRadius, spec, knots);
  return strip / denom;
}

/// U(r) / V(r): the quadrature value against the log-power envelope.
inline double envelope_ratio(const KernelParams& p, double r, const QuadratureSpec& spec,
                             double r_max = 1e-2) {
  if (!(p.eps > 0.0)) throw std::invalid_argument("envelope_ratio: requires eps > 0");
  if (!(r >= 0.0 && r < r_max)) {
    throw std::invalid_argument("envelope_ratio: r out of range");
  }
  return convolved_potential_cached(p, r, spec) / comparison_envelope(p, r);
}

}  // namespace logholder
