#pragma once

#include <algorithm>
#include <cmath>
#include <queue>
#include <stdexcept>
#include <vector>

namespace logholder {

struct QuadratureSpec {
  double rel_tol = 1e-9;
  double abs_tol = 1e-13;
  int max_panels = 40000;
};

class QuadratureError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

// Gauss-Kronrod 15(7) nodes on [-1, 1] and weights.
inline constexpr double kKronrodNodes[8] = {
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000};

inline constexpr double kKronrodWeights[8] = {
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714};

inline constexpr double kGaussWeights[4] = {
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327};

template <typename F>
void gk15(const F& f, double a, double b, double& integral, double& error) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  double fc = f(c);
  double kron = kKronrodWeights[7] * fc;
  double gauss = kGaussWeights[3] * fc;
  for (int i = 0; i < 7; ++i) {
    double x = h * kKronrodNodes[i];
    double v = f(c - x) + f(c + x);
    kron += kKronrodWeights[i] * v;
    if (i % 2 == 1) gauss += kGaussWeights[i / 2] * v;
  }
  integral = kron * h;
  // Conservative estimate: the raw Kronrod-Gauss difference. Overestimates
  // on smooth panels, which only costs extra subdivision.
  error = std::fabs(kron - gauss) * h;
}

struct Panel {
  double a, b, integral, error;
  bool operator<(const Panel& o) const { return error < o.error; }
};

}  // namespace detail

/// Adaptive Gauss-Kronrod integration of f over [a, b], with the panel set
/// seeded at the supplied knots (kinks, plateau edges, support boundaries).
template <typename F>
double integrate(F&& f, double a, double b, const QuadratureSpec& spec,
                 const std::vector<double>& knots = {}) {
  if (!(b > a)) return 0.0;
  std::vector<double> cuts{a, b};
  for (double k : knots) {
    if (k > a && k < b) cuts.push_back(k);
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  std::priority_queue<detail::Panel> queue;
  double total = 0.0, total_err = 0.0;
  int panels = 0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    detail::Panel p{cuts[i], cuts[i + 1], 0.0, 0.0};
    detail::gk15(f, p.a, p.b, p.integral, p.error);
    total += p.integral;
    total_err += p.error;
    queue.push(p);
    ++panels;
  }

  auto tolerance = [&](double t) {
    return std::max(spec.abs_tol, spec.rel_tol * std::fabs(t));
  };

  while (total_err > tolerance(total)) {
    if (panels >= spec.max_panels) {
      throw QuadratureError("integrate: panel budget exhausted before reaching tolerance");
    }
    detail::Panel worst = queue.top();
    queue.pop();
    double mid = 0.5 * (worst.a + worst.b);
    if (mid <= worst.a || mid >= worst.b) {
      // Panel narrower than double spacing; its error estimate is final.
      total_err -= worst.error;
      continue;
    }
    detail::Panel left{worst.a, mid, 0.0, 0.0};
    detail::Panel right{mid, worst.b, 0.0, 0.0};
    detail::gk15(f, left.a, left.b, left.integral, left.error);
    detail::gk15(f, right.a, right.b, right.integral, right.error);
    total += left.integral + right.integral - worst.integral;
    total_err += left.error + right.error - worst.error;
    queue.push(left);
    queue.push(right);
    ++panels;
  }
  return total;
}

}  // namespace logholder
