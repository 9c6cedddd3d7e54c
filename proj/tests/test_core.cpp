#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "logholder/geometry.hpp"
#include "logholder/parallel.hpp"
#include "logholder/quadrature.hpp"
#include "logholder/rng.hpp"

using namespace logholder;

TEST_CASE("circle points reduce mod 1") {
  CHECK(CirclePoint(1.25).position() == Catch::Approx(0.25));
  CHECK(CirclePoint(-0.25).position() == Catch::Approx(0.75));
  CHECK(CirclePoint(1.0).position() == 0.0);
  CHECK_THROWS_AS(CirclePoint(std::nan("")), std::invalid_argument);
}

TEST_CASE("circle distance examples") {
  CHECK(circle_distance(CirclePoint(0.1), CirclePoint(0.1)) == 0.0);
  CHECK(circle_distance(CirclePoint(0.0), CirclePoint(0.75)) == Catch::Approx(0.25));
  CHECK(circle_distance(CirclePoint(0.2), CirclePoint(0.6)) == Catch::Approx(0.4));
}

TEST_CASE("circle distance is a metric with diameter 1/2") {
  SeedStream rng = make_stream(7);
  for (int i = 0; i < 2000; ++i) {
    CirclePoint a(rng.next_unit()), b(rng.next_unit()), c(rng.next_unit());
    double ab = circle_distance(a, b);
    double bc = circle_distance(b, c);
    double ac = circle_distance(a, c);
    CHECK(ab >= 0.0);
    CHECK(ab <= 0.5);
    CHECK(ab == circle_distance(b, a));
    CHECK(ac <= ab + bc + 1e-15);
    if (!(a == b)) CHECK(ab > 0.0);
  }
}

TEST_CASE("unit ball volumes") {
  CHECK(unit_ball_volume(1) == 2.0);
  CHECK(unit_ball_volume(2) == Catch::Approx(M_PI));
  CHECK(unit_ball_volume(3) == Catch::Approx(4.0 * M_PI / 3.0));
  CHECK_THROWS_AS(unit_ball_volume(4), std::invalid_argument);
}

TEST_CASE("grid nodes and doubling") {
  CircleGrid g(8);
  CHECK(g.node(3) == 3.0 / 8.0);
  CHECK(g.cell_weight() * static_cast<double>(g.size()) == 1.0);
  CHECK(g.doubled().size() == 16);
  // Doubled grids contain the original nodes exactly.
  CircleGrid g2 = g.doubled();
  for (std::size_t j = 0; j < g.size(); ++j) CHECK(g2.node(2 * j) == g.node(j));
}

TEST_CASE("grid Riemann sums converge at rate 1/G") {
  // Smooth on [0,1) but not periodic, so the node sum carries an O(1/G)
  // boundary term.
  auto f = [](double x) { return x * x; };
  const double exact = 1.0 / 3.0;
  std::vector<double> errs;
  for (std::size_t g = 64; g <= 1024; g *= 2) {
    CircleGrid grid(g);
    double s = 0.0;
    for (std::size_t j = 0; j < grid.size(); ++j) s += f(grid.node(j));
    errs.push_back(std::fabs(s * grid.cell_weight() - exact));
  }
  for (std::size_t i = 0; i + 1 < errs.size(); ++i) {
    double ratio = errs[i] / errs[i + 1];
    CHECK(ratio > 1.7);
    CHECK(ratio < 2.3);
  }
}

TEST_CASE("seed streams are reproducible and label-sensitive") {
  SeedStream a = make_stream(42, 1, 2, 3);
  SeedStream b = make_stream(42, 1, 2, 3);
  SeedStream c = make_stream(42, 1, 2, 4);
  bool all_equal = true, any_diff = false;
  for (int i = 0; i < 100; ++i) {
    double x = a.next_unit();
    all_equal = all_equal && (x == b.next_unit());
    any_diff = any_diff || (x != c.next_unit());
    CHECK(x >= 0.0);
    CHECK(x < 1.0);
  }
  CHECK(all_equal);
  CHECK(any_diff);
}

TEST_CASE("parallel sum is bit-stable across thread counts") {
  const std::size_t n = 100000;
  std::vector<double> xs(n);
  SeedStream rng = make_stream(11);
  for (auto& x : xs) x = rng.next_unit() - 0.5;

  auto run = [&](int threads) {
    set_thread_count(threads);
    return parallel_sum(n, 4096, [&](std::size_t b, std::size_t e) {
      KahanSum s;
      for (std::size_t i = b; i < e; ++i) s.add(xs[i]);
      return s.value();
    });
  };
  double s1 = run(1);
  double s4 = run(4);
  set_thread_count(0);
  CHECK(s1 == s4);
}

TEST_CASE("adaptive quadrature on smooth and kinked integrands") {
  QuadratureSpec spec;
  CHECK(integrate([](double x) { return x * x; }, 0.0, 1.0, spec) ==
        Catch::Approx(1.0 / 3.0).epsilon(1e-12));
  // |x - 0.3| has a kink; pass it as a knot.
  double v = integrate([](double x) { return std::fabs(x - 0.3); }, 0.0, 1.0, spec, {0.3});
  CHECK(v == Catch::Approx(0.5 * (0.09 + 0.49)).epsilon(1e-12));
  // Integrable endpoint singularity: open rule plus bisection handles it.
  double s = integrate([](double x) { return 1.0 / std::sqrt(x); }, 0.0, 1.0, spec);
  CHECK(s == Catch::Approx(2.0).epsilon(1e-7));
}

TEST_CASE("quadrature failure is signalled") {
  QuadratureSpec starved;
  starved.rel_tol = 1e-14;
  starved.abs_tol = 1e-300;
  starved.max_panels = 4;
  CHECK_THROWS_AS(
      integrate([](double x) { return 1.0 / std::sqrt(x); }, 0.0, 1.0, starved),
      QuadratureError);
}
