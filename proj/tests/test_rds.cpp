#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "logholder/rds.hpp"
#include "logholder/rng.hpp"

using namespace logholder;

TEST_CASE("map application examples") {
  CHECK(CircleMap::rotation(0.25).apply_frac(0.9) == Catch::Approx(0.15));
  CircleMap id = CircleMap::projective(1, 0, 0, 1);
  CHECK(id.apply_frac(0.37) == Catch::Approx(0.37));
  CircleMap diag = CircleMap::projective(2, 0, 0, 0.5);
  CHECK(diag.apply_frac(0.25) == Catch::Approx(std::atan2(0.5, 2.0) / M_PI).epsilon(1e-12));
}

TEST_CASE("lifts are strictly increasing and commute with +1") {
  std::vector<CircleMap> maps{
      CircleMap::rotation(0.37),
      CircleMap::sine_perturbed(0.1, 0.8),
      CircleMap::projective(2, 0.3, 0.5, 0.575),
      CircleMap::power_kink(0.4, 0.77),
  };
  // det(2*0.575 - 0.3*0.5) = 1.15 - 0.15 = 1.
  for (const auto& f : maps) {
    double prev = f.lift(-0.5);
    for (int i = 1; i <= 3000; ++i) {
      double x = -0.5 + 2.0 * i / 3000.0;
      double y = f.lift(x);
      CHECK(y > prev);
      prev = y;
    }
    for (double x : {0.0, 0.2, 0.9}) {
      CHECK(f.lift(x + 1.0) == Catch::Approx(f.lift(x) + 1.0).margin(1e-12));
    }
  }
}

TEST_CASE("rotations are exact isometries") {
  CircleMap f = CircleMap::rotation(0.3183);
  SeedStream rng = make_stream(3);
  for (int i = 0; i < 2000; ++i) {
    double x = rng.next_unit(), y = rng.next_unit();
    double d0 = circle_distance(x, y);
    double d1 = circle_distance(f.apply_frac(x), f.apply_frac(y));
    CHECK(std::fabs(d0 - d1) <= 1e-15);
  }
}

TEST_CASE("analytic bi-Lipschitz constants") {
  CHECK(lipschitz_constant(CircleMap::rotation(0.1)) == 1.0);
  CHECK(lipschitz_constant(CircleMap::sine_perturbed(0.0, 0.5)) == Catch::Approx(2.0));
  CHECK(lipschitz_constant(CircleMap::projective(2, 0, 0, 0.5)) == Catch::Approx(4.0));

  // Dense derivative-range cross-checks.
  CircleMap s = CircleMap::sine_perturbed(0.2, 0.5);
  double max_ratio = 0.0, min_ratio = 1e300;
  const double h = 1e-7;
  for (int i = 0; i < 20000; ++i) {
    double x = i / 20000.0;
    double r = circle_distance(s.apply_frac(x), s.apply_frac(x + h)) / h;
    max_ratio = std::max(max_ratio, r);
    min_ratio = std::min(min_ratio, r);
  }
  CHECK(max_ratio == Catch::Approx(1.5).epsilon(1e-4));
  CHECK(1.0 / min_ratio == Catch::Approx(2.0).epsilon(1e-4));

  CircleMap a = CircleMap::projective(2, 0, 0, 0.5);
  double amax = 0.0;
  for (int i = 0; i < 20000; ++i) {
    double x = i / 20000.0;
    amax = std::max(amax, circle_distance(a.apply_frac(x), a.apply_frac(x + h)) / h);
  }
  CHECK(amax == Catch::Approx(4.0).epsilon(1e-3));

  CHECK_THROWS_AS(lipschitz_constant(CircleMap::power_kink(0.5, 0.0)), std::invalid_argument);
}

TEST_CASE("bi-Lipschitz sandwich on random pairs") {
  std::vector<CircleMap> maps{CircleMap::sine_perturbed(0.3, 0.6),
                              CircleMap::projective(1.7, 0.2, 0.3, (1 + 0.2 * 0.3) / 1.7)};
  SeedStream rng = make_stream(17);
  for (const auto& f : maps) {
    double lip = lipschitz_constant(f);
    for (int i = 0; i < 3000; ++i) {
      double x = rng.next_unit(), y = rng.next_unit();
      double d = circle_distance(x, y);
      double fd = circle_distance(f.apply_frac(x), f.apply_frac(y));
      CHECK(fd <= lip * d * (1.0 + 1e-12) + 1e-15);
      CHECK(fd >= d / lip * (1.0 - 1e-12) - 1e-15);
    }
  }
}

TEST_CASE("Hoelder constants and the distortion sandwich") {
  CircleMap kink = CircleMap::power_kink(0.5, 0.0);
  HolderConstants hc = holder_constants(kink);
  CHECK(hc.exponent == 0.5);
  CHECK(hc.scale > 0.0);

  // d(f(x), f(z)) >= (d(x, z)/L)^(2/gamma) on random pairs.
  SeedStream rng = make_stream(23);
  for (int i = 0; i < 4000; ++i) {
    double x = rng.next_unit(), z = rng.next_unit();
    double d = circle_distance(x, z);
    if (d == 0.0) continue;
    double fd = circle_distance(kink.apply_frac(x), kink.apply_frac(z));
    double bound = std::pow(d / hc.scale, 2.0 / hc.exponent);
    CHECK(fd >= bound * (1.0 - 1e-10));
  }

  HolderConstants rot = holder_constants(CircleMap::rotation(0.25));
  CHECK(rot.exponent == 1.0);
  CHECK(rot.scale == Catch::Approx(std::sqrt(0.5)).epsilon(1e-6));
}

TEST_CASE("empirical regularity estimates") {
  RegularityEstimate rot = estimate_regularity(CircleMap::rotation(0.3), 2000, 7);
  CHECK(rot.lip_hat == Catch::Approx(1.0).margin(1e-10));
  CHECK(rot.gamma_hat == Catch::Approx(1.0).margin(0.05));

  RegularityEstimate sine = estimate_regularity(CircleMap::sine_perturbed(0.1, 0.5), 6000, 7);
  CHECK(sine.lip_hat >= 1.9);
  CHECK(sine.lip_hat <= 2.0 + 1e-9);

  RegularityEstimate kink = estimate_regularity(CircleMap::power_kink(0.5, 0.37), 4000, 7);
  CHECK(kink.gamma_hat >= 0.45);
  CHECK(kink.gamma_hat <= 0.55);

  // Estimator consistency: estimated exponent below analytic + 0.05.
  HolderConstants hc = holder_constants(CircleMap::power_kink(0.5, 0.37));
  CHECK(kink.gamma_hat <= hc.exponent + 0.05);
}

TEST_CASE("finite-support sampling") {
  CircleMap f1 = CircleMap::rotation(0.25);
  CircleMap f2 = CircleMap::rotation(0.75);
  auto single = RandomMapFamily::finite_support({f1}, {1.0});
  for (int i = 0; i < 10; ++i) {
    SeedStream s = make_stream(55, i);
    CHECK(sample_map(single, s).angle() == 0.25);
  }

  auto pair = RandomMapFamily::finite_support({f1, f2}, {0.5, 0.5});
  int count1 = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    SeedStream s = make_stream(56, i);
    if (sample_map(pair, s).angle() == 0.25) ++count1;
  }
  double sigma = std::sqrt(0.25 * n);
  CHECK(std::fabs(count1 - n / 2.0) <= 4.0 * sigma);

  CHECK_THROWS_AS(RandomMapFamily::finite_support({f1}, {0.5}), std::invalid_argument);
}

TEST_CASE("heavy-tail moments: closed form and divergence trend") {
  auto mu = RandomMapFamily::sl2_heavy_tail(2.0, 0.1);
  // log biLip = 2s with s Pareto(2, 0.1): E[2s] = 2 p s0/(p-1) = 0.4.
  MomentEstimate m1 = moment_integral(mu, 1.0, 20000, 42);
  CHECK(m1.value == Catch::Approx(0.4).margin(0.05));
  CHECK(m1.declared_finite);

  // Above the tail index the estimate grows with the sample size. Heavy
  // tails make single runs volatile, so the trend is frozen at this seed.
  MomentEstimate t3 = moment_integral(mu, 3.0, 1000, 3);
  MomentEstimate t4 = moment_integral(mu, 3.0, 10000, 3);
  MomentEstimate t5 = moment_integral(mu, 3.0, 100000, 3);
  CHECK_FALSE(t3.declared_finite);
  CHECK(t3.value < t4.value);
  CHECK(t4.value < t5.value);
  CHECK(t5.value > 10.0 * t3.value);

  // Isometric family: the moment vanishes identically.
  auto iso = RandomMapFamily::finite_support(
      {CircleMap::rotation(0.1), CircleMap::rotation(0.6)}, {0.5, 0.5});
  CHECK(moment_integral(iso, 1.0, 500, 1).value == 0.0);
}

TEST_CASE("sampled sl2 maps have unit determinant and consistent tails") {
  auto mu = RandomMapFamily::sl2_heavy_tail(3.0, 0.2);
  for (int i = 0; i < 200; ++i) {
    SeedStream s = make_stream(77, i);
    CircleMap f = sample_map(mu, s);
    const double* m = f.matrix();
    CHECK(std::fabs(m[0] * m[3] - m[1] * m[2] - 1.0) <= 1e-12);
    CHECK(lipschitz_constant(f) <= mu.truncation() * (1.0 + 1e-9));
  }
}

TEST_CASE("kink family draws valid exponents") {
  auto mu = RandomMapFamily::kink_heavy_tail(2.0);
  for (int i = 0; i < 200; ++i) {
    SeedStream s = make_stream(78, i);
    CircleMap f = sample_map(mu, s);
    CHECK(f.kind() == MapKind::power_kink);
    CHECK(f.exponent() > 0.0);
    CHECK(f.exponent() <= 1.0);
  }
}

TEST_CASE("map separation proxy for non-degeneracy") {
  CircleMap f1 = CircleMap::rotation(0.25);
  CircleMap f2 = CircleMap::rotation(0.75);
  CHECK(map_separation(f1, f2) >= 0.25);
  CHECK(map_separation(f1, f1) == 0.0);
}
