#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "logholder/energy.hpp"
#include "logholder/rng.hpp"

using namespace logholder;

namespace {
const QuadratureSpec kSpec{1e-9, 1e-13, 40000};

EmpiricalMeasure random_measure(std::size_t n, std::uint64_t seed) {
  SeedStream rng = make_stream(seed);
  std::vector<double> pos(n), w(n, 1.0 / static_cast<double>(n));
  for (auto& x : pos) x = rng.next_unit();
  return EmpiricalMeasure(std::move(pos), std::move(w));
}
}  // namespace

TEST_CASE("pair energy: deltas and two-atom closed form") {
  KernelParams p(1.0, 1e-3, 1);
  EnergyContext ctx(p, kSpec);

  EmpiricalMeasure d = EmpiricalMeasure::delta(0.42);
  double u0 = convolved_potential(p, 0.0, kSpec);
  CHECK(pair_energy(d, ctx) == Catch::Approx(u0).epsilon(1e-10));
  CHECK(pair_energy(d, ctx) <= pair_energy_upper_bound(p));

  const double r = 0.07;
  EmpiricalMeasure two({0.2, 0.2 + r}, {0.5, 0.5});
  double ur = convolved_potential(p, r, kSpec);
  CHECK(pair_energy(two, ctx) == Catch::Approx(0.5 * (u0 + ur)).epsilon(1e-10));
}

TEST_CASE("pair energy is stable under atom refinement") {
  KernelParams p(1.0, 1e-3, 1);
  EnergyContext ctx(p, kSpec);
  double e1 = pair_energy(EmpiricalMeasure::uniform_atoms(1000), ctx);
  double e2 = pair_energy(EmpiricalMeasure::uniform_atoms(2000), ctx);
  CHECK(e1 == Catch::Approx(e2).epsilon(0.01));
}

TEST_CASE("pair energy paths agree: dedupe, table, sampled") {
  KernelParams p(1.0, 1e-3, 1);
  EnergyContext ctx(p, kSpec);

  // A generic cloud small enough for the exact deduplicated path.
  EmpiricalMeasure cloud = random_measure(80, 21);
  PairEnergyResult exact = pair_energy_detail(cloud, ctx);
  CHECK(exact.method == "dedupe-exact");

  PairEnergyOptions table_opts;
  table_opts.dedupe_limit = 10;
  PairEnergyResult tab = pair_energy_detail(cloud, ctx, table_opts);
  CHECK(tab.method == "table-pairwise");
  CHECK(tab.value == Catch::Approx(exact.value).epsilon(1e-5));

  // A structured measure keeps the deduplicated set tiny even at large n.
  EmpiricalMeasure grid_nu = EmpiricalMeasure::uniform_atoms(600);
  PairEnergyResult structured = pair_energy_detail(grid_nu, ctx);
  CHECK(structured.method == "dedupe-exact");

  PairEnergyOptions sample_opts;
  sample_opts.dedupe_limit = 10;
  sample_opts.exact_limit = 100;
  sample_opts.sample_pairs = 400000;
  sample_opts.seed = 5;
  PairEnergyResult est = pair_energy_detail(grid_nu, ctx, sample_opts);
  CHECK(est.method == "sampled");
  CHECK(est.std_error > 0.0);
  double table_value = pair_energy_detail(grid_nu, ctx, table_opts).value;
  CHECK(std::fabs(est.value - table_value) <= 5.0 * est.std_error);
}

TEST_CASE("unconditional upper bound on random measures") {
  for (double alpha : {0.5, 1.0, 2.0}) {
    for (double eps : {1e-2, 1e-3}) {
      KernelParams p(alpha, eps, 1);
      EnergyContext ctx(p, kSpec);
      for (int trial = 0; trial < 3; ++trial) {
        EmpiricalMeasure nu = random_measure(80, 1000 + trial);
        CHECK(pair_energy(nu, ctx) <= pair_energy_upper_bound(p));
      }
    }
  }
}

TEST_CASE("interaction kernel: antipodal wrap and self closed form") {
  double eps = 1e-2;
  KernelParams p(1.0, eps, 1);
  CircleGrid grid(4000);

  // On the unit-circumference circle the support arcs always overlap
  // (diameter 1/2 < 2/e), and the kernel at separation d picks up both
  // routes around: K(d) = U(d) + U(1 - d).
  double k_half = interaction_kernel(CirclePoint(0.1), CirclePoint(0.6), p, grid);
  double wrap = 2.0 * convolved_potential(p, 0.5, kSpec);
  CHECK(k_half == Catch::Approx(wrap).epsilon(5e-3));

  // Self value: 2 [eps phi(eps)^2 + int_eps^{1/e} phi^2].
  double plateau = capped_potential(p, 0.0);
  double tail = 0.5 * kernel_constant(p.alpha, 1) * (std::pow(-std::log(eps), p.alpha) - 1.0);
  double expected = 2.0 * (eps * plateau * plateau + tail);
  double got = interaction_kernel(CirclePoint(0.3), CirclePoint(0.3), p, grid);
  CHECK(got == Catch::Approx(expected).epsilon(5e-3));
}

TEST_CASE("interaction kernel tracks the convolved potential off the wrap zone") {
  double eps = 1e-3;
  KernelParams p(1.0, eps, 1);
  CircleGrid grid(20000);
  for (double d : {5e-3, 0.05, 0.2}) {
    double k = interaction_kernel(CirclePoint(0.3), CirclePoint(0.3 + d), p, grid);
    double u = convolved_potential(p, d, kSpec);
    CHECK(k == Catch::Approx(u).epsilon(5e-3));
  }
}

TEST_CASE("triple-integral identity on a fixed grid") {
  double eps = 2e-2;
  KernelParams p(1.0, eps, 1);
  CircleGrid grid(2000);
  EmpiricalMeasure nu = random_measure(25, 77);

  double e_tilde = grid_energy(nu, p, grid);
  KahanSum pairs;
  for (std::size_t i = 0; i < nu.size(); ++i) {
    for (std::size_t j = 0; j < nu.size(); ++j) {
      pairs.add(nu.weights()[i] * nu.weights()[j] *
                interaction_kernel(CirclePoint(nu.positions()[i]),
                                   CirclePoint(nu.positions()[j]), p, grid));
    }
  }
  CHECK(e_tilde == Catch::Approx(pairs.value()).epsilon(1e-8));

  // Single atom reduces to the self kernel value.
  EmpiricalMeasure d = EmpiricalMeasure::delta(0.123);
  CHECK(grid_energy(d, p, grid) ==
        Catch::Approx(interaction_kernel(CirclePoint(0.123), CirclePoint(0.123), p, grid))
            .epsilon(1e-12));
}

TEST_CASE("normalized squared density") {
  double eps = 1e-2;
  KernelParams p(1.0, eps, 1);
  CircleGrid grid(2000);

  GridDensity theta = normalized_square_density(EmpiricalMeasure::delta(0.25), p, grid);
  CHECK(theta.integral() == Catch::Approx(1.0).margin(1e-8));
  std::size_t peak = 0;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    if (theta.values()[g] > theta.values()[peak]) peak = g;
  }
  // The plateau makes theta flat within eps of the atom; any plateau node
  // may win the argmax.
  CHECK(circle_distance(grid.node(peak), 0.25) <= eps + 2.0 / 2000.0);

  GridDensity flat = normalized_square_density(EmpiricalMeasure::uniform_atoms(20000), p, grid);
  double lo = 1e300, hi = 0.0;
  for (double v : flat.values()) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  CHECK(hi / lo == Catch::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("one-step Hoelder bound") {
  KernelParams p(0.5, 1e-4, 1);
  EnergyContext ctx(p, kSpec);
  EmpiricalMeasure nu = EmpiricalMeasure::uniform_arc(0.3, 5e-4, 400, 15);

  // Isometry: left side equals the base energy, bound holds with slack.
  auto [lhs_rot, rhs_rot] = one_step_holder_bound(nu, CircleMap::rotation(0.37), ctx, 0.5);
  CHECK(lhs_rot == Catch::Approx(pair_energy(nu, ctx)).epsilon(1e-9));
  CHECK(lhs_rot <= rhs_rot);

  // Kink map on a clustered measure.
  CircleMap kink = CircleMap::power_kink(0.5, 0.11);
  auto [lhs_k, rhs_k] = one_step_holder_bound(nu, kink, ctx, 0.5);
  CHECK(lhs_k <= rhs_k);

  // Two-sided high-energy comparison at delta = 0.5.
  HolderConstants hc = holder_constants(kink);
  double factor = std::pow(2.0 * (1.0 + std::log(hc.scale)) / hc.exponent, p.alpha);
  double ratio = lhs_k / pair_energy(nu, ctx);
  CHECK(ratio <= factor * 1.5);
  CHECK(ratio >= 1.0 / (factor * 1.5));

  CHECK_THROWS_AS(
      one_step_holder_bound(nu, kink, EnergyContext(KernelParams(1.5, 1e-4, 1), kSpec), 0.5),
      std::invalid_argument);
}

TEST_CASE("averaged step ratio") {
  KernelParams p(0.5, 1e-3, 1);
  CircleGrid grid(20000);
  EmpiricalMeasure nu = EmpiricalMeasure::uniform_arc(0.55, 2e-3, 300, 8);

  auto iso = RandomMapFamily::finite_support({CircleMap::rotation(0.3)}, {1.0});
  AveragedStepRatio r1 = averaged_step_ratio(iso, nu, p, grid, 3, 4);
  CHECK(r1.ratio == Catch::Approx(1.0).margin(1e-9));

  AveragedStepRatio single = averaged_step_ratio(iso, nu, p, grid, 1, 4);
  CHECK(single.std_error == 0.0);
  CHECK(single.ratio == Catch::Approx(1.0).margin(1e-9));

  // Heavy-tail Lipschitz family at small alpha on a high-energy measure.
  auto mu = RandomMapFamily::sl2_heavy_tail(3.0, 0.05);
  AveragedStepRatio r2 = averaged_step_ratio(mu, nu, p, grid, 48, 4);
  CHECK(r2.ratio > 0.8);
  CHECK(r2.ratio < 1.2);
  CHECK(r2.std_error > 0.0);
}

TEST_CASE("wasserstein stability of the squared-density measure") {
  KernelParams p(1.0, 1e-2, 1);
  CircleGrid grid(10000);
  EmpiricalMeasure nu = EmpiricalMeasure::uniform_arc(0.4, 5e-2, 500, 19);

  CircleMap identity = CircleMap::rotation(0.0);
  CHECK(wasserstein_stability(nu, identity, p, grid) <= 1e-10);

  CircleMap rot = CircleMap::rotation(0.331);
  CHECK(wasserstein_stability(nu, rot, p, grid) <= 2.0 / 10000.0);

  // Sine perturbation: stability distance shrinks as the mass concentrates.
  CircleMap f = CircleMap::sine_perturbed(0.17, 0.3);
  double prev = 1e300;
  for (double arc : {0.2, 0.02, 0.002}) {
    EmpiricalMeasure m = EmpiricalMeasure::uniform_arc(0.4, arc, 500, 19);
    double w = wasserstein_stability(m, f, p, grid);
    CHECK(w < prev * 1.1);
    prev = w;
  }
}

TEST_CASE("contraction step: identity control and two-rotation oracle") {
  KernelParams p(1.0, 1e-3, 1);
  EnergyContext ctx(p, kSpec);

  auto identity = RandomMapFamily::finite_support({CircleMap::rotation(0.0)}, {1.0});
  EmpiricalMeasure nu = random_measure(500, 33);
  auto [before_id, after_id] = contraction_step(identity, nu, ctx, 12);
  CHECK(after_id.e_pair == before_id.e_pair);

  auto two = RandomMapFamily::finite_support(
      {CircleMap::rotation(0.25), CircleMap::rotation(-0.25)}, {0.5, 0.5});
  EmpiricalMeasure d0 = EmpiricalMeasure::delta(0.0, 10000);
  auto [before, after] = contraction_step(two, d0, ctx, 77);
  CHECK(before.e_pair == Catch::Approx(convolved_potential(p, 0.0, kSpec)).epsilon(1e-6));

  // Exact two-outcome value at the realized split.
  EmpiricalMeasure stepped = convolve(two, d0, 77);
  double m1 = ball_mass(stepped, CirclePoint(0.25), 1e-9);
  double m2 = 1.0 - m1;
  double u0 = convolved_potential(p, 0.0, kSpec);
  double uh = convolved_potential(p, 0.5, kSpec);
  double oracle = (m1 * m1 + m2 * m2) * u0 + 2.0 * m1 * m2 * uh;
  CHECK(after.e_pair == Catch::Approx(oracle).epsilon(1e-5));

  // Binomial-tolerance agreement with the ideal half/half split.
  double sigma = std::sqrt(0.25 / 10000.0);
  double delta_sq = 4.0 * sigma * 4.0 * sigma;
  double ideal = 0.5 * u0 + 0.5 * uh;
  CHECK(std::fabs(after.e_pair - ideal) <= 2.0 * delta_sq * (u0 - uh) + 1e-9);
  CHECK(after.e_pair < before.e_pair);
}

TEST_CASE("energy report fields") {
  KernelParams p(1.0, 1e-2, 1);
  EnergyContext ctx(p, kSpec);
  CircleGrid grid(1000);
  EmpiricalMeasure nu = random_measure(50, 3);
  EnergyReport rep = make_energy_report(nu, ctx, &grid);
  CHECK(rep.n_atoms == 50);
  CHECK(rep.grid_size == 1000);
  CHECK(rep.e_pair > 0.0);
  REQUIRE(rep.e_tilde.has_value());
  CHECK(*rep.e_tilde > 0.0);
  CHECK(rep.e_pair <= pair_energy_upper_bound(p));

  EnergyReport no_grid = make_energy_report(nu, ctx);
  CHECK_FALSE(no_grid.e_tilde.has_value());
  CHECK(no_grid.grid_size == 0);
}
