#include <utility>
#include <algorithm>
#include <cmath>
#include <cstdlib>

#include "doctest.h"
#include "hybridfp/monte_carlo.hpp"

using namespace hybridfp;
using namespace hybridfp::mc;

namespace {

const auto det = HybridSystemSpec::deterministic_guard(1.0, 3.0, 2.0, 1.0);
const auto sde05 = HybridSystemSpec::sde_guard(1.0, 3.0, 1.0, 2.0, 1.0);
const RateFunction ramp{100.0, 0.25, 2.0};
const auto pois = HybridSystemSpec::sde_poisson(1.0, 3.0, 1.0, 1.0, ramp);

McParams params(std::size_t n, std::uint64_t seed = 99) {
  McParams p;
  p.n_particles = n;
  p.rng_seed = seed;
  return p;
}

}  // namespace

TEST_SUITE("mc") {

TEST_CASE("deterministic step and guard reset") {
  auto e = make_ensemble(params(2), point_mass(1.99));
  mc_step(e, det, 0.02);
  CHECK(e.positions[0] == 1.0);
  CHECK(e.jump_count == 2);
  CHECK(e.time == 0.02);

  auto f = make_ensemble(params(1), point_mass(0.5));
  const auto g = mc_step(std::as_const(f), det, 0.01);
  CHECK(g.positions[0] == 0.5 + 2.5 * 0.01);
  CHECK(f.positions[0] == 0.5);
  CHECK(std::abs(g.positions[0] - exact_flow_map(det, 0.5, 0.01)) <= 0.01 * 0.01 * 2.5);
}

TEST_CASE("thinning probability on the rate plateau") {
  const std::size_t n = 200000;
  auto e = make_ensemble(params(n), point_mass(3.0));
  mc_step(e, pois, 1e-3);
  const double p = -std::expm1(-0.1);
  CHECK(p == doctest::Approx(0.09516).epsilon(1e-4));
  const double observed = static_cast<double>(e.jump_count) / n;
  const double stderr_p = std::sqrt(p * (1.0 - p) / n);
  CHECK(std::abs(observed - p) <= 4.0 * stderr_p);
  const auto at_a = std::count(e.positions.begin(), e.positions.end(), 1.0);
  CHECK(static_cast<std::uint64_t>(at_a) == e.jump_count);
}

TEST_CASE("seeded determinism and worker independence") {
  const double times[] = {0.0, 0.2};
  const auto sampler = gaussian_for(pois, 1.0, 0.125);
  const auto a = run_ensemble(params(10000, 7), pois, sampler, 0.2, times);
  const auto b = run_ensemble(params(10000, 7), pois, sampler, 0.2, times);
  CHECK(a.back().positions == b.back().positions);
  const auto c = run_ensemble(params(10000, 8), pois, sampler, 0.2, times);
  CHECK(a.back().positions != c.back().positions);

  ::setenv("HYBRIDFP_THREADS", "3", 1);
  CHECK(worker_count() == 3);
  const auto d = run_ensemble(params(10000, 7), pois, sampler, 0.2, times);
  ::setenv("HYBRIDFP_THREADS", "1", 1);
  const auto e = run_ensemble(params(10000, 7), pois, sampler, 0.2, times);
  ::unsetenv("HYBRIDFP_THREADS");
  CHECK(d.back().positions == a.back().positions);
  CHECK(e.back().positions == a.back().positions);
}

TEST_CASE("snapshots") {
  const double zero[] = {0.0};
  const auto init = run_ensemble(params(500), sde05, gaussian_for(sde05, 1.0, 0.125), 0.0, zero);
  REQUIRE(init.size() == 1);
  CHECK(init[0].time == 0.0);
  CHECK(init[0].positions == make_ensemble(params(500), gaussian_for(sde05, 1.0, 0.125)).positions);

  const double half[] = {0.5};
  const auto moved = run_ensemble(params(100), det, point_mass(1.0), 0.5, half);
  const double target = exact_flow_map(det, 1.0, 0.5);
  for (double x : moved[0].positions) CHECK(std::abs(x - target) <= 5e-3);
}

TEST_CASE("guard invariant holds after every step") {
  auto e = make_ensemble(params(20000), gaussian_for(sde05, 1.0, 0.125));
  for (int k = 0; k < 500; ++k) {
    mc_step(e, sde05, 1e-3);
    CHECK(*std::max_element(e.positions.begin(), e.positions.end()) < 2.0);
  }
  const auto t = make_ensemble(params(20000), truncated_gaussian(1.9, 0.5, 2.0));
  CHECK(*std::max_element(t.positions.begin(), t.positions.end()) < 2.0);
}

TEST_CASE("jump counts stay finite") {
  const double times[] = {2.5};
  const auto e = run_ensemble(params(20000), pois, gaussian_for(pois, 1.0, 0.125), 2.5, times);
  const double per_particle = static_cast<double>(e[0].jump_count) / 20000.0;
  CHECK(per_particle > 0.0);
  CHECK(per_particle < 50.0);
}

TEST_CASE("histogram density") {
  const auto g = Grid::uniform(0.0, 1.0, 100);
  auto one = make_ensemble(params(1000), point_mass(0.555));
  const auto h = histogram_density(one, g);
  CHECK(h.values[55] == doctest::Approx(1.0 / g.dx()));
  CHECK(total_mass(h, g) == doctest::Approx(1.0));

  auto outside = make_ensemble(params(10), point_mass(3.0));
  const auto z = histogram_density(outside, g);
  CHECK(std::all_of(z.values.begin(), z.values.end(), [](double v) { return v == 0.0; }));

  // Uniform particles: each cell count is binomial(N, dx).
  const std::size_t n = 1000000;
  Ensemble u = make_ensemble(params(n), [](Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); });
  const auto hu = histogram_density(u, g);
  const double p = g.dx();
  const double stderr_v = std::sqrt(p * (1.0 - p) / n) / g.dx();
  for (double v : hu.values) CHECK(std::abs(v - 1.0) <= 5.0 * stderr_v);
  CHECK(total_mass(hu, g) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("sample statistics") {
  auto e = make_ensemble(params(1000), gaussian_for(pois, 1.0, 0.125));
  const auto k = mc_expectation(e, [](double) { return 4.2; });
  CHECK(k.mean == doctest::Approx(4.2).epsilon(1e-15));
  CHECK(k.stderr_ == 0.0);
  const auto ind = mc_expectation(e, [](double x) { return x > -100.0 ? 1.0 : 0.0; });
  CHECK(ind.mean == 1.0);
  CHECK(ind.stderr_ == 0.0);

  // Against a direct two-pass computation.
  double s = 0.0;
  for (double x : e.positions) s += x;
  const double mean = s / 1000.0;
  double ss = 0.0;
  for (double x : e.positions) ss += (x - mean) * (x - mean);
  const auto id = mc_expectation(e, [](double x) { return x; });
  CHECK(id.mean == doctest::Approx(mean).epsilon(1e-13));
  CHECK(id.stderr_ == doctest::Approx(std::sqrt(ss / 999.0 / 1000.0)).epsilon(1e-12));
}

TEST_CASE("parameter validation and stream seeds") {
  CHECK_THROWS_AS(params(0).validate(), std::invalid_argument);
  auto p = params(10);
  p.dt = 0.02;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  CHECK(derive_stream_seed(1, 0) != derive_stream_seed(1, 1));
  CHECK(derive_stream_seed(1, 0) != derive_stream_seed(2, 0));
  CHECK(derive_stream_seed(5, 3) == derive_stream_seed(5, 3));
}

}
