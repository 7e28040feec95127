#include <cmath>
#include <random>

#include "doctest.h"
#include "hybridfp/errors.hpp"
#include "hybridfp/fp_solver.hpp"
#include "hybridfp/koopman.hpp"

using namespace hybridfp;
using namespace hybridfp::koopman;

namespace {

const auto det = HybridSystemSpec::deterministic_guard(1.0, 3.0, 2.0, 1.0);
const auto sde05 = HybridSystemSpec::sde_guard(1.0, 3.0, 1.0, 2.0, 1.0);
const RateFunction ramp{100.0, 0.25, 2.0};
const auto pois = HybridSystemSpec::sde_poisson(1.0, 3.0, 1.0, 1.0, ramp);

Grid grid_for(const HybridSystemSpec& s, double dx = 0.01) { return Grid::for_system(s, dx, -2.0, s.has_guard() ? 2.0 : 4.0); }

std::vector<double> ones(std::size_t n) { return std::vector<double>(n, 1.0); }

}  // namespace

TEST_SUITE("koopman") {

TEST_CASE("pure drift generator is an upwind difference") {
  CHECK_THROWS((void)HybridSystemSpec::sde_poisson(0.0, 3.0, 0.0, 1.0, RateFunction{0.0, 0.25, 2.0}));
  const auto still = HybridSystemSpec::sde_poisson(1.0, 10.0, 0.0, 1.0, RateFunction{0.0, 0.25, 2.0});
  const auto g = grid_for(still, 0.05);
  const auto dense = assemble_generator(g, still).op.to_dense();
  const double dx = g.dx();
  for (std::size_t i = 0; i + 1 < g.n_cells(); ++i) {
    // Drift points right on the whole grid.
    const double x = eval_drift(still, g.interface(i + 1));
    REQUIRE(x > 0.0);
    for (std::size_t j = 0; j < g.n_cells(); ++j) {
      const double expected = j == i ? -x / dx : (j == i + 1 ? x / dx : 0.0);
      CHECK(dense[i][j] == doctest::Approx(expected).epsilon(1e-14).scale(1.0));
    }
  }
}

TEST_CASE("constants are in the kernel of the generator") {
  for (const auto* spec : {&det, &sde05, &pois}) {
    const auto g = grid_for(*spec);
    const auto gen = assemble_generator(g, *spec);
    const auto a1 = gen.apply(ones(g.n_cells()));
    const double H = spec->diffusion_coefficient();
    for (std::size_t i = 0; i < g.n_cells(); ++i) {
      const bool artificial_end = i == 0 || (!spec->has_guard() && i + 1 == g.n_cells());
      if (artificial_end && H > 0.0) {
        // Killed observable beyond the artificial end: dual of the density leakage.
        CHECK(a1[i] == doctest::Approx(-H / (g.dx() * g.dx())));
      } else {
        CHECK(std::abs(a1[i]) <= 1e-12 * (1.0 + H / (g.dx() * g.dx())));
      }
    }
  }
}

TEST_CASE("Poisson jump part is lambda (u(a) - u)") {
  const auto g = grid_for(pois);
  const auto gen = assemble_generator(g, pois);
  std::vector<double> u(g.n_cells());
  for (std::size_t i = 0; i < u.size(); ++i) u[i] = std::exp(-std::pow(g.center(i) - 1.0, 2) / 0.1);
  const auto ju = gen.jump_op.apply(u);
  const std::size_t ia = g.index_of_a();
  for (std::size_t i : {std::size_t{50}, ia, std::size_t{370}, std::size_t{420}, std::size_t{560}}) {
    CHECK(ju[i] == doctest::Approx(eval_rate(ramp, g.center(i)) * (u[ia] - u[i])).epsilon(1e-13));
  }
  const auto dense = gen.jump_op.to_dense();
  for (const auto& row : dense) {
    double sum = 0.0, scale = 0.0;
    for (double a : row) {
      sum += a;
      scale += std::abs(a);
    }
    CHECK(std::abs(sum) <= 1e-13 * std::max(1.0, scale));
  }
}

TEST_CASE("generator is the transpose of the density operator") {
  for (const auto* spec : {&det, &sde05, &pois}) {
    const auto g = grid_for(*spec);
    for (auto recon : {Reconstruction::Godunov, Reconstruction::Muscl}) {
      const auto slopes = fp::select_slopes(gaussian_init(g, 1.0, 0.125), g, *spec);
      const auto gen = assemble_generator(g, *spec, {recon, &slopes});
      const auto adj = fp::assemble_adjoint(g, *spec, recon, &slopes);
      const auto a = gen.op.to_dense();
      const auto b = adj.to_dense();
      double worst = 0.0;
      for (std::size_t i = 0; i < g.n_cells(); ++i)
        for (std::size_t j = 0; j < g.n_cells(); ++j) worst = std::max(worst, std::abs(a[i][j] - b[j][i]));
      CHECK(worst == 0.0);
    }
  }
  const auto g = grid_for(det);
  CHECK_THROWS_AS((void)assemble_generator(g, det, {Reconstruction::Muscl, nullptr}), std::invalid_argument);
}

TEST_CASE("propagation basics") {
  const auto g = grid_for(det);
  const auto f = sample_observable(g, [](double x) { return x * x; });
  const auto same = koopman_propagate(f, g, det, 1e-3, 0.0);
  CHECK(same.values == f.values);

  const auto one = koopman_propagate(ObservableField{ones(g.n_cells()), 0.0}, g, det, 1e-3, 1.0);
  for (double u : one.values) CHECK(u == doctest::Approx(1.0).epsilon(1e-12));

  // Away from the artificial ends constants also survive diffusion.
  const auto g2 = grid_for(sde05);
  const auto one2 = koopman_propagate(ObservableField{ones(g2.n_cells()), 0.0}, g2, sde05, 1e-3, 0.5);
  CHECK(evaluate_at(one2, g2, 1.0) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(guard_value(one2, g2) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK_THROWS_AS((void)koopman_propagate(f, g, det, 0.0, 1.0), std::invalid_argument);
}

TEST_CASE("deterministic observable follows the flow") {
  const auto g = grid_for(det);
  const auto u = koopman_propagate(sample_observable(g, [](double x) { return x; }), g, det, 1e-3, 0.3);
  CHECK(std::abs(evaluate_at(u, g, 1.0) - exact_flow_map(det, 1.0, 0.3)) <= 2.0 * g.dx());
}

TEST_CASE("discrete semigroup") {
  const auto g = grid_for(pois);
  const auto f = sample_observable(g, [](double x) { return std::sin(x); });
  const double dt = 1e-3;
  const auto two = koopman_propagate(koopman_propagate(f, g, pois, dt, 0.2), g, pois, dt, 0.3);
  const auto once = koopman_propagate(f, g, pois, dt, 0.5);
  for (std::size_t i = 0; i < g.n_cells(); ++i) CHECK(two.values[i] == doctest::Approx(once.values[i]).epsilon(1e-12).scale(1.0));
}

TEST_CASE("expectation check") {
  const auto g = grid_for(det);
  mc::McParams params;
  params.n_particles = 2000;
  const auto f = [](double x) { return 2.0 * x; };
  const auto at0 = expectation_check(f, 1.0, 0.0, g, det, params);
  CHECK(at0.koopman_value == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(at0.mc_value == 2.0);

  const auto later = expectation_check(f, 1.0, 0.4, g, det, params);
  CHECK(later.mc_stderr == 0.0);
  CHECK(std::abs(later.koopman_value - later.mc_value) <= 2.0 * g.dx() * 2.0);
  CHECK_THROWS_AS((void)expectation_check(f, 5.0, 0.4, g, det, params), std::invalid_argument);
}

TEST_CASE("observable sampling and interpolation") {
  const auto g = grid_for(det);
  const auto u = sample_observable(g, [](double x) { return 3.0 * x - 1.0; });
  CHECK(evaluate_at(u, g, 0.123) == doctest::Approx(3.0 * 0.123 - 1.0).epsilon(1e-12));
  CHECK(guard_value(u, g) == doctest::Approx(2.0).epsilon(1e-12));
}

}
