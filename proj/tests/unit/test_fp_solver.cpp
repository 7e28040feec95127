#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "hybridfp/errors.hpp"
#include "hybridfp/fp_solver.hpp"
#include "hybridfp/validation.hpp"
#include "oracles.hpp"

using namespace hybridfp;
using namespace hybridfp::fp;

namespace {

const auto det = HybridSystemSpec::deterministic_guard(1.0, 3.0, 2.0, 1.0);
const auto sde05 = HybridSystemSpec::sde_guard(1.0, 3.0, 1.0, 2.0, 1.0);
const auto sde005 = HybridSystemSpec::sde_guard(1.0, 3.0, std::sqrt(0.1), 2.0, 1.0);
const RateFunction ramp{100.0, 0.25, 2.0};
const auto pois = HybridSystemSpec::sde_poisson(1.0, 3.0, 1.0, 1.0, ramp);

Grid guard_grid(double dx = 0.01) { return Grid::for_system(det, dx, -2.0, 2.0); }
Grid wide_grid(double dx = 0.01) { return Grid::aligned(-2.0, 4.0, dx, 1.0, 2.0); }

DensityField filled(const Grid& g, double value) { return {std::vector<double>(g.n_cells(), value), 0.0}; }

double l1(const std::vector<double>& a, const std::vector<double>& b, double dx) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s * dx;
}

}  // namespace

TEST_SUITE("fp_solver") {

TEST_CASE("minmod") {
  CHECK(minmod(1.0, 2.0) == 1.0);
  CHECK(minmod(-1.0, 2.0) == 0.0);
  CHECK(minmod(-3.0, -1.0) == -1.0);
  CHECK(minmod(0.0, 5.0) == 0.0);
}

TEST_CASE("advective flux of a constant is X times the constant") {
  const auto g = wide_grid();
  const double k = 0.37;
  for (auto flux : {muscl_advective_flux(filled(g, k), g, pois), godunov_advective_flux(filled(g, k), g, pois)}) {
    for (std::size_t f = 1; f < g.n_cells(); ++f) {
      CHECK(flux.values[f] == doctest::Approx(eval_drift(pois, g.interface(f)) * k).epsilon(1e-14));
    }
  }
}

TEST_CASE("advective flux vanishes away from an isolated cell") {
  const auto g = wide_grid();
  auto v = filled(g, 0.0);
  v.values[100] = 1.0;
  const auto flux = muscl_advective_flux(v, g, pois);
  for (std::size_t f = 0; f <= g.n_cells(); ++f) {
    if (f < 98 || f > 103) CHECK(flux.values[f] == 0.0);
  }
}

TEST_CASE("MUSCL interface flux converges at second order on a smooth density") {
  // Error of X v_interface against X times the exact point value, in L1 over
  // interfaces, for a Gaussian well inside the domain.
  auto error_at = [](double dx) {
    const auto g = wide_grid(dx);
    const auto v = gaussian_init(g, 0.5, 0.3);
    const auto flux = muscl_advective_flux(v, g, pois);
    double err = 0.0;
    for (std::size_t f = 1; f < g.n_cells(); ++f) {
      const double x = g.interface(f);
      err += std::abs(flux.values[f] - eval_drift(pois, x) * oracle::normal_pdf(x, 0.5, 0.3)) * dx;
    }
    return err;
  };
  const double e1 = error_at(0.04), e2 = error_at(0.02), e3 = error_at(0.01);
  CHECK(std::log2(e1 / e2) >= 1.8);
  CHECK(std::log2(e2 / e3) >= 1.8);
}

TEST_CASE("diffusive flux") {
  const auto g = wide_grid();
  const auto zero = diffusive_flux(filled(g, 2.0), g, 0.5);
  CHECK(std::all_of(zero.values.begin(), zero.values.end(), [](double f) { return f == 0.0; }));
  DensityField lin = filled(g, 0.0);
  const double m = 0.8;
  for (std::size_t i = 0; i < g.n_cells(); ++i) lin.values[i] = 3.0 + m * g.center(i);
  const auto flux = diffusive_flux(lin, g, 0.05);
  for (std::size_t f = 1; f < g.n_cells(); ++f) CHECK(flux.values[f] == doctest::Approx(-0.05 * m).epsilon(1e-10));
  const auto none = diffusive_flux(lin, g, 0.0);
  CHECK(std::all_of(none.values.begin(), none.values.end(), [](double f) { return f == 0.0; }));
}

TEST_CASE("guard reinjection source carries the outflux") {
  const auto g = guard_grid();
  const auto zero = apply_case1_reinjection(0.0, g);
  CHECK(std::all_of(zero.begin(), zero.end(), [](double s) { return s == 0.0; }));
  const auto src = apply_case1_reinjection(1.7, g);
  double total = 0.0;
  for (double s : src) total += s * g.dx();
  CHECK(total == doctest::Approx(1.7).epsilon(1e-15));
  CHECK(src[g.index_of_a()] == doctest::Approx(1.7 / g.dx()));
}

TEST_CASE("absorbing guard closure") {
  const auto g = guard_grid();
  const auto zero = apply_case2_guard_bc(filled(g, 0.0), g, 0.5);
  CHECK(zero.absorbed_flux == 0.0);
  CHECK(std::all_of(zero.source.begin(), zero.source.end(), [](double s) { return s == 0.0; }));

  const auto v = gaussian_init(g, 1.8, 0.1);
  const auto bc = apply_case2_guard_bc(v, g, 0.5);
  CHECK(bc.ghost_value == -v.values.back());
  CHECK(bc.interface_value == 0.0);
  // -H dv/dx at b with the mirrored ghost: -H (ghost - last) / dx.
  CHECK(bc.absorbed_flux == doctest::Approx(2.0 * 0.5 * v.values.back() / g.dx()));
  double total = 0.0;
  for (double s : bc.source) total += s * g.dx();
  CHECK(total == doctest::Approx(bc.absorbed_flux));
  CHECK_THROWS_AS((void)apply_case2_guard_bc(v, g, 0.0), std::invalid_argument);
}

TEST_CASE("Poisson jump terms balance") {
  const auto g = wide_grid();
  const auto v = gaussian_init(g, 1.5, 0.4);
  const auto none = apply_case3_jump_terms(v, g, RateFunction{0.0, 0.25, 2.0});
  CHECK(std::all_of(none.sink_diag.begin(), none.sink_diag.end(), [](double s) { return s == 0.0; }));
  CHECK(std::all_of(none.source.begin(), none.source.end(), [](double s) { return s == 0.0; }));
  const auto empty = apply_case3_jump_terms(filled(g, 0.0), g, ramp);
  CHECK(std::all_of(empty.source.begin(), empty.source.end(), [](double s) { return s == 0.0; }));

  const auto jt = apply_case3_jump_terms(v, g, ramp);
  double net = 0.0;
  for (std::size_t i = 0; i < g.n_cells(); ++i) {
    CHECK(jt.sink_diag[i] == -eval_rate(ramp, g.center(i)));
    net += (jt.sink_diag[i] * v.values[i] + jt.source[i]) * g.dx();
  }
  CHECK(std::abs(net) <= 1e-13);
  for (std::size_t i = 0; i < g.n_cells(); ++i) if (i != g.index_of_a()) CHECK(jt.source[i] == 0.0);
}

TEST_CASE("assembled operator is the exact Jacobian of the nonlinear action") {
  // MUSCL is piecewise linear: with the limiter branches frozen at v the
  // operator reproduces central finite differences of adjoint_action.
  for (const auto* spec : {&det, &sde05, &pois}) {
    const auto g = spec->has_guard() ? guard_grid(0.05) : wide_grid(0.05);
    const auto v = gaussian_init(g, 1.2, 0.3);
    for (auto recon : {Reconstruction::Muscl, Reconstruction::Godunov}) {
      const auto slopes = select_slopes(v, g, *spec);
      const auto op = assemble_adjoint(g, *spec, recon, &slopes);
      const auto base = adjoint_action(v, g, *spec, recon);
      CHECK(l1(op.apply(v.values), base, 1.0) <= 1e-9);
      const double h = 1e-7;
      std::size_t checked = 0, columns = 0;
      for (std::size_t j = 0; j < g.n_cells(); j += 7) {
        auto vp = v, vm = v;
        vp.values[j] += h;
        vm.values[j] -= h;
        ++columns;
        // In the far tails the perturbation itself flips limiter branches.
        if (recon == Reconstruction::Muscl &&
            (select_slopes(vp, g, *spec) != slopes || select_slopes(vm, g, *spec) != slopes)) continue;
        ++checked;
        const auto ap = adjoint_action(vp, g, *spec, recon);
        const auto am = adjoint_action(vm, g, *spec, recon);
        for (std::size_t i = 0; i < g.n_cells(); ++i) {
          const double fd = (ap[i] - am[i]) / (2.0 * h);
          CHECK(op.at(i, j) == doctest::Approx(fd).epsilon(1e-5).scale(1.0));
        }
      }
      CHECK(2 * checked > columns);
    }
  }
}

TEST_CASE("implicit step basics") {
  const auto g = guard_grid();
  const auto v = gaussian_init(g, 1.0, 0.125);
  auto scheme = FpScheme::defaults_for(det.jump_regime, 0.0);
  const auto same = implicit_step(v, scheme, g, det);
  CHECK(same.values == v.values);

  scheme = FpScheme::defaults_for(det.jump_regime, 1e-3);
  StepReport report;
  const auto next = implicit_step(v, scheme, g, det, &report);
  CHECK(next.time == doctest::Approx(1e-3));
  CHECK(report.residual <= scheme.newton_tol);
  CHECK(report.newton_iterations >= 1);
  CHECK(std::abs(total_mass(next, g) - total_mass(v, g)) <= 1e-12);

  auto strict = scheme;
  strict.newton_tol = 1e-300;
  strict.newton_max_iter = 1;
  CHECK_THROWS_AS((void)implicit_step(v, strict, g, det, nullptr), NewtonDiverged);
  CHECK_THROWS_AS((void)implicit_step(v, scheme, wide_grid(), det), std::invalid_argument);
}

TEST_CASE("diffusion without jumps conserves interior mass") {
  const auto g = wide_grid();
  const auto spec = HybridSystemSpec::sde_poisson(1.0, 3.0, 1.0, 1.0, RateFunction{0.0, 0.25, 2.0});
  auto v = gaussian_init(g, 1.0, 0.125);
  const auto scheme = FpScheme::defaults_for(spec.jump_regime, 1e-3);
  for (int k = 0; k < 50; ++k) {
    const auto next = implicit_step(v, scheme, g, spec);
    CHECK(std::abs(total_mass(next, g) - total_mass(v, g)) <= 1e-10);
    v = next;
  }
}

TEST_CASE("mass audit, positivity and absorbing value over full runs") {
  struct Case {
    const HybridSystemSpec* spec;
    Grid grid;
  };
  for (const auto& c : {Case{&det, guard_grid()}, Case{&sde05, guard_grid()}, Case{&sde005, guard_grid()},
                        Case{&pois, wide_grid()}}) {
    const auto scheme = FpScheme::defaults_for(c.spec->jump_regime, 1e-3);
    double leaked = 0.0, worst_drift = 0.0, worst_step = 0.0, min_v = 0.0, worst_guard = 0.0;
    double prev_mass = 1.0;
    auto audit = [&](const DensityField& v, const StepReport& r, std::size_t) {
      leaked += r.leaked_left + r.leaked_right;
      const double mass = total_mass(v, c.grid);
      worst_drift = std::max(worst_drift, std::abs(mass + leaked - 1.0));
      worst_step = std::max(worst_step, std::abs(mass - prev_mass + r.leaked_left + r.leaked_right));
      prev_mass = mass;
      min_v = std::min(min_v, *std::min_element(v.values.begin(), v.values.end()));
      if (c.spec->jump_regime == JumpRegime::SdeGuardJump) {
        worst_guard = std::max(worst_guard, std::abs(guard_interface_value(v, c.grid, *c.spec, scheme.reconstruction)));
      }
    };
    (void)propagate_with_audit(gaussian_init(c.grid, 1.0, 0.125), scheme, c.grid, *c.spec, 2.5, {}, audit);
    CHECK(worst_drift <= 1e-9);
    CHECK(worst_step <= 1e-12);
    CHECK(min_v >= -1e-8);
    CHECK(worst_guard == 0.0);
  }
}

TEST_CASE("case-2 steady state satisfies the interface flux balance") {
  const auto g = guard_grid();
  const auto scheme = FpScheme::defaults_for(sde005.jump_regime, 1e-2);
  const double times[] = {20.0};
  const auto v = propagate(gaussian_init(g, 1.0, 0.125), scheme, g, sde005, 20.0, times).back();
  const auto flux = probability_flux(v, g, sde005, scheme.reconstruction);
  const std::size_t ia = g.index_of_a();
  const double at_b = flux.values.back();
  CHECK(std::abs(at_b - (flux.values[ia + 1] - flux.values[ia])) <= 1e-6);
  CHECK(at_b > 0.1);
}

TEST_CASE("propagate snapshots") {
  const auto g = guard_grid();
  const auto init = gaussian_init(g, 1.0, 0.125);
  const auto scheme = FpScheme::defaults_for(det.jump_regime, 1e-3);
  const double none[] = {0.0};
  const auto only = propagate(init, scheme, g, det, 0.0, none);
  REQUIRE(only.size() == 1);
  CHECK(only[0].values == init.values);

  const std::vector<double> times = {0.0, 0.1, 0.1, 0.25};
  const auto snaps = propagate(init, scheme, g, det, 0.25, times);
  REQUIRE(snaps.size() == times.size());
  CHECK(snaps[1].time == doctest::Approx(0.1));
  CHECK(snaps[3].time == doctest::Approx(0.25));
  const std::vector<double> unsorted = {0.2, 0.1};
  CHECK_THROWS_AS((void)propagate(init, scheme, g, det, 0.25, unsorted), std::invalid_argument);
  const std::vector<double> outside = {0.3};
  CHECK_THROWS_AS((void)propagate(init, scheme, g, det, 0.25, outside), std::invalid_argument);
}

TEST_CASE("zero-diffusion guard run reproduces the deterministic solver") {
  const auto g = guard_grid();
  const auto degenerate = HybridSystemSpec::sde_guard(1.0, 3.0, 0.0, 2.0, 1.0);
  const auto init = gaussian_init(g, 1.0, 0.125);
  const double times[] = {1.0};
  for (auto recon : {Reconstruction::Muscl, Reconstruction::Godunov}) {
    auto s1 = FpScheme::defaults_for(det.jump_regime, 1e-3);
    auto s2 = FpScheme::defaults_for(degenerate.jump_regime, 1e-3);
    s1.reconstruction = s2.reconstruction = recon;
    const auto v1 = propagate(init, s1, g, det, 1.0, times).back();
    const auto v2 = propagate(init, s2, g, degenerate, 1.0, times).back();
    CHECK(l1(v1.values, v2.values, g.dx()) <= 1e-12);
  }
}

TEST_CASE("deterministic run approaches the exact hybrid transport") {
  // Closed-form transport with resets as the reference; the density error
  // must shrink as both steps are refined.
  const oracle::HybridFlow flow{1.0, 3.0, 1.0, 2.0};
  const double t = 1.0;
  const double times[] = {t};
  auto error_at = [&](double dx, double dt) {
    const auto g = guard_grid(dx);
    const auto v = propagate(gaussian_init(g, 1.0, 0.125), FpScheme::defaults_for(det.jump_regime, dt), g, det, t, times).back();
    return l1(v.values, oracle::pushforward(g, flow, 1.0, 0.125, t, 400), g.dx());
  };
  const double coarse = error_at(0.02, 2e-3);
  const double fine = error_at(0.01, 1e-3);
  const double finer = error_at(0.005, 5e-4);
  CHECK(fine < 0.75 * coarse);
  CHECK(finer < 0.75 * fine);
}

TEST_CASE("density peak at multiples of the transit time sits below the guard") {
  // Mass that starts below a has not reached the guard after one transit
  // time; the flow compresses it by X(b)/X(a) = 1/2 against b, so both the
  // exact and the discrete density peak just below b at t = k ln 2.
  const oracle::HybridFlow flow{1.0, 3.0, 1.0, 2.0};
  const auto g = guard_grid();
  const double period = std::numbers::ln2;
  const std::vector<double> times = {period, 2 * period, 3 * period};
  const auto snaps = propagate(gaussian_init(g, 1.0, 0.125), FpScheme::defaults_for(det.jump_regime, 1e-3), g, det,
                               times.back(), times);
  for (std::size_t k = 0; k < times.size(); ++k) {
    DensityField exact{oracle::pushforward(g, flow, 1.0, 0.125, times[k], 400), times[k]};
    const double x_exact = validation::argmax_location(exact, g);
    CHECK(x_exact > 2.0 - 2.0 * g.dx());
    CHECK(std::abs(validation::argmax_location(snaps[k], g) - x_exact) <= 2.0 * g.dx());
    const double peak = *std::max_element(exact.values.begin(), exact.values.end());
    CHECK(peak == doctest::Approx(2.0 * oracle::normal_pdf(1.0, 1.0, 0.125)).epsilon(0.02));
  }
}

}
