#include "hybridfp/acceptance.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>
#include <string>

#include "hybridfp/fp_solver.hpp"
#include "hybridfp/koopman.hpp"

namespace hybridfp::acceptance {

namespace {

using validation::ComparisonReport;
using validation::ScenarioPreset;

std::string fmt(const char* pattern, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, pattern, args...);
  return buf;
}

class Suite {
 public:
  explicit Suite(const Options& options) : options_(options) {}

  void record(std::string name, bool passed, std::string detail) {
    results_.push_back({std::move(name), passed, std::move(detail)});
    if (options_.on_result) options_.on_result(results_.back());
  }

  const ComparisonReport& scenario(const std::string& name) {
    auto it = reports_.find(name);
    if (it != reports_.end()) return it->second;
    const auto preset = validation::make_preset(name);
    mc::McParams params;
    params.n_particles = 100000;
    params.dt = 1e-3;
    params.rng_seed = options_.seed;
    validation::ScenarioOutputs outputs;
    auto report = validation::run_scenario(preset, params, &outputs);
    if (options_.on_scenario) options_.on_scenario(preset, report, outputs);
    return reports_.emplace(name, std::move(report)).first->second;
  }

  std::vector<CriterionResult> take() { return std::move(results_); }

 private:
  const Options& options_;
  std::vector<CriterionResult> results_;
  std::map<std::string, ComparisonReport> reports_;
};

void mass_case1(Suite& s) {
  const auto& r = s.scenario("det-jump");
  s.record("mass conservation, deterministic guard", r.max_step_mass_drift <= 1e-9,
           fmt("max |mass - 1| over all steps = %.3e (tol 1e-9)", r.max_step_mass_drift));
}

void period_recurrence(Suite& s) {
  const auto preset = validation::make_preset("det-jump");
  const double period = std::log(2.0);
  const std::vector<double> times = {0.0, period, 2 * period, 3 * period};
  const auto snaps = fp::propagate(gaussian_init(preset.grid, preset.init_mean, preset.init_sigma),
                                   validation::scheme_for(preset), preset.grid, preset.spec,
                                   times.back(), times);
  const double x0 = validation::argmax_location(snaps[0], preset.grid);
  const double tol = 2.0 * preset.grid.dx();
  bool ok = true;
  std::string detail = fmt("argmax t=0: %.4f;", x0);
  for (std::size_t k = 1; k < snaps.size(); ++k) {
    const double xk = validation::argmax_location(snaps[k], preset.grid);
    ok = ok && std::abs(xk - x0) <= tol;
    detail += fmt(" t=%.4f: %.4f;", snaps[k].time, xk);
  }
  detail += fmt(" tol %.4f", tol);
  s.record("period recurrence, deterministic guard", ok, detail);
}

void absorbing_guard(Suite& s) {
  for (const char* name : {"sde-det-jump-H0.5", "sde-det-jump-H0.05"}) {
    const auto preset = validation::make_preset(name);
    const auto scheme = validation::scheme_for(preset);
    double worst = 0.0;
    auto check = [&](const DensityField& v, const fp::StepReport&, std::size_t) {
      worst = std::max(worst, std::abs(fp::guard_interface_value(v, preset.grid, preset.spec,
                                                                 scheme.reconstruction)));
    };
    const auto init = gaussian_init(preset.grid, preset.init_mean, preset.init_sigma);
    (void)fp::propagate_with_audit(init, scheme, preset.grid, preset.spec, preset.t_final, {}, check);
    s.record(std::string("absorbing guard v(b)=0, ") + name, worst == 0.0,
             fmt("max |v(b)| over all steps = %.3e", worst));
  }
}

void flux_balance(Suite& s) {
  const auto preset = validation::make_preset("sde-det-jump-H0.05");
  const auto scheme = validation::scheme_for(preset);
  const std::size_t last = fp::steps_for(preset.t_final, scheme.dt);
  DensityField prev = gaussian_init(preset.grid, preset.init_mean, preset.init_sigma);
  DensityField before_last;
  DensityField final;
  auto keep = [&](const DensityField& v, const fp::StepReport&, std::size_t step) {
    if (step + 1 == last) before_last = v;
    if (step == last) final = v;
  };
  (void)fp::propagate_with_audit(prev, scheme, preset.grid, preset.spec, preset.t_final, {}, keep);
  if (last == 1) before_last = prev;
  const auto fb = validation::flux_balance(before_last, final, scheme.dt, preset.grid, preset.spec,
                                           scheme.reconstruction);
  const double tol = 1e-6 * fb.max_abs_flux;
  s.record("flux balance I(b) = I(a+) - I(a-), H=0.05", fb.mismatch() <= tol,
           fmt("I(b)=%.6e I(a+)=%.6e I(a-)=%.6e mismatch %.3e (tol %.3e)", fb.at_guard, fb.a_plus,
               fb.a_minus, fb.mismatch(), tol));
}

void stationarity(Suite& s) {
  const auto& r = s.scenario("sde-det-jump-H0.05");
  const auto& last = r.snapshots.back();
  const auto& prev = r.snapshots[r.snapshots.size() - 2];
  const double gap = last.stationarity_gap.value_or(INFINITY);
  s.record("stationarity, H=0.05 guard", gap <= 0.02,
           fmt("L1(t=%.2f, t=%.2f) = %.4f (tol 0.02)", prev.time, last.time, gap));
}

void beyond_guard_tail(Suite& s) {
  for (const char* name : {"sde-pois-jump-H0.5", "sde-pois-jump-H0.05"}) {
    auto preset = validation::make_preset(name);
    const std::vector<double> times = {preset.t_final};
    const auto v = fp::propagate(gaussian_init(preset.grid, preset.init_mean, preset.init_sigma),
                                 validation::scheme_for(preset), preset.grid, preset.spec,
                                 preset.t_final, times)
                       .back();
    const auto& grid = preset.grid;
    const double b = preset.spec.rate->anchor;
    const double eps = preset.spec.rate->threshold;
    const double beyond = validation::mass_right_of(v, grid, b);
    const double lo = b + eps;
    const double hi = grid.x_max() - 5.0 * grid.dx();
    bool monotone = true;
    std::size_t checked = 0;
    for (std::size_t i = 0; i + 1 < grid.n_cells(); ++i) {
      if (grid.center(i) < lo || grid.center(i + 1) > hi) continue;
      ++checked;
      if (v.values[i + 1] > v.values[i]) monotone = false;
    }
    s.record(std::string("beyond-guard tail, ") + name, beyond > 1e-3 && monotone && checked > 0,
             fmt("mass beyond b = %.4e (need > 1e-3); non-increasing on [%.3f, %.3f]: %s", beyond, lo,
                 hi, monotone ? "yes" : "no"));
  }
}

void case3_mass(Suite& s) {
  for (const char* name : {"sde-pois-jump-H0.5", "sde-pois-jump-H0.05"}) {
    const auto& r = s.scenario(name);
    s.record(std::string("mass preservation with leakage, ") + name, r.max_step_mass_drift <= 1e-6,
             fmt("max |mass + leaked - 1| over all steps = %.3e (tol 1e-6), leaked %.3e",
                 r.max_step_mass_drift, r.snapshots.back().leaked));
  }
}

void duality(Suite& s) {
  std::uint64_t seed = 1;
  for (const char* name : {"det-jump", "sde-det-jump-H0.5", "sde-pois-jump-H0.5"}) {
    const auto preset = validation::make_preset(name);
    const auto audit =
        validation::duality_audit(preset.grid, preset.spec, 100, preset.reconstruction, seed++);
    s.record("duality <g,Au> = <A*g,u>, " + std::string(to_string(preset.spec.jump_regime)),
             audit.max_rel_gap <= 1e-10,
             fmt("%s, 100 pairs: max relative gap %.3e, max abs gap %.3e (tol 1e-10 relative)",
                 std::string(to_string(preset.reconstruction)).c_str(), audit.max_rel_gap, audit.max_abs_gap));
  }
}

void mc_agreement(Suite& s) {
  for (const auto& name : validation::preset_names()) {
    const auto& r = s.scenario(name);
    const auto& last = r.snapshots.back();
    s.record("MC-FP agreement, " + name, last.l1 <= 0.1,
             fmt("L1 at t=%.2f = %.4f (tol 0.1), N=%zu, seed %llu", last.time, last.l1, r.n_particles,
                 static_cast<unsigned long long>(r.seed)));
  }
}

void koopman_expectation(Suite& s, std::uint64_t seed) {
  for (const char* name : {"sde-pois-jump-H0.5", "sde-pois-jump-H0.05"}) {
    const auto preset = validation::make_preset(name);
    mc::McParams params;
    params.rng_seed = seed;
    const auto check = koopman::expectation_check([](double x) { return x; }, 1.0, 0.5, preset.grid,
                                                  preset.spec, params);
    const double gap = std::abs(check.koopman_value - check.mc_value);
    const double tol = 3.0 * check.mc_stderr + 0.02;
    s.record(std::string("Koopman-MC expectation E[X_0.5 | X_0=1], ") + name, gap <= tol,
             fmt("Koopman %.5f, MC %.5f +- %.5f, gap %.4f (tol %.4f)", check.koopman_value,
                 check.mc_value, check.mc_stderr, gap, tol));
  }
}

void degenerate_diffusion(Suite& s) {
  auto det = validation::make_preset("det-jump");
  const auto& sp = det.spec;
  const auto sde = HybridSystemSpec::sde_guard(sp.drift_gamma, sp.drift_center, 0.0, *sp.guard,
                                               sp.reset_target);
  const double t = 1.0;
  const std::vector<double> times = {t};
  const auto init = gaussian_init(det.grid, det.init_mean, det.init_sigma);
  auto scheme1 = validation::scheme_for(det);
  auto scheme2 = fp::FpScheme::defaults_for(sde.jump_regime, det.dt);
  scheme2.reconstruction = scheme1.reconstruction;
  const auto v1 = fp::propagate(init, scheme1, det.grid, sp, t, times).back();
  const auto v2 = fp::propagate(init, scheme2, det.grid, sde, t, times).back();
  const double d = validation::l1_distance(v1, v2, det.grid);
  s.record("degenerate diffusion H=0 reproduces deterministic guard", d <= 1e-6,
           fmt("L1 at t=1 = %.3e (tol 1e-6), both %s", d, std::string(to_string(scheme1.reconstruction)).c_str()));
}

void grid_convergence(Suite& s) {
  std::vector<std::pair<DensityField, Grid>> runs;
  for (double dx : {0.01, 0.005, 0.0025}) {
    const auto p = validation::make_preset("det-jump", dx);
    const std::vector<double> times = {p.t_final};
    runs.emplace_back(fp::propagate(gaussian_init(p.grid, p.init_mean, p.init_sigma),
                                    validation::scheme_for(p), p.grid, p.spec, p.t_final, times)
                          .back(),
                      p.grid);
  }
  const double coarse = validation::l1_distance_across(runs[0].first, runs[0].second,
                                                       runs[1].first, runs[1].second);
  const double fine = validation::l1_distance_across(runs[1].first, runs[1].second, runs[2].first,
                                                     runs[2].second);
  s.record("grid convergence, deterministic guard", coarse <= 2.0 * fine,
           fmt("L1(0.01, 0.005) = %.4e, L1(0.005, 0.0025) = %.4e, ratio %.2f (need <= 2)", coarse,
               fine, coarse / fine));
}

}  // namespace

std::vector<CriterionResult> run_acceptance(const Options& options) {
  Suite suite(options);
  mass_case1(suite);
  period_recurrence(suite);
  absorbing_guard(suite);
  flux_balance(suite);
  stationarity(suite);
  beyond_guard_tail(suite);
  case3_mass(suite);
  duality(suite);
  mc_agreement(suite);
  koopman_expectation(suite, options.seed);
  degenerate_diffusion(suite);
  grid_convergence(suite);
  return suite.take();
}

bool all_passed(const std::vector<CriterionResult>& results) {
  return std::all_of(results.begin(), results.end(), [](const auto& r) { return r.passed; });
}

std::string format_result(const CriterionResult& r) {
  return (r.passed ? "PASS " : "FAIL ") + r.name + ": " + r.detail;
}

}  // namespace hybridfp::acceptance
