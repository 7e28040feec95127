#include "hybridfp/validation.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "hybridfp/errors.hpp"
#include "hybridfp/koopman.hpp"

namespace hybridfp::validation {

namespace {

void require_matching(const DensityField& v1, const DensityField& v2, const Grid& grid) {
  if (v1.values.size() != grid.n_cells() || v2.values.size() != grid.n_cells()) {
    throw GridMismatch("density fields do not live on the given grid");
  }
}

constexpr double kA = 1.0;
constexpr double kB = 2.0;
constexpr double kC = 3.0;
constexpr double kGamma = 1.0;
constexpr double kSigma = 0.125;
constexpr double kTFinal = 2.5;
constexpr double kSnapshotEvery = 0.25;
constexpr double kEpsilon = 0.25;
constexpr double kLambdaMax = 100.0;
constexpr double kXMin = -2.0;
constexpr double kXMaxPoisson = 4.0;

// h such that H = h^2 / 2.
double weight_for(double H) { return std::sqrt(2.0 * H); }

}  // namespace

double l1_distance(const DensityField& v1, const DensityField& v2, const Grid& grid) {
  require_matching(v1, v2, grid);
  double sum = 0.0;
  for (std::size_t i = 0; i < grid.n_cells(); ++i) sum += std::abs(v1.values[i] - v2.values[i]);
  return sum * grid.dx();
}

double sup_distance(const DensityField& v1, const DensityField& v2, const Grid& grid) {
  require_matching(v1, v2, grid);
  double worst = 0.0;
  for (std::size_t i = 0; i < grid.n_cells(); ++i) {
    worst = std::max(worst, std::abs(v1.values[i] - v2.values[i]));
  }
  return worst;
}

double l1_distance_across(const DensityField& v1, const Grid& g1, const DensityField& v2,
                          const Grid& g2) {
  if (v1.values.size() != g1.n_cells() || v2.values.size() != g2.n_cells()) {
    throw GridMismatch("density fields do not live on their grids");
  }
  std::vector<double> breaks;
  breaks.reserve(g1.n_cells() + g2.n_cells() + 2);
  for (std::size_t k = 0; k <= g1.n_cells(); ++k) breaks.push_back(g1.interface(k));
  for (std::size_t k = 0; k <= g2.n_cells(); ++k) breaks.push_back(g2.interface(k));
  std::sort(breaks.begin(), breaks.end());

  auto value_at = [](const DensityField& v, const Grid& g, double x) {
    auto cell = g.locate(x);
    return cell ? v.values[*cell] : 0.0;
  };
  double sum = 0.0;
  for (std::size_t k = 0; k + 1 < breaks.size(); ++k) {
    const double width = breaks[k + 1] - breaks[k];
    if (width <= 0.0) continue;
    const double mid = 0.5 * (breaks[k] + breaks[k + 1]);
    sum += width * std::abs(value_at(v1, g1, mid) - value_at(v2, g2, mid));
  }
  return sum;
}

double mass_right_of(const DensityField& v, const Grid& grid, double x) {
  double sum = 0.0;
  for (std::size_t i = 0; i < grid.n_cells(); ++i) {
    if (grid.interface(i) >= x - 1e-12 * grid.dx()) sum += v.values[i];
  }
  return sum * grid.dx();
}

double argmax_location(const DensityField& v, const Grid& grid) {
  if (v.values.empty()) throw GridMismatch("argmax of an empty field");
  const auto it = std::max_element(v.values.begin(), v.values.end());
  return grid.center(static_cast<std::size_t>(it - v.values.begin()));
}

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names = {
      "det-jump", "sde-det-jump-H0.5", "sde-det-jump-H0.05", "sde-pois-jump-H0.5",
      "sde-pois-jump-H0.05"};
  return names;
}

ScenarioPreset make_preset(std::string_view name, double dx_target) {
  ScenarioPreset p;
  p.name = std::string(name);
  p.init_mean = kA;
  p.init_sigma = kSigma;
  p.t_final = kTFinal;
  p.snapshot_times = uniform_times(kTFinal, kSnapshotEvery);

  double x_max = kB;
  if (name == "det-jump") {
    p.spec = HybridSystemSpec::deterministic_guard(kGamma, kC, kB, kA);
  } else if (name == "sde-det-jump-H0.5") {
    p.spec = HybridSystemSpec::sde_guard(kGamma, kC, weight_for(0.5), kB, kA);
  } else if (name == "sde-det-jump-H0.05") {
    p.spec = HybridSystemSpec::sde_guard(kGamma, kC, weight_for(0.05), kB, kA);
    p.expect_stationary = true;
  } else if (name == "sde-pois-jump-H0.5" || name == "sde-pois-jump-H0.05") {
    const double H = name == "sde-pois-jump-H0.5" ? 0.5 : 0.05;
    p.spec = HybridSystemSpec::sde_poisson(kGamma, kC, weight_for(H), kA,
                                           RateFunction{kLambdaMax, kEpsilon, kB});
    x_max = kXMaxPoisson;
  } else {
    throw ConfigError("unknown preset '" + std::string(name) + "'");
  }
  p.reconstruction = fp::FpScheme::defaults_for(p.spec.jump_regime).reconstruction;
  p.grid = Grid::for_system(p.spec, dx_target, kXMin, x_max);
  return p;
}

std::vector<ScenarioPreset> all_presets(double dx_target) {
  std::vector<ScenarioPreset> out;
  for (const auto& name : preset_names()) out.push_back(make_preset(name, dx_target));
  return out;
}

std::vector<double> uniform_times(double t_final, double every) {
  if (!(every > 0.0)) throw std::invalid_argument("uniform_times: spacing must be positive");
  std::vector<double> times;
  for (std::size_t k = 0;; ++k) {
    const double t = static_cast<double>(k) * every;
    if (t > t_final + 1e-9 * every) break;
    times.push_back(std::min(t, t_final));
  }
  if (times.back() < t_final) times.push_back(t_final);
  return times;
}

fp::FpScheme scheme_for(const ScenarioPreset& preset) {
  auto scheme = fp::FpScheme::defaults_for(preset.spec.jump_regime, preset.dt);
  scheme.reconstruction = preset.reconstruction;
  return scheme;
}

ComparisonReport run_scenario(const ScenarioPreset& preset, const mc::McParams& mc_params,
                              ScenarioOutputs* outputs) {
  preset.spec.validate();
  mc_params.validate();

  ComparisonReport report;
  report.scenario = preset.name;
  report.regime = std::string(to_string(preset.spec.jump_regime));
  report.dx = preset.grid.dx();
  report.dt = preset.dt;
  report.mc_dt = mc_params.dt;
  report.n_particles = mc_params.n_particles;
  report.seed = mc_params.rng_seed;

  const DensityField init = gaussian_init(preset.grid, preset.init_mean, preset.init_sigma);
  double leaked = 0.0;
  double worst_drift = std::abs(total_mass(init, preset.grid) - 1.0);
  auto audit = [&](const DensityField& v, const fp::StepReport& step, std::size_t) {
    leaked += step.leaked_left + step.leaked_right;
    worst_drift = std::max(worst_drift, std::abs(total_mass(v, preset.grid) + leaked - 1.0));
  };
  const auto fp_run = fp::propagate_with_audit(init, scheme_for(preset), preset.grid, preset.spec,
                                               preset.t_final, preset.snapshot_times, audit);
  const auto ensembles =
      mc::run_ensemble(mc_params, preset.spec,
                       mc::gaussian_for(preset.spec, preset.init_mean, preset.init_sigma),
                       preset.t_final, preset.snapshot_times);
  report.max_step_mass_drift = worst_drift;

  std::vector<DensityField> histograms;
  histograms.reserve(ensembles.size());
  for (const auto& e : ensembles) histograms.push_back(mc::histogram_density(e, preset.grid));
  if (!ensembles.empty()) report.mc_jumps = ensembles.back().jump_count;

  for (std::size_t k = 0; k < fp_run.snapshots.size(); ++k) {
    const auto& v = fp_run.snapshots[k];
    SnapshotMetrics m;
    m.time = v.time;
    m.l1 = l1_distance(v, histograms[k], preset.grid);
    m.sup = sup_distance(v, histograms[k], preset.grid);
    m.mass = total_mass(v, preset.grid);
    m.leaked = fp_run.leaked[k];
    m.mass_drift = std::abs(m.mass + m.leaked - 1.0);
    if (k > 0) m.stationarity_gap = l1_distance(v, fp_run.snapshots[k - 1], preset.grid);
    report.snapshots.push_back(m);
  }

  const double anchor = preset.spec.has_guard() ? *preset.spec.guard : preset.spec.rate->anchor;
  if (!fp_run.snapshots.empty()) {
    report.beyond_anchor_mass = mass_right_of(fp_run.snapshots.back(), preset.grid, anchor);
  }

  report.mass_ok = report.max_step_mass_drift <= kMassTolerance;
  report.l1_ok = !report.snapshots.empty() && report.snapshots.back().l1 <= kL1Tolerance;
  if (preset.expect_stationary) {
    const auto& gap = report.snapshots.empty() ? std::nullopt : report.snapshots.back().stationarity_gap;
    report.stationary_ok = gap.has_value() && *gap <= kStationarityTolerance;
  }

  if (outputs != nullptr) {
    outputs->fp = fp_run.snapshots;
    outputs->mc = std::move(histograms);
  }
  return report;
}

DualityAudit duality_audit(const Grid& grid, const HybridSystemSpec& spec, std::size_t n_trials,
                           Reconstruction recon, std::uint64_t seed) {
  if (n_trials < 1) throw std::invalid_argument("duality_audit: need at least one trial");

  SlopeSelection slopes;
  const SlopeSelection* frozen = nullptr;
  if (recon == Reconstruction::Muscl) {
    slopes = fp::select_slopes(gaussian_init(grid, spec.reset_target, 0.125), grid, spec);
    frozen = &slopes;
  }
  const auto adjoint = fp::assemble_adjoint(grid, spec, recon, frozen);
  const auto generator = koopman::assemble_generator(grid, spec, {recon, frozen});

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coin(-1.0, 1.0);
  const std::size_t n = grid.n_cells();
  std::vector<double> g(n), u(n);
  DualityAudit out;
  for (std::size_t trial = 0; trial < n_trials; ++trial) {
    for (std::size_t i = 0; i < n; ++i) {
      g[i] = coin(rng);
      u[i] = coin(rng);
    }
    const auto Au = generator.apply(u);
    const auto Ag = adjoint.apply(g);
    double lhs = 0.0, rhs = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      lhs += g[i] * Au[i];
      rhs += Ag[i] * u[i];
      scale += std::abs(g[i] * Au[i]) + std::abs(Ag[i] * u[i]);
    }
    const double gap = std::abs(lhs - rhs) * grid.dx();
    out.max_abs_gap = std::max(out.max_abs_gap, gap);
    if (scale > 0.0) out.max_rel_gap = std::max(out.max_rel_gap, gap / (scale * grid.dx()));
  }
  return out;
}

double FluxBalance::mismatch() const { return std::abs(at_guard - (a_plus - a_minus)); }

FluxBalance flux_balance(const DensityField& v_prev, const DensityField& v_next, double dt,
                         const Grid& grid, const HybridSystemSpec& spec, Reconstruction recon) {
  if (!spec.has_guard()) throw std::invalid_argument("flux_balance: spec has no guard");
  if (v_prev.values.size() != grid.n_cells() || v_next.values.size() != grid.n_cells()) {
    throw GridMismatch("flux_balance: fields do not match the grid");
  }
  const auto flux = fp::probability_flux(v_next, grid, spec, recon);
  const std::size_t ia = grid.index_of_a();
  const double storage = (v_next.values[ia] - v_prev.values[ia]) / dt;

  FluxBalance out;
  out.at_guard = flux.values.back();
  out.a_minus = flux.values[ia] - 0.5 * grid.dx() * storage;
  out.a_plus = flux.values[ia + 1] + 0.5 * grid.dx() * storage;
  for (double f : flux.values) out.max_abs_flux = std::max(out.max_abs_flux, std::abs(f));
  return out;
}

}  // namespace hybridfp::validation
