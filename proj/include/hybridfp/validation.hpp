#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hybridfp/fp_solver.hpp"
#include "hybridfp/grid.hpp"
#include "hybridfp/monte_carlo.hpp"
#include "hybridfp/reconstruction.hpp"
#include "hybridfp/system.hpp"

/// Metrics and the scenario harness that runs the density solver against the
/// particle oracle.
namespace hybridfp::validation {

/// dx * sum |v1_i - v2_i|. Throws GridMismatch unless both fields match grid.
[[nodiscard]] double l1_distance(const DensityField& v1, const DensityField& v2, const Grid& grid);
[[nodiscard]] double sup_distance(const DensityField& v1, const DensityField& v2, const Grid& grid);

/// L1 distance between two piecewise-constant densities on different grids,
/// integrated exactly over the union of both meshes (zero outside each mesh).
[[nodiscard]] double l1_distance_across(const DensityField& v1, const Grid& g1,
                                        const DensityField& v2, const Grid& g2);

/// dx * sum of the cells lying entirely to the right of x.
[[nodiscard]] double mass_right_of(const DensityField& v, const Grid& grid, double x);

/// Cell centre of the largest value (first one on ties).
[[nodiscard]] double argmax_location(const DensityField& v, const Grid& grid);

inline constexpr double kMassTolerance = 1e-9;
inline constexpr double kL1Tolerance = 0.1;
inline constexpr double kStationarityTolerance = 0.02;

struct ScenarioPreset {
  std::string name;
  HybridSystemSpec spec;
  Grid grid = Grid::uniform(0.0, 1.0, 1);
  double init_mean = 1.0;
  double init_sigma = 0.125;
  double t_final = 2.5;
  std::vector<double> snapshot_times;
  /// Density time step; the particle step comes from McParams.
  double dt = 1e-3;
  Reconstruction reconstruction = Reconstruction::Muscl;
  /// The small-diffusion guard scenario settles to a stationary density.
  bool expect_stationary = false;
};

[[nodiscard]] const std::vector<std::string>& preset_names();
/// Throws ConfigError for unknown names.
[[nodiscard]] ScenarioPreset make_preset(std::string_view name, double dx_target = 0.01);
[[nodiscard]] std::vector<ScenarioPreset> all_presets(double dx_target = 0.01);
/// 0, every, 2*every, ... and always t_final itself.
[[nodiscard]] std::vector<double> uniform_times(double t_final, double every);
[[nodiscard]] fp::FpScheme scheme_for(const ScenarioPreset& preset);

struct SnapshotMetrics {
  double time = 0.0;
  double l1 = 0.0;
  double sup = 0.0;
  double mass = 0.0;
  double leaked = 0.0;
  /// |mass + leaked - 1|
  double mass_drift = 0.0;
  /// L1 distance to the previous density snapshot.
  std::optional<double> stationarity_gap;
};

struct ComparisonReport {
  std::string scenario;
  std::string regime;
  double dx = 0.0;
  double dt = 0.0;
  double mc_dt = 0.0;
  std::size_t n_particles = 0;
  std::uint64_t seed = 0;
  std::vector<SnapshotMetrics> snapshots;
  /// Worst |mass + leaked - 1| over every time step, not just snapshots.
  double max_step_mass_drift = 0.0;
  /// Density mass strictly beyond the guard or rate anchor at the last snapshot.
  double beyond_anchor_mass = 0.0;
  std::uint64_t mc_jumps = 0;

  bool mass_ok = false;
  bool l1_ok = false;
  std::optional<bool> stationary_ok;
  [[nodiscard]] bool passed() const { return mass_ok && l1_ok && stationary_ok.value_or(true); }
};

struct ScenarioOutputs {
  std::vector<DensityField> fp;
  std::vector<DensityField> mc;
};

/// Density propagation and particle ensemble from the same initial law,
/// compared at every snapshot.
[[nodiscard]] ComparisonReport run_scenario(const ScenarioPreset& preset, const mc::McParams& mc_params,
                                            ScenarioOutputs* outputs = nullptr);

struct DualityAudit {
  double max_abs_gap = 0.0;
  /// Gap divided by dx * sum(|g||Au| + |A*g||u|) for the same pair.
  double max_rel_gap = 0.0;
};

/// <g, A u> - <A* g, u> over random pairs, with A assembled by the observable
/// solver and A* by the density solver. MUSCL limiters are frozen on a
/// Gaussian at the reset target.
[[nodiscard]] DualityAudit duality_audit(const Grid& grid, const HybridSystemSpec& spec,
                                         std::size_t n_trials, Reconstruction recon,
                                         std::uint64_t seed = 1);

/// Probability flux at the guard and on both sides of the reset target for
/// one step v_prev -> v_next. Fluxes at a are taken at the point a inside its
/// cell: the cell's storage rate is split evenly between its halves.
struct FluxBalance {
  double at_guard = 0.0;
  double a_minus = 0.0;
  double a_plus = 0.0;
  double max_abs_flux = 0.0;
  /// |at_guard - (a_plus - a_minus)|
  [[nodiscard]] double mismatch() const;
};

[[nodiscard]] FluxBalance flux_balance(const DensityField& v_prev, const DensityField& v_next,
                                       double dt, const Grid& grid, const HybridSystemSpec& spec,
                                       Reconstruction recon);

}  // namespace hybridfp::validation
