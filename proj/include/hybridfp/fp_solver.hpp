#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "hybridfp/grid.hpp"
#include "hybridfp/linalg.hpp"
#include "hybridfp/reconstruction.hpp"
#include "hybridfp/system.hpp"

/// Finite-volume Frobenius-Perron (Fokker-Planck) propagation.
///
/// The density lives on cell averages v_i. Every regime is written in
/// conservative form
///
///   dv_i/dt = -(F_{i+1/2} - F_{i-1/2}) / dx + S_i
///
/// with F the discrete probability flux I = vX - d(Hv)/dx and S the jump
/// source/sink. Artificial domain ends use zero-density ghost cells; the
/// outflux through them is reported as leakage. At the guard the outflux is
/// removed from the last cell and reinjected as a single-cell source at the
/// reset target, so the scheme telescopes to exact mass conservation.
namespace hybridfp::fp {

struct FpScheme {
  JumpRegime regime = JumpRegime::DeterministicFlowGuardJump;
  double dt = 1e-3;
  double newton_tol = 1e-10;
  int newton_max_iter = 50;
  Reconstruction reconstruction = Reconstruction::Muscl;

  /// MUSCL for the deterministic regime, Godunov upwinding otherwise.
  static FpScheme defaults_for(JumpRegime regime, double dt = 1e-3);
  void validate() const;
};

/// Discrete probability flux at the n_cells + 1 interfaces.
struct FluxField {
  std::vector<double> values;
};

/// Limiter branch per cell for the field, including the regime's ghost cells.
[[nodiscard]] SlopeSelection select_slopes(const DensityField& v, const Grid& grid,
                                           const HybridSystemSpec& spec);

/// Upwind advective flux vX with minmod-limited linear reconstruction.
/// Interface values split as max(X,0) v_left + min(X,0) v_right. The guard
/// interface is closed as described for the regime (see probability_flux).
[[nodiscard]] FluxField muscl_advective_flux(const DensityField& v, const Grid& grid,
                                             const HybridSystemSpec& spec);
[[nodiscard]] FluxField godunov_advective_flux(const DensityField& v, const Grid& grid,
                                               const HybridSystemSpec& spec);

/// -H (v_{i+1} - v_i) / dx at interior interfaces; boundary entries are zero.
[[nodiscard]] FluxField diffusive_flux(const DensityField& v, const Grid& grid, double H);

/// Single-cell source at the reset target carrying the guard outflux.
[[nodiscard]] std::vector<double> apply_case1_reinjection(double flux_at_b, const Grid& grid);

/// Absorbing guard for H > 0: a ghost of value -v_last makes the interface
/// value vanish, the absorbed flux is purely diffusive and is reinjected at a.
struct GuardClosure {
  double ghost_value = 0.0;
  double interface_value = 0.0;
  double absorbed_flux = 0.0;
  /// Jacobian contributions: d(rate_last)/d(v_last) and d(rate_a)/d(v_last).
  double last_row_coefficient = 0.0;
  double reinjection_coefficient = 0.0;
  std::vector<double> source;
};
[[nodiscard]] GuardClosure apply_case2_guard_bc(const DensityField& v, const Grid& grid, double H);

/// Poisson jump terms: pointwise sink -lambda(x_i) and the Dirac source
/// sum_j lambda_j v_j placed in the reset cell.
struct JumpTerms {
  std::vector<double> sink_diag;
  std::vector<double> source;
};
[[nodiscard]] JumpTerms apply_case3_jump_terms(const DensityField& v, const Grid& grid,
                                               const RateFunction& rate);

/// Full discrete I at every interface, boundary closures included. For guard
/// regimes the last entry is the flux absorbed at b.
[[nodiscard]] FluxField probability_flux(const DensityField& v, const Grid& grid,
                                         const HybridSystemSpec& spec, Reconstruction recon);

/// Discrete A*(v) evaluated through the nonlinear fluxes.
[[nodiscard]] std::vector<double> adjoint_action(const DensityField& v, const Grid& grid,
                                                 const HybridSystemSpec& spec, Reconstruction recon);

/// A* as a linear operator. For MUSCL the limiter branches are frozen at
/// `slopes` (required); for Godunov `slopes` is ignored.
[[nodiscard]] BandedOperator assemble_adjoint(const Grid& grid, const HybridSystemSpec& spec,
                                              Reconstruction recon,
                                              const SlopeSelection* slopes = nullptr);

/// Reconstructed density at the guard interface (the value the absorbing
/// condition pins to zero). Only meaningful for guard regimes.
[[nodiscard]] double guard_interface_value(const DensityField& v, const Grid& grid,
                                           const HybridSystemSpec& spec, Reconstruction recon);

struct StepReport {
  int newton_iterations = 0;
  double residual = 0.0;
  /// Mass that left through the artificial boundaries during the step.
  double leaked_left = 0.0;
  double leaked_right = 0.0;
  /// Flux through the guard at the new time level (0 without a guard).
  double guard_flux = 0.0;
};

/// One implicit Euler step v_{k+1} - v_k - dt A*(v_{k+1}) = 0 solved by Newton.
[[nodiscard]] DensityField implicit_step(const DensityField& v, const FpScheme& scheme,
                                         const Grid& grid, const HybridSystemSpec& spec,
                                         StepReport* report = nullptr);

/// Per-step callback: field after the step, its report, step index (1-based).
using StepObserver = std::function<void(const DensityField&, const StepReport&, std::size_t)>;

struct Propagation {
  std::vector<DensityField> snapshots;
  /// Cumulative boundary leakage at each snapshot.
  std::vector<double> leaked;
};

/// Steps from g to t_final; snapshots at the step boundaries nearest to the
/// requested times (sorted, within [0, t_final]).
[[nodiscard]] Propagation propagate_with_audit(const DensityField& g, const FpScheme& scheme,
                                               const Grid& grid, const HybridSystemSpec& spec,
                                               double t_final, std::span<const double> snapshot_times,
                                               const StepObserver& observer = {});

[[nodiscard]] std::vector<DensityField> propagate(const DensityField& g, const FpScheme& scheme,
                                                  const Grid& grid, const HybridSystemSpec& spec,
                                                  double t_final,
                                                  std::span<const double> snapshot_times);

/// Number of steps of size dt nearest to t.
[[nodiscard]] std::size_t steps_for(double t, double dt);

}  // namespace hybridfp::fp
