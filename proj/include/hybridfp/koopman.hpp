#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "hybridfp/grid.hpp"
#include "hybridfp/linalg.hpp"
#include "hybridfp/monte_carlo.hpp"
#include "hybridfp/reconstruction.hpp"
#include "hybridfp/system.hpp"

/// Discrete stochastic Koopman generator and propagator.
///
/// Observables are sampled at cell centres so that the pairing with a
/// density is dx * sum(g_i u_i). The generator is upwinded along the
/// characteristic direction (observables are transported against the flow)
/// and the guard condition u(b) = u(a) is imposed by substituting u(a)
/// wherever the stencil reaches the guard node. At the artificial ends of the
/// domain the observable is killed (u = 0), the counterpart of the
/// zero-density ghost cells on the density side.
namespace hybridfp::koopman {

struct GeneratorOptions {
  Reconstruction reconstruction = Reconstruction::Godunov;
  /// Required for MUSCL: the frozen limiter branches of the density scheme.
  const SlopeSelection* frozen_slopes = nullptr;
};

struct GeneratorMatrix {
  /// Full generator A = A_c + A_d.
  BandedOperator op;
  /// Jump part A_d u = lambda (u(a) - u) alone (zero for the guard regimes).
  BandedOperator jump_op;
  JumpRegime regime = JumpRegime::DeterministicFlowGuardJump;
  double dx = 0.0;
  /// Cell whose value stands in for the guard node, when a guard exists.
  std::optional<std::size_t> guard_substitute;

  [[nodiscard]] std::size_t size() const { return op.size(); }
  [[nodiscard]] std::vector<double> apply(std::span<const double> u) const { return op.apply(u); }
};

[[nodiscard]] GeneratorMatrix assemble_generator(const Grid& grid, const HybridSystemSpec& spec,
                                                 const GeneratorOptions& options = {});

[[nodiscard]] ObservableField sample_observable(const Grid& grid,
                                                const std::function<double(double)>& f);

/// u(b), which the guard condition ties to u(a).
[[nodiscard]] double guard_value(const ObservableField& u, const Grid& grid);

/// Linear interpolation between cell centres, constant beyond the end cells.
[[nodiscard]] double evaluate_at(const ObservableField& u, const Grid& grid, double x);

/// Implicit Euler on du/dt = A u from f to t_final with fixed dt.
[[nodiscard]] ObservableField koopman_propagate(const ObservableField& f, const Grid& grid,
                                                const HybridSystemSpec& spec, double dt,
                                                double t_final, const GeneratorOptions& options = {});

struct ExpectationCheck {
  double koopman_value = 0.0;
  double mc_value = 0.0;
  double mc_stderr = 0.0;
};

/// E[f(X_t) | X_0 = x0] from the Koopman propagator and from particles
/// started at x0. The Koopman run uses the particle time step.
[[nodiscard]] ExpectationCheck expectation_check(const std::function<double(double)>& f, double x0,
                                                 double t, const Grid& grid,
                                                 const HybridSystemSpec& spec,
                                                 const mc::McParams& mc_params);

}  // namespace hybridfp::koopman
