#pragma once

#include <optional>
#include <string_view>

namespace hybridfp {

enum class JumpRegime {
  DeterministicFlowGuardJump,  // ODE flow, forced reset at the guard
  SdeGuardJump,                // SDE flow, forced reset at the guard
  SdePoissonJump,              // SDE flow, spontaneous resets at rate lambda(x)
};

std::string_view to_string(JumpRegime regime);
JumpRegime regime_from_string(std::string_view name);

/// Smooth ramp from 0 to lambda_max centred on the anchor:
///   0                                         x - anchor < -threshold
///   lambda_max/2 (1 + sin(pi (x-anchor) / (2 threshold)))   |x - anchor| <= threshold
///   lambda_max                                x - anchor > threshold
struct RateFunction {
  double lambda_max = 0.0;
  double threshold = 1.0;
  double anchor = 0.0;
};

/// One-mode, one-dimensional stochastic hybrid system with affine drift
/// X(x) = -gamma (x - c), constant diffusion weight h, and a Dirac reset
/// kernel at reset_target.
struct HybridSystemSpec {
  double drift_gamma = 1.0;
  double drift_center = 0.0;
  double diffusion_h = 0.0;
  std::optional<double> guard;
  double reset_target = 0.0;
  JumpRegime jump_regime = JumpRegime::DeterministicFlowGuardJump;
  std::optional<RateFunction> rate;

  /// H = h^2 / 2.
  [[nodiscard]] double diffusion_coefficient() const { return 0.5 * diffusion_h * diffusion_h; }
  [[nodiscard]] bool has_guard() const { return guard.has_value(); }

  /// Throws std::invalid_argument when the invariants do not hold.
  void validate() const;

  static HybridSystemSpec deterministic_guard(double gamma, double center, double guard, double reset);
  static HybridSystemSpec sde_guard(double gamma, double center, double h, double guard, double reset);
  static HybridSystemSpec sde_poisson(double gamma, double center, double h, double reset,
                                      RateFunction rate);
};

[[nodiscard]] double eval_drift(const HybridSystemSpec& spec, double x);
[[nodiscard]] double eval_rate(const RateFunction& rate, double x);

/// Rate at x for the spec, zero for the guard regimes.
[[nodiscard]] double eval_jump_rate(const HybridSystemSpec& spec, double x);

/// Closed-form flow of x' = -gamma (x - c). Throws GuardCrossed when the
/// trajectory reaches the guard strictly before t.
[[nodiscard]] double exact_flow_map(const HybridSystemSpec& spec, double x0, double t);

/// Time for the deterministic flow to carry x0 to x1 (infinite if never).
[[nodiscard]] double flow_transit_time(const HybridSystemSpec& spec, double x0, double x1);

}  // namespace hybridfp
