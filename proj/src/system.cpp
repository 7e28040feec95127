#include "hybridfp/system.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include "hybridfp/errors.hpp"

namespace hybridfp {

std::string_view to_string(JumpRegime regime) {
  switch (regime) {
    case JumpRegime::DeterministicFlowGuardJump:
      return "deterministic-flow-guard-jump";
    case JumpRegime::SdeGuardJump:
      return "sde-guard-jump";
    case JumpRegime::SdePoissonJump:
      return "sde-poisson-jump";
  }
  return "unknown";
}

JumpRegime regime_from_string(std::string_view name) {
  for (auto r : {JumpRegime::DeterministicFlowGuardJump, JumpRegime::SdeGuardJump,
                 JumpRegime::SdePoissonJump}) {
    if (to_string(r) == name) return r;
  }
  throw std::invalid_argument("unknown jump regime '" + std::string(name) + "'");
}

void HybridSystemSpec::validate() const {
  if (!(drift_gamma > 0.0)) throw std::invalid_argument("drift_gamma must be positive");
  if (!(diffusion_h >= 0.0)) throw std::invalid_argument("diffusion_h must be non-negative");
  if (jump_regime == JumpRegime::DeterministicFlowGuardJump && diffusion_h != 0.0) {
    throw std::invalid_argument("deterministic flow requires diffusion_h = 0");
  }
  const bool needs_guard = jump_regime != JumpRegime::SdePoissonJump;
  if (needs_guard != guard.has_value()) {
    throw std::invalid_argument(needs_guard ? "guard regime requires a guard"
                                            : "Poisson regime must not define a guard");
  }
  if (needs_guard) {
    if (!(reset_target < *guard)) throw std::invalid_argument("reset_target must lie below the guard");
    if (!(eval_drift(*this, *guard) > 0.0)) {
      throw std::invalid_argument("drift at the guard must point toward the guard");
    }
    if (rate.has_value()) throw std::invalid_argument("guard regimes take no rate function");
  } else {
    if (!rate.has_value()) throw std::invalid_argument("Poisson regime requires a rate function");
    if (!(rate->threshold > 0.0)) throw std::invalid_argument("rate threshold must be positive");
    if (!(rate->lambda_max >= 0.0)) throw std::invalid_argument("lambda_max must be non-negative");
  }
}

HybridSystemSpec HybridSystemSpec::deterministic_guard(double gamma, double center, double guard,
                                                       double reset) {
  HybridSystemSpec s;
  s.drift_gamma = gamma;
  s.drift_center = center;
  s.guard = guard;
  s.reset_target = reset;
  s.jump_regime = JumpRegime::DeterministicFlowGuardJump;
  s.validate();
  return s;
}

HybridSystemSpec HybridSystemSpec::sde_guard(double gamma, double center, double h, double guard,
                                             double reset) {
  HybridSystemSpec s = deterministic_guard(gamma, center, guard, reset);
  s.diffusion_h = h;
  s.jump_regime = JumpRegime::SdeGuardJump;
  s.validate();
  return s;
}

HybridSystemSpec HybridSystemSpec::sde_poisson(double gamma, double center, double h, double reset,
                                               RateFunction rate) {
  HybridSystemSpec s;
  s.drift_gamma = gamma;
  s.drift_center = center;
  s.diffusion_h = h;
  s.reset_target = reset;
  s.jump_regime = JumpRegime::SdePoissonJump;
  s.rate = rate;
  s.validate();
  return s;
}

double eval_drift(const HybridSystemSpec& spec, double x) {
  return -spec.drift_gamma * (x - spec.drift_center);
}

double eval_rate(const RateFunction& rate, double x) {
  const double offset = x - rate.anchor;
  if (offset < -rate.threshold) return 0.0;
  if (offset > rate.threshold) return rate.lambda_max;
  return 0.5 * rate.lambda_max *
         (1.0 + std::sin(std::numbers::pi * offset / (2.0 * rate.threshold)));
}

double eval_jump_rate(const HybridSystemSpec& spec, double x) {
  return spec.rate ? eval_rate(*spec.rate, x) : 0.0;
}

double flow_transit_time(const HybridSystemSpec& spec, double x0, double x1) {
  const double c = spec.drift_center;
  const double ratio = (x1 - c) / (x0 - c);
  if (!(ratio > 0.0) || ratio > 1.0) return std::numeric_limits<double>::infinity();
  return -std::log(ratio) / spec.drift_gamma;
}

double exact_flow_map(const HybridSystemSpec& spec, double x0, double t) {
  if (spec.diffusion_h != 0.0) throw std::invalid_argument("exact_flow_map needs diffusion_h = 0");
  if (t < 0.0) throw std::invalid_argument("exact_flow_map needs t >= 0");
  if (t == 0.0) return x0;
  if (spec.guard) {
    if (x0 >= *spec.guard || flow_transit_time(spec, x0, *spec.guard) < t) {
      throw GuardCrossed("trajectory from x0=" + std::to_string(x0) + " reaches the guard before t=" +
                         std::to_string(t));
    }
  }
  const double c = spec.drift_center;
  return c + (x0 - c) * std::exp(-spec.drift_gamma * t);
}

}  // namespace hybridfp
