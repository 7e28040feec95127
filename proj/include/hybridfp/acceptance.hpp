#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "hybridfp/validation.hpp"

/// The end-to-end acceptance suite: every criterion is run at its stated
/// resolution and tolerance and reported as one pass/fail result.
namespace hybridfp::acceptance {

struct CriterionResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct Options {
  std::uint64_t seed = 20240917;
  /// Called as soon as each criterion finishes.
  std::function<void(const CriterionResult&)> on_result;
  /// Called after each preset's density/particle comparison run.
  std::function<void(const validation::ScenarioPreset&, const validation::ComparisonReport&,
                     const validation::ScenarioOutputs&)>
      on_scenario;
};

[[nodiscard]] std::vector<CriterionResult> run_acceptance(const Options& options = {});

[[nodiscard]] bool all_passed(const std::vector<CriterionResult>& results);

/// "PASS name: detail" / "FAIL name: detail"
[[nodiscard]] std::string format_result(const CriterionResult& r);

}  // namespace hybridfp::acceptance
