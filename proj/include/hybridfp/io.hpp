#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "hybridfp/acceptance.hpp"
#include "hybridfp/grid.hpp"
#include "hybridfp/monte_carlo.hpp"
#include "hybridfp/validation.hpp"

/// Run configuration, CSV snapshots and JSON reports. The formats are
/// documented in docs/formats.md.
namespace hybridfp::io {

inline constexpr double kMinDx = 1e-4;
inline constexpr double kMaxDx = 0.1;
inline constexpr double kMinDt = 1e-6;
inline constexpr double kMaxDt = 1e-2;

struct EmitFlags {
  bool fp = true;
  bool mc = true;
  bool koopman = false;
  bool report = true;
};

struct RunConfig {
  validation::ScenarioPreset preset;
  mc::McParams mc;
  std::filesystem::path output_dir = "hybridfp-out";
  EmitFlags emit;
};

/// Throws ConfigError on unknown keys, wrong types and out-of-range values.
[[nodiscard]] RunConfig parse_config(const nlohmann::json& j);
[[nodiscard]] RunConfig load_config(const std::filesystem::path& path);

/// One density snapshot: header `# scenario=<name> t=<time> dx=<dx>`, a
/// column line `x,v`, then one `x,v` row per cell centre with 17 significant
/// digits.
void write_snapshot_csv(std::ostream& os, const std::string& scenario, double time,
                        std::span<const double> values, const Grid& grid);

struct ParsedSnapshot {
  std::string scenario;
  double time = 0.0;
  double dx = 0.0;
  std::vector<double> x;
  std::vector<double> v;
};

/// Throws ConfigError on malformed input.
[[nodiscard]] ParsedSnapshot read_snapshot_csv(std::istream& is);

/// File name used for a snapshot of the given kind ("fp", "mc", "koopman").
[[nodiscard]] std::string snapshot_file_name(const std::string& kind, double time);

[[nodiscard]] nlohmann::json report_to_json(const validation::ComparisonReport& report,
                                            const validation::ScenarioPreset& preset);
[[nodiscard]] nlohmann::json acceptance_to_json(const std::vector<acceptance::CriterionResult>& results);
[[nodiscard]] nlohmann::json preset_to_json(const validation::ScenarioPreset& preset);

/// Writes <dir>/<scenario>/ with the snapshot CSVs selected by emit and,
/// when requested, report.json listing them.
void write_scenario_outputs(const std::filesystem::path& dir, const validation::ScenarioPreset& preset,
                            const validation::ComparisonReport& report,
                            const validation::ScenarioOutputs& outputs, const EmitFlags& emit,
                            const std::optional<ObservableField>& koopman = std::nullopt);

}  // namespace hybridfp::io
