#include "hybridfp/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "hybridfp/errors.hpp"

namespace hybridfp::io {

using nlohmann::json;

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.contains(key)) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
T get(const json& j, const std::string& key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("bad or missing value for '" + key + "' in " + where);
  }
}

template <typename T>
std::optional<T> get_opt(const json& j, const std::string& key, const std::string& where) {
  if (!j.contains(key)) return std::nullopt;
  return get<T>(j, key, where);
}

double number_in(const json& j, const std::string& key, double lo, double hi) {
  const double value = get<double>(j, key, "config");
  if (!(value >= lo && value <= hi)) {
    std::ostringstream msg;
    msg << "'" << key << "' = " << value << " outside [" << lo << ", " << hi << "]";
    throw ConfigError(msg.str());
  }
  return value;
}

Reconstruction reconstruction_from(const std::string& s) {
  if (s == "muscl") return Reconstruction::Muscl;
  if (s == "godunov") return Reconstruction::Godunov;
  throw ConfigError("unknown reconstruction '" + s + "' (expected muscl or godunov)");
}

validation::ScenarioPreset inline_preset(const json& s, double dx) {
  const std::string where = "scenario";
  check_keys(s,
             {"name", "regime", "gamma", "center", "h", "guard", "reset", "rate", "x_min", "x_max",
              "init_mean", "init_sigma", "reconstruction"},
             where);
  validation::ScenarioPreset p;
  p.name = get_opt<std::string>(s, "name", where).value_or("custom");

  JumpRegime regime{};
  try {
    regime = regime_from_string(get<std::string>(s, "regime", where));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  const double gamma = get<double>(s, "gamma", where);
  const double center = get<double>(s, "center", where);
  const double reset = get<double>(s, "reset", where);
  const double h = get_opt<double>(s, "h", where).value_or(0.0);

  try {
    switch (regime) {
      case JumpRegime::DeterministicFlowGuardJump:
        p.spec = HybridSystemSpec::deterministic_guard(gamma, center, get<double>(s, "guard", where), reset);
        break;
      case JumpRegime::SdeGuardJump:
        p.spec = HybridSystemSpec::sde_guard(gamma, center, h, get<double>(s, "guard", where), reset);
        break;
      case JumpRegime::SdePoissonJump: {
        const json& r = s.contains("rate") ? s.at("rate") : throw ConfigError("missing 'rate' in scenario");
        check_keys(r, {"lambda_max", "half_width", "anchor"}, "scenario.rate");
        RateFunction rate{get<double>(r, "lambda_max", "scenario.rate"),
                          get<double>(r, "half_width", "scenario.rate"),
                          get<double>(r, "anchor", "scenario.rate")};
        p.spec = HybridSystemSpec::sde_poisson(gamma, center, h, reset, rate);
        break;
      }
    }
    p.spec.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("invalid system: ") + e.what());
  }
  if (p.spec.has_guard() && s.contains("rate")) throw ConfigError("'rate' given for a guard regime");
  if (!p.spec.has_guard() && s.contains("guard")) throw ConfigError("'guard' given for a Poisson regime");

  p.init_mean = get_opt<double>(s, "init_mean", where).value_or(reset);
  p.init_sigma = get_opt<double>(s, "init_sigma", where).value_or(0.125);
  if (!(p.init_sigma > 0.0)) throw ConfigError("'init_sigma' must be positive");
  p.reconstruction = fp::FpScheme::defaults_for(regime).reconstruction;
  if (auto r = get_opt<std::string>(s, "reconstruction", where)) p.reconstruction = reconstruction_from(*r);

  const double x_min = get<double>(s, "x_min", where);
  const double anchor = p.spec.has_guard() ? *p.spec.guard : p.spec.rate->anchor;
  const double x_max = get_opt<double>(s, "x_max", where).value_or(anchor);
  try {
    p.grid = Grid::for_system(p.spec, dx, x_min, x_max);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("invalid domain: ") + e.what());
  }
  p.t_final = 2.5;
  p.snapshot_times = validation::uniform_times(p.t_final, 0.25);
  return p;
}

std::string format_g17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

double parse_double(const std::string& s, const std::string& what) {
  std::size_t used = 0;
  double value = 0.0;
  try {
    value = std::stod(s, &used);
  } catch (const std::exception&) {
    throw ConfigError("cannot parse " + what + " '" + s + "'");
  }
  if (used != s.size()) throw ConfigError("trailing characters in " + what + " '" + s + "'");
  return value;
}

}  // namespace

RunConfig parse_config(const json& j) {
  check_keys(j,
             {"scenario", "dx", "dt", "mc_dt", "n_particles", "seed", "t_final", "snapshot_times",
              "snapshot_every", "output_dir", "emit"},
             "config");
  if (!j.contains("scenario")) throw ConfigError("missing 'scenario' in config");

  const double dx = j.contains("dx") ? number_in(j, "dx", kMinDx, kMaxDx) : 0.01;
  RunConfig cfg;
  const json& s = j.at("scenario");
  if (s.is_string()) {
    cfg.preset = validation::make_preset(s.get<std::string>(), dx);
  } else {
    cfg.preset = inline_preset(s, dx);
  }

  if (j.contains("dt")) cfg.preset.dt = number_in(j, "dt", kMinDt, kMaxDt);
  cfg.mc.dt = j.contains("mc_dt") ? number_in(j, "mc_dt", kMinDt, kMaxDt) : cfg.preset.dt;
  if (j.contains("n_particles")) {
    const auto n = get<std::int64_t>(j, "n_particles", "config");
    if (n < 1) throw ConfigError("'n_particles' must be at least 1");
    cfg.mc.n_particles = static_cast<std::size_t>(n);
  }
  if (j.contains("seed")) cfg.mc.rng_seed = get<std::uint64_t>(j, "seed", "config");

  bool times_changed = false;
  double every = 0.25;
  if (j.contains("t_final")) {
    cfg.preset.t_final = get<double>(j, "t_final", "config");
    if (!(cfg.preset.t_final >= 0.0) || !std::isfinite(cfg.preset.t_final)) {
      throw ConfigError("'t_final' must be a finite non-negative number");
    }
    times_changed = true;
  }
  if (j.contains("snapshot_every")) {
    if (j.contains("snapshot_times")) throw ConfigError("give either 'snapshot_times' or 'snapshot_every'");
    every = get<double>(j, "snapshot_every", "config");
    if (!(every > 0.0)) throw ConfigError("'snapshot_every' must be positive");
    times_changed = true;
  }
  if (j.contains("snapshot_times")) {
    auto times = get<std::vector<double>>(j, "snapshot_times", "config");
    if (times.empty()) throw ConfigError("'snapshot_times' must not be empty");
    if (!std::is_sorted(times.begin(), times.end())) throw ConfigError("'snapshot_times' must be sorted");
    if (times.front() < 0.0 || times.back() > cfg.preset.t_final) {
      throw ConfigError("'snapshot_times' must lie in [0, t_final]");
    }
    cfg.preset.snapshot_times = std::move(times);
  } else if (times_changed) {
    cfg.preset.snapshot_times = validation::uniform_times(cfg.preset.t_final, every);
  }

  if (j.contains("output_dir")) cfg.output_dir = get<std::string>(j, "output_dir", "config");
  if (j.contains("emit")) {
    const json& e = j.at("emit");
    check_keys(e, {"fp", "mc", "koopman", "report"}, "emit");
    cfg.emit.fp = get_opt<bool>(e, "fp", "emit").value_or(cfg.emit.fp);
    cfg.emit.mc = get_opt<bool>(e, "mc", "emit").value_or(cfg.emit.mc);
    cfg.emit.koopman = get_opt<bool>(e, "koopman", "emit").value_or(cfg.emit.koopman);
    cfg.emit.report = get_opt<bool>(e, "report", "emit").value_or(cfg.emit.report);
  }

  try {
    cfg.mc.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

void write_snapshot_csv(std::ostream& os, const std::string& scenario, double time,
                        std::span<const double> values, const Grid& grid) {
  if (values.size() != grid.n_cells()) throw GridMismatch("snapshot does not match the grid");
  os << "# scenario=" << scenario << " t=" << format_g17(time) << " dx=" << format_g17(grid.dx())
     << "\n";
  os << "x,v\n";
  for (std::size_t i = 0; i < values.size(); ++i) {
    os << format_g17(grid.center(i)) << ',' << format_g17(values[i]) << '\n';
  }
}

ParsedSnapshot read_snapshot_csv(std::istream& is) {
  ParsedSnapshot out;
  std::string line;
  if (!std::getline(is, line) || line.rfind("# ", 0) != 0) throw ConfigError("missing snapshot header");
  bool have_scenario = false, have_t = false, have_dx = false;
  std::istringstream header(line.substr(2));
  std::string field;
  while (header >> field) {
    const auto eq = field.find('=');
    if (eq == std::string::npos) throw ConfigError("malformed header field '" + field + "'");
    const std::string key = field.substr(0, eq);
    const std::string value = field.substr(eq + 1);
    if (key == "scenario") {
      out.scenario = value;
      have_scenario = true;
    } else if (key == "t") {
      out.time = parse_double(value, "time");
      have_t = true;
    } else if (key == "dx") {
      out.dx = parse_double(value, "dx");
      have_dx = true;
    } else {
      throw ConfigError("unknown header field '" + key + "'");
    }
  }
  if (!have_scenario || !have_t || !have_dx) throw ConfigError("incomplete snapshot header");
  if (!std::getline(is, line) || line != "x,v") throw ConfigError("missing column line 'x,v'");
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos || line.find(',', comma + 1) != std::string::npos) {
      throw ConfigError("malformed row '" + line + "'");
    }
    out.x.push_back(parse_double(line.substr(0, comma), "x"));
    out.v.push_back(parse_double(line.substr(comma + 1), "v"));
  }
  return out;
}

std::string snapshot_file_name(const std::string& kind, double time) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_t%.6f.csv", kind.c_str(), time);
  return buf;
}

json preset_to_json(const validation::ScenarioPreset& preset) {
  const auto& s = preset.spec;
  json j = {
      {"name", preset.name},
      {"regime", std::string(to_string(s.jump_regime))},
      {"gamma", s.drift_gamma},
      {"center", s.drift_center},
      {"h", s.diffusion_h},
      {"H", s.diffusion_coefficient()},
      {"reset", s.reset_target},
      {"guard", s.guard ? json(*s.guard) : json(nullptr)},
      {"init_mean", preset.init_mean},
      {"init_sigma", preset.init_sigma},
      {"t_final", preset.t_final},
      {"dt", preset.dt},
      {"reconstruction", std::string(to_string(preset.reconstruction))},
      {"grid",
       {{"x_min", preset.grid.x_min()},
        {"x_max", preset.grid.x_max()},
        {"n_cells", preset.grid.n_cells()},
        {"dx", preset.grid.dx()}}},
  };
  if (s.rate) {
    j["rate"] = {{"lambda_max", s.rate->lambda_max},
                 {"half_width", s.rate->threshold},
                 {"anchor", s.rate->anchor}};
  } else {
    j["rate"] = nullptr;
  }
  return j;
}

json report_to_json(const validation::ComparisonReport& report,
                    const validation::ScenarioPreset& preset) {
  json snaps = json::array();
  for (const auto& m : report.snapshots) {
    snaps.push_back({
        {"time", m.time},
        {"l1", m.l1},
        {"sup", m.sup},
        {"mass", m.mass},
        {"leaked", m.leaked},
        {"mass_drift", m.mass_drift},
        {"stationarity_gap", m.stationarity_gap ? json(*m.stationarity_gap) : json(nullptr)},
    });
  }
  return {
      {"scenario", report.scenario},
      {"regime", report.regime},
      {"preset", preset_to_json(preset)},
      {"dx", report.dx},
      {"dt", report.dt},
      {"mc", {{"dt", report.mc_dt}, {"n_particles", report.n_particles}, {"seed", report.seed},
              {"jumps", report.mc_jumps}}},
      {"snapshots", snaps},
      {"max_step_mass_drift", report.max_step_mass_drift},
      {"beyond_anchor_mass", report.beyond_anchor_mass},
      {"checks",
       {{"mass_ok", report.mass_ok},
        {"l1_ok", report.l1_ok},
        {"stationary_ok", report.stationary_ok ? json(*report.stationary_ok) : json(nullptr)}}},
      {"passed", report.passed()},
  };
}

json acceptance_to_json(const std::vector<acceptance::CriterionResult>& results) {
  json list = json::array();
  for (const auto& r : results) list.push_back({{"name", r.name}, {"passed", r.passed}, {"detail", r.detail}});
  return {{"criteria", list}, {"all_passed", acceptance::all_passed(results)}};
}

void write_scenario_outputs(const std::filesystem::path& dir, const validation::ScenarioPreset& preset,
                            const validation::ComparisonReport& report,
                            const validation::ScenarioOutputs& outputs, const EmitFlags& emit,
                            const std::optional<ObservableField>& koopman) {
  const auto target = dir / preset.name;
  std::filesystem::create_directories(target);

  auto write = [&](const std::string& name, double time, std::span<const double> values) {
    std::ofstream out(target / name);
    if (!out) throw std::runtime_error("cannot write " + (target / name).string());
    write_snapshot_csv(out, preset.name, time, values, preset.grid);
  };

  json files = json::array();
  for (std::size_t k = 0; k < outputs.fp.size(); ++k) {
    const double t = outputs.fp[k].time;
    json entry = {{"time", t}};
    if (emit.fp) {
      entry["fp"] = snapshot_file_name("fp", t);
      write(entry["fp"], t, outputs.fp[k].values);
    }
    if (emit.mc && k < outputs.mc.size()) {
      entry["mc"] = snapshot_file_name("mc", t);
      write(entry["mc"], t, outputs.mc[k].values);
    }
    files.push_back(entry);
  }
  json koopman_entry = nullptr;
  if (emit.koopman && koopman) {
    const std::string name = snapshot_file_name("koopman", koopman->time);
    write(name, koopman->time, koopman->values);
    koopman_entry = {{"time", koopman->time}, {"observable", "x"}, {"file", name}};
  }

  if (emit.report) {
    json j = report_to_json(report, preset);
    j["files"] = files;
    j["koopman"] = koopman_entry;
    std::ofstream out(target / "report.json");
    if (!out) throw std::runtime_error("cannot write report.json");
    out << j.dump(2) << "\n";
  }
}

}  // namespace hybridfp::io
