// hybridfp: run scenarios, list presets, run the acceptance suite.
//
// Exit codes: 0 success, 1 configuration error, 2 solver failure,
// 3 acceptance failure.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "hybridfp/acceptance.hpp"
#include "hybridfp/errors.hpp"
#include "hybridfp/io.hpp"
#include "hybridfp/koopman.hpp"
#include "hybridfp/validation.hpp"

namespace {

using namespace hybridfp;

struct GlobalFlags {
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  bool quiet = false;
};

int run_command(const std::string& config_path, const GlobalFlags& flags) {
  auto cfg = io::load_config(config_path);
  if (flags.seed) cfg.mc.rng_seed = *flags.seed;
  if (flags.out) cfg.output_dir = *flags.out;

  validation::ScenarioOutputs outputs;
  const auto report = validation::run_scenario(cfg.preset, cfg.mc, &outputs);

  std::optional<ObservableField> koopman_field;
  if (cfg.emit.koopman) {
    const auto f = koopman::sample_observable(cfg.preset.grid, [](double x) { return x; });
    koopman_field = koopman::koopman_propagate(f, cfg.preset.grid, cfg.preset.spec, cfg.preset.dt,
                                               cfg.preset.t_final);
  }
  io::write_scenario_outputs(cfg.output_dir, cfg.preset, report, outputs, cfg.emit, koopman_field);

  if (!flags.quiet) {
    std::printf("%s: %zu snapshots, dx=%.6g, dt=%.3g, N=%zu, seed=%llu\n", report.scenario.c_str(),
                report.snapshots.size(), report.dx, report.dt, report.n_particles,
                static_cast<unsigned long long>(report.seed));
    for (const auto& m : report.snapshots) {
      std::printf("  t=%-8.4f L1=%.4f sup=%.4f mass=%.12f leaked=%.3e\n", m.time, m.l1, m.sup, m.mass,
                  m.leaked);
    }
    std::printf("max step mass drift %.3e; outputs in %s\n", report.max_step_mass_drift,
                (cfg.output_dir / cfg.preset.name).string().c_str());
  }
  return 0;
}

int presets_command() {
  for (const auto& p : validation::all_presets()) {
    const auto& s = p.spec;
    std::printf("%-20s regime=%s a=%g b=%g c=%g gamma=%g sigma=%g H=%g", p.name.c_str(),
                std::string(to_string(s.jump_regime)).c_str(), s.reset_target,
                s.guard ? *s.guard : s.rate->anchor, s.drift_center, s.drift_gamma, p.init_sigma,
                s.diffusion_coefficient());
    if (s.rate) std::printf(" eps=%g lambda_max=%g", s.rate->threshold, s.rate->lambda_max);
    std::printf(" T=%g domain=[%.4f, %.4f] dx=%.6g\n", p.t_final, p.grid.x_min(), p.grid.x_max(),
                p.grid.dx());
  }
  return 0;
}

int check_command(const GlobalFlags& flags) {
  acceptance::Options options;
  if (flags.seed) options.seed = *flags.seed;
  options.on_result = [&](const acceptance::CriterionResult& r) {
    if (!flags.quiet) {
      std::printf("%s\n", acceptance::format_result(r).c_str());
      std::fflush(stdout);
    }
  };
  if (flags.out) {
    const std::filesystem::path dir = *flags.out;
    options.on_scenario = [dir](const auto& preset, const auto& report, const auto& outputs) {
      io::write_scenario_outputs(dir, preset, report, outputs, io::EmitFlags{});
    };
  }
  const auto results = acceptance::run_acceptance(options);
  if (flags.out) {
    std::filesystem::create_directories(*flags.out);
    std::ofstream out(std::filesystem::path(*flags.out) / "acceptance.json");
    out << io::acceptance_to_json(results).dump(2) << "\n";
  }
  std::size_t failed = 0;
  for (const auto& r : results) failed += r.passed ? 0 : 1;
  if (!flags.quiet) std::printf("%zu/%zu criteria passed\n", results.size() - failed, results.size());
  return failed == 0 ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Density propagation for stochastic hybrid systems"};
  app.require_subcommand(1);
  GlobalFlags flags;
  app.add_option("--out", flags.out, "Output directory");
  app.add_option("--seed", flags.seed, "Monte Carlo seed");
  app.add_flag("--quiet", flags.quiet, "Print nothing on success");

  std::string config_path;
  std::string config_flag;
  auto* run = app.add_subcommand("run", "Run a scenario from a JSON config");
  run->fallthrough();
  auto* positional = run->add_option("config_file", config_path, "Config file");
  auto* named = run->add_option("--config", config_flag, "Config file");
  positional->excludes(named);
  auto* presets = app.add_subcommand("presets", "List the built-in scenarios");
  auto* check = app.add_subcommand("check", "Run the acceptance suite");
  check->fallthrough();
  presets->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*run) {
      if (config_path.empty()) config_path = config_flag;
      if (config_path.empty()) throw ConfigError("run: a config file is required");
      return run_command(config_path, flags);
    }
    if (*presets) return presets_command();
    return check_command(flags);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "solver error: " << e.what() << "\n";
    return 2;
  }
}
