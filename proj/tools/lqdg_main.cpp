// Command-line simulator for linear-quadratic dynamic games with hidden
// player types.  Verbs: run (episodes + trajectories), sweep (metric grids),
// validate (structure + equilibrium existence).  Exit codes: 0 success,
// 2 configuration error, 3 solver failure.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "lqdg/experiment.hpp"

namespace {

struct Overrides {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> reps;
  std::optional<std::string> out_dir;
  std::optional<int> level;
  std::vector<std::string> formats;
  std::optional<int> threads;
};

void add_common_flags(CLI::App* cmd, Overrides* o, bool execution_flags) {
  cmd->add_option("--config", o->config_path, "experiment config (.yaml/.yml/.json)")
      ->required();
  if (!execution_flags) return;
  cmd->add_option("--seed", o->seed, "master seed (overrides the config)");
  cmd->add_option("--reps", o->reps, "replications per cell (overrides the config)");
  cmd->add_option("--out", o->out_dir, "output directory (overrides the config)");
  cmd->add_option("--level", o->level, "replanning level t (overrides the config)");
  cmd->add_option("--format", o->formats, "output formats: csv, json")->delimiter(',');
  cmd->add_option("--threads", o->threads, "worker threads (overrides the config)");
}

lqdg::ExperimentConfig load_with_overrides(const Overrides& o) {
  lqdg::ExperimentConfig cfg = lqdg::load_config(o.config_path);
  if (o.seed) {
    cfg.seed = *o.seed;
    cfg.has_seed = true;
  }
  if (o.reps) {
    if (*o.reps < 1) throw lqdg::ConfigError("config: --reps must be at least 1");
    cfg.replications = *o.reps;
  }
  if (o.out_dir) cfg.output_dir = *o.out_dir;
  if (o.level) {
    if (*o.level < 0) throw lqdg::ConfigError("config: --level must be non-negative");
    cfg.level = *o.level;
  }
  if (!o.formats.empty()) {
    cfg.formats.clear();
    for (const std::string& f : o.formats) {
      if (f != "csv" && f != "json")
        throw lqdg::ConfigError("config: --format must be csv or json");
      if (std::find(cfg.formats.begin(), cfg.formats.end(), f) == cfg.formats.end())
        cfg.formats.push_back(f);
    }
  }
  if (o.threads) {
    if (*o.threads < 1) throw lqdg::ConfigError("config: --threads must be at least 1");
    cfg.threads = *o.threads;
  }
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulator for LQ dynamic games with hidden player types"};
  app.set_version_flag("--version", lqdg::kArtifactVersion);
  app.require_subcommand(1);

  Overrides run_o, sweep_o, validate_o;
  CLI::App* run = app.add_subcommand("run", "simulate episodes and write trajectories");
  add_common_flags(run, &run_o, true);
  CLI::App* sweep = app.add_subcommand("sweep", "run the sweep grid and write metric tables");
  add_common_flags(sweep, &sweep_o, true);
  CLI::App* validate =
      app.add_subcommand("validate", "check the config, structure, and equilibrium existence");
  add_common_flags(validate, &validate_o, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (run->parsed()) {
      const lqdg::RunOutput out = lqdg::cmd_run(load_with_overrides(run_o));
      std::cout << "run " << out.id << ": " << out.cells << " cell(s), " << out.episodes
                << " episode(s) -> " << out.directory.string() << "\n";
      return 0;
    }
    if (sweep->parsed()) {
      const lqdg::RunOutput out = lqdg::cmd_sweep(load_with_overrides(sweep_o));
      std::cout << "sweep " << out.id << ": " << out.cells << " cell(s), " << out.episodes
                << " episode(s) -> " << out.directory.string() << "\n";
      return 0;
    }
    const lqdg::ExperimentConfig cfg = lqdg::load_config(validate_o.config_path);
    return lqdg::cmd_validate(cfg, std::cout);
  } catch (const lqdg::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const lqdg::SolverError& e) {
    std::cerr << "solver error (stage " << e.stage << "): " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
