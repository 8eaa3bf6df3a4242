// Experiment orchestration: config ingestion (YAML or JSON, versioned
// schema), the run/sweep/validate commands backing the CLI, deterministic
// run identifiers, and the CSV/JSON artifact writers.  Identical config and
// seed reproduce byte-identical artifacts for any worker count.

#ifndef LQDG_EXPERIMENT_HPP
#define LQDG_EXPERIMENT_HPP

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "lqdg/game_spec.hpp"
#include "lqdg/scenario.hpp"
#include "lqdg/simulator.hpp"
#include "lqdg/types.hpp"

namespace lqdg {

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kArtifactVersion = "0.1.0";

// Per-player initial belief declaration.
struct BeliefSpec {
  enum class Kind { kUniform, kOnTrue, kRows } kind = Kind::kUniform;
  double on_true = 0.5;              // mass on the true opponent profile
  std::vector<Vector> rows;          // explicit rows per own type
};

struct MetricsConfig {
  double delta = 0.05;       // truth-revealing threshold
  double epsilon = 0.1;      // deceivability / reach-capture level
  int k_tilde = -1;          // deceivability stage bound; -1 = horizon / 2
  double threshold = 1.0;    // endpoint distance bound
  double eta0 = 1.0;         // price-of-deception regularizer
  std::vector<double> eta;   // player weights; default uniform
  bool paired_complete_info = true;
};

// One cell of a run/sweep grid: overrides applied on top of the base config.
struct CellOverride {
  std::optional<double> initial_belief;   // player 0 mass on true opponent profile
  std::optional<double> b1_high;
  std::optional<double> alpha;
  std::optional<std::string> policy;      // player 0 policy kind
  std::optional<bool> bayesian;           // player 0 belief updating
  std::optional<JointType> true_types;
  int index = 0;
};

struct ExperimentConfig {
  int schema_version = kSchemaVersion;
  std::string name = "experiment";
  std::uint64_t seed = 0;
  bool has_seed = false;
  int replications = 1;
  int level = 0;
  int threads = 1;
  std::string output_dir = "out";
  std::vector<std::string> formats = {"csv"};
  std::optional<bool> write_trajectories;  // default: run yes, sweep no

  std::optional<PursuitEvasionParams> scenario;
  std::optional<GameSpec> inline_game;
  std::optional<Vector> x0;  // required for inline games; scenario derives it

  JointType true_types;               // resolved indices
  std::vector<BeliefSpec> beliefs;    // per player
  std::vector<PolicyKind> policies;   // per player
  std::vector<bool> bayesian_update;  // per player
  MetricsConfig metrics;

  // Sweep axes (empty = absent).  The cross product of the non-empty axes
  // forms the cells; run mode treats them the same way with trajectories on.
  std::vector<double> axis_initial_belief;
  std::vector<double> axis_b1_high;
  std::vector<double> axis_alpha;
  std::vector<std::string> axis_policy;
  std::vector<int> axis_bayesian;  // 0/1
  std::vector<JointType> axis_true_types;
};

// Loads and validates a config file; format chosen by extension (.yaml/.yml
// or .json).  Throws ConfigError with a pointer to the offending key.
ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig parse_config_json(const std::string& json_text);

// Builds the (validated) game spec for a cell of the experiment.
GameSpec build_spec(const ExperimentConfig& config, const CellOverride& cell);
// Initial beliefs resolved against the cell's true types.
BeliefTable build_beliefs(const ExperimentConfig& config, const CellOverride& cell,
                          const GameSpec& spec);
EpisodeOptions build_options(const ExperimentConfig& config, const CellOverride& cell,
                             const GameSpec& spec);
std::vector<CellOverride> enumerate_cells(const ExperimentConfig& config);

// Canonical JSON of the resolved config (execution details like thread count
// and output directory excluded), and the run id: a 64-bit FNV-1a hash of
// (canonical config, seed) in hex.
std::string canonical_config_json(const ExperimentConfig& config);
std::string run_id(const ExperimentConfig& config);

struct RunOutput {
  std::filesystem::path directory;
  std::string id;
  int cells = 0;
  int episodes = 0;
};

// Executes every cell x replication, writes
// <output_dir>/<experiment>/<run id>/{manifest.json, trajectories.csv,
// metrics.csv, summary.csv} and returns the artifact location.
RunOutput cmd_run(const ExperimentConfig& config);
// Same engine with sweep defaults (trajectories off unless requested).
RunOutput cmd_sweep(const ExperimentConfig& config);

// Structural validation + controllability + dry backward passes on the
// uniform table and each configured initial belief.  Prints per-stage
// existence diagnostics to `log`; returns a process exit code (0 valid,
// 2 config errors, 3 solver failure).
int cmd_validate(const ExperimentConfig& config, std::ostream& log);

}  // namespace lqdg

#endif  // LQDG_EXPERIMENT_HPP
