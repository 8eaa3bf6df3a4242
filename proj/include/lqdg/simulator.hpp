// Receding-horizon episode simulation.  A level-t episode recomputes the
// backward pass at stages 0, t, 2t, ... with beliefs frozen at their values
// when the block starts (t = 0 replans every stage, t = K plans once).
// Actions are evaluated from the current block's gains at realized states;
// beliefs update every stage from the observed transition.  Heuristic pursuer
// policies and complete-information play are provided for the two-player
// pursuit scenario.

#ifndef LQDG_SIMULATOR_HPP
#define LQDG_SIMULATOR_HPP

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "lqdg/belief.hpp"
#include "lqdg/game_spec.hpp"
#include "lqdg/riccati.hpp"
#include "lqdg/types.hpp"

namespace lqdg {

enum class PolicyType {
  kLevelT,           // equilibrium play with receding-horizon replanning
  kCompleteInfo,     // level-t with this player's beliefs degenerated at truth
  kDirectFollowing,  // pursuer moves to the evader's current position
  kConservative,     // pursuer idles until their online truth-revealing stage
};

struct PolicyKind {
  PolicyType type = PolicyType::kLevelT;
  double delta = 0.05;  // conservative revelation threshold, in (0, 1]
};

struct EpisodeOptions {
  int level = 0;                         // t in [0, K]
  std::vector<PolicyKind> policies;      // per player; defaults to level-t
  std::vector<bool> bayesian_update;     // per player; defaults to all true
  std::shared_ptr<const NoiseModel> noise;  // defaults to Gaussian from spec.Q
};

struct Trajectory {
  std::vector<Vector> states;                    // x^0..x^K
  std::vector<std::vector<Vector>> actions;      // [k][player], k = 0..K-1
  std::vector<Vector> noises;                    // w^0..w^{K-1}
  std::vector<BeliefTable> beliefs;              // after observing x^k, k = 0..K
  std::vector<std::vector<double>> stage_costs;  // [k][player], k = 0..K (K = terminal)
  std::vector<std::vector<double>> cumulative_costs;  // [k][player], inclusive of stage k
  JointType true_types;
  std::uint64_t seed = 0;
  std::vector<int> replan_stages;
  // Stage at which a conservative player switched to complete-information
  // pursuit; -1 if never (or not conservative).
  std::vector<int> conservative_switch;

  double final_cost(int player) const { return cumulative_costs.back()[player]; }
};

// Simulates one episode.  The backward pass is shared by all players (belief
// rows are common knowledge as functions of the public history); per-player
// policies override the executed action only.  Belief likelihoods hypothesize
// the current pass's equilibrium actions, except each observer's own action,
// which is the realized one.
Trajectory run_episode(const GameSpec& spec, const JointType& true_types, const Vector& x0,
                       const BeliefTable& initial_beliefs, const EpisodeOptions& options,
                       std::uint64_t seed);

struct McStatistic {
  double mean = 0.0;
  double variance = 0.0;  // unbiased sample variance (0 for n = 1)
  double std_error = 0.0;
};

struct MonteCarloResult {
  std::vector<Trajectory> trajectories;            // in replication order
  std::vector<std::vector<double>> final_costs;    // [rep][player]
  std::vector<McStatistic> final_cost_stats;       // per player
};

// Runs n_reps independent episodes with per-replication seeds derived from
// (base_seed, cell, rep).  Results are identical for any worker count; any
// episode failure aborts the batch with the failing seed in the message.
MonteCarloResult monte_carlo(const GameSpec& spec, const JointType& true_types, const Vector& x0,
                             const BeliefTable& initial_beliefs, const EpisodeOptions& options,
                             int n_reps, std::uint64_t base_seed, std::uint64_t cell = 0,
                             int threads = 1);

McStatistic summarize(const std::vector<double>& samples);

// Deterministic work-sharing helper; fn(i) runs once for each i in [0, n),
// exceptions are rethrown on the caller thread.
void parallel_for(int n, int threads, const std::function<void(int)>& fn);

}  // namespace lqdg

#endif  // LQDG_SIMULATOR_HPP
