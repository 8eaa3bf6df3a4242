#include "lqdg/simulator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <sstream>
#include <thread>

namespace lqdg {

namespace {

// Pursuer heuristic: one step that lands on the opponent's current position
// (before noise), u = Bblock^{-1} (p_other - p_own).  Requires the planar
// two-player layout where each player steers their own 2d position block.
Vector direct_following_action(const GameSpec& spec, int k, const Vector& x, int player,
                               int own_type) {
  if (spec.num_players != 2 || spec.state_dim != 4 || spec.control_dims[player] != 2)
    throw ConfigError("direct-following policy requires the planar two-player layout");
  const Matrix& B = spec.dyn_B(k, player, own_type);
  const Eigen::Matrix2d block = B.block(2 * player, 0, 2, 2);
  const Eigen::Vector2d delta =
      x.segment(2 * (1 - player), 2) - x.segment(2 * player, 2);
  return block.colPivHouseholderQr().solve(delta);
}

}  // namespace

Trajectory run_episode(const GameSpec& spec, const JointType& true_types, const Vector& x0,
                       const BeliefTable& initial_beliefs, const EpisodeOptions& options,
                       std::uint64_t seed) {
  const int N = spec.num_players;
  const int K = spec.horizon;
  if (static_cast<int>(true_types.size()) != N)
    throw ConfigError("run_episode: true_types must list one type per player");
  for (int i = 0; i < N; ++i)
    if (true_types[i] < 0 || true_types[i] >= spec.types.num_types(i))
      throw ConfigError("run_episode: true type out of range");
  if (x0.size() != spec.state_dim)
    throw ConfigError("run_episode: initial state dimension mismatch");
  if (options.level < 0 || options.level > K)
    throw ConfigError("run_episode: level must lie in [0, horizon]");

  std::vector<PolicyKind> policies = options.policies;
  if (policies.empty()) policies.assign(N, PolicyKind{});
  if (static_cast<int>(policies.size()) != N)
    throw ConfigError("run_episode: one policy per player required");
  std::vector<bool> mask = options.bayesian_update;
  if (mask.empty()) mask.assign(N, true);
  if (static_cast<int>(mask.size()) != N)
    throw ConfigError("run_episode: one bayesian_update flag per player required");

  std::shared_ptr<const NoiseModel> noise = options.noise;
  if (!noise) noise = make_gaussian_noise(spec);
  std::mt19937_64 rng(seed);

  Trajectory traj;
  traj.true_types = true_types;
  traj.seed = seed;
  traj.conservative_switch.assign(N, -1);
  traj.states.push_back(x0);
  traj.beliefs.push_back(initial_beliefs);

  BeliefTable table = initial_beliefs;
  Vector x = x0;
  const int t = options.level;

  RiccatiSolution base_sol;
  std::vector<RiccatiSolution> private_sol(N);  // complete-info / post-switch passes
  std::vector<bool> has_private(N, false);

  // Builds player i's private pass: their own rows degenerated onto `joint`
  // (the true profile for complete-information play, the MAP estimate for a
  // conservative player after its switch).
  auto refresh_private = [&](int i, const JointType& joint, int from_stage) {
    BeliefTable priv = table;
    priv.make_complete_info(spec.types, i, joint);
    private_sol[i] = backward_pass(spec, priv, from_stage);
    has_private[i] = true;
  };

  for (int k = 0; k < K; ++k) {
    const bool replan = (t == 0) || (k % t == 0);
    if (replan) {
      base_sol = backward_pass(spec, table, k);
      traj.replan_stages.push_back(k);
      for (int i = 0; i < N; ++i) {
        if (policies[i].type == PolicyType::kCompleteInfo) {
          refresh_private(i, true_types, k);
        } else if (policies[i].type == PolicyType::kConservative &&
                   traj.conservative_switch[i] >= 0) {
          const Vector& row = table.row(i, true_types[i]);
          int map_idx = 0;
          row.maxCoeff(&map_idx);
          refresh_private(i, spec.types.compose(i, true_types[i], map_idx), k);
        }
      }
    }

    // Online revelation check: a conservative player switches to pursuit at
    // the first stage where their belief row concentrates within delta.
    for (int i = 0; i < N; ++i) {
      if (policies[i].type != PolicyType::kConservative || traj.conservative_switch[i] >= 0)
        continue;
      const Vector& row = table.row(i, true_types[i]);
      int map_idx = 0;
      const double top = row.maxCoeff(&map_idx);
      if (1.0 - top <= policies[i].delta) {
        traj.conservative_switch[i] = k;
        refresh_private(i, spec.types.compose(i, true_types[i], map_idx), k);
      }
    }

    std::vector<Vector> u(N);
    for (int i = 0; i < N; ++i) {
      switch (policies[i].type) {
        case PolicyType::kLevelT:
          u[i] = equilibrium_action(base_sol, k, x, i, true_types[i]);
          break;
        case PolicyType::kCompleteInfo:
          u[i] = equilibrium_action(private_sol[i], k, x, i, true_types[i]);
          break;
        case PolicyType::kDirectFollowing:
          u[i] = direct_following_action(spec, k, x, i, true_types[i]);
          break;
        case PolicyType::kConservative:
          u[i] = (traj.conservative_switch[i] >= 0 && has_private[i])
                     ? equilibrium_action(private_sol[i], k, x, i, true_types[i])
                     : Vector::Zero(spec.control_dims[i]);
          break;
      }
    }

    std::vector<double> costs(N);
    for (int i = 0; i < N; ++i) costs[i] = spec.stage_cost(k, i, true_types[i], x, u);

    const Vector w = noise->sample(k, rng);
    const Vector x_next = step_dynamics(spec, k, x, u, true_types, w);

    table = update_table(table, spec, *noise, k, x, x_next, base_sol, &u, &mask);

    traj.actions.push_back(std::move(u));
    traj.noises.push_back(w);
    traj.stage_costs.push_back(std::move(costs));
    traj.states.push_back(x_next);
    traj.beliefs.push_back(table);
    x = x_next;
  }

  std::vector<double> terminal(N);
  for (int i = 0; i < N; ++i) terminal[i] = spec.terminal_cost(i, true_types[i], x);
  traj.stage_costs.push_back(std::move(terminal));

  traj.cumulative_costs.resize(K + 1, std::vector<double>(N, 0.0));
  for (int k = 0; k <= K; ++k)
    for (int i = 0; i < N; ++i)
      traj.cumulative_costs[k][i] =
          (k > 0 ? traj.cumulative_costs[k - 1][i] : 0.0) + traj.stage_costs[k][i];
  return traj;
}

McStatistic summarize(const std::vector<double>& samples) {
  McStatistic s;
  const std::size_t n = samples.size();
  if (n == 0) return s;
  double sum = 0.0;
  for (double v : samples) sum += v;
  s.mean = sum / static_cast<double>(n);
  if (n > 1) {
    double ss = 0.0;
    for (double v : samples) ss += (v - s.mean) * (v - s.mean);
    s.variance = ss / static_cast<double>(n - 1);
    s.std_error = std::sqrt(s.variance / static_cast<double>(n));
  }
  return s;
}

void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  if (n <= 0) return;
  threads = std::max(1, std::min(threads, n));
  if (threads == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::mutex mu;
  int err_index = n;
  std::exception_ptr err;
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      while (true) {
        const int i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          // Keep draining; report the lowest failing index so the choice of
          // worker count never changes which error surfaces.
          std::lock_guard<std::mutex> lock(mu);
          if (i < err_index) {
            err_index = i;
            err = std::current_exception();
          }
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
}

MonteCarloResult monte_carlo(const GameSpec& spec, const JointType& true_types, const Vector& x0,
                             const BeliefTable& initial_beliefs, const EpisodeOptions& options,
                             int n_reps, std::uint64_t base_seed, std::uint64_t cell,
                             int threads) {
  if (n_reps < 0) throw ConfigError("monte_carlo: negative replication count");
  MonteCarloResult result;
  result.trajectories.resize(n_reps);
  parallel_for(n_reps, threads, [&](int rep) {
    const std::uint64_t seed = derive_seed(base_seed, cell, static_cast<std::uint64_t>(rep));
    try {
      result.trajectories[rep] =
          run_episode(spec, true_types, x0, initial_beliefs, options, seed);
    } catch (const SolverError& e) {
      std::ostringstream os;
      os << "replication " << rep << " (seed " << seed << "): " << e.what();
      throw SolverError(os.str(), e.stage);
    }
  });
  const int N = spec.num_players;
  result.final_costs.resize(n_reps, std::vector<double>(N, 0.0));
  for (int rep = 0; rep < n_reps; ++rep)
    for (int i = 0; i < N; ++i)
      result.final_costs[rep][i] = result.trajectories[rep].final_cost(i);
  result.final_cost_stats.resize(N);
  for (int i = 0; i < N; ++i) {
    std::vector<double> samples(n_reps);
    for (int rep = 0; rep < n_reps; ++rep) samples[rep] = result.final_costs[rep][i];
    result.final_cost_stats[i] = summarize(samples);
  }
  return result;
}

}  // namespace lqdg
