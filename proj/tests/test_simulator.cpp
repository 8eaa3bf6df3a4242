// Episode-simulation unit tests: shape and accounting invariants, bitwise
// determinism, replan schedules, belief-update reproduction, per-player
// policies, Monte Carlo batching, and the parallel work-sharing helper.

#include <atomic>
#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "lqdg/metrics.hpp"
#include "lqdg/riccati.hpp"
#include "lqdg/scenario.hpp"
#include "lqdg/simulator.hpp"
#include "oracles.hpp"

using namespace lqdg;

namespace {

bool same_trajectory(const Trajectory& a, const Trajectory& b) {
  if (a.states.size() != b.states.size()) return false;
  for (std::size_t k = 0; k < a.states.size(); ++k)
    if ((a.states[k].array() != b.states[k].array()).any()) return false;
  for (std::size_t k = 0; k < a.actions.size(); ++k)
    for (std::size_t i = 0; i < a.actions[k].size(); ++i)
      if ((a.actions[k][i].array() != b.actions[k][i].array()).any()) return false;
  for (std::size_t k = 0; k < a.beliefs.size(); ++k)
    if (!(a.beliefs[k] == b.beliefs[k])) return false;
  return true;
}

}  // namespace

TEST_CASE("episode shapes, accounting, and dynamics consistency") {
  std::mt19937_64 rng(41);
  GameSpec spec = oracle::random_spec(rng, {2, 2}, 3, {1, 2}, 6, true);
  BeliefTable table = oracle::random_beliefs(rng, spec.types);
  Vector x0 = Vector::Random(3);
  JointType truth{1, 0};
  EpisodeOptions opt;
  opt.level = 2;

  Trajectory traj = run_episode(spec, truth, x0, table, opt, 123);
  const int K = spec.horizon;
  REQUIRE(static_cast<int>(traj.states.size()) == K + 1);
  REQUIRE(static_cast<int>(traj.actions.size()) == K);
  REQUIRE(static_cast<int>(traj.noises.size()) == K);
  REQUIRE(static_cast<int>(traj.beliefs.size()) == K + 1);
  REQUIRE(static_cast<int>(traj.stage_costs.size()) == K + 1);
  REQUIRE(static_cast<int>(traj.cumulative_costs.size()) == K + 1);
  CHECK(traj.seed == 123);
  CHECK(traj.true_types == truth);
  CHECK((traj.states[0].array() == x0.array()).all());
  CHECK(traj.replan_stages == std::vector<int>{0, 2, 4});

  for (int k = 0; k < K; ++k) {
    Vector next = step_dynamics(spec, k, traj.states[k], traj.actions[k], truth, traj.noises[k]);
    CHECK((next.array() == traj.states[k + 1].array()).all());
    for (int i = 0; i < 2; ++i) {
      double want = spec.stage_cost(k, i, truth[i], traj.states[k], traj.actions[k]);
      CHECK(traj.stage_costs[k][i] == want);
    }
  }
  for (int i = 0; i < 2; ++i) {
    CHECK(traj.stage_costs[K][i] == spec.terminal_cost(i, truth[i], traj.states[K]));
    double run = 0.0;
    for (int k = 0; k <= K; ++k) {
      run += traj.stage_costs[k][i];
      CHECK(traj.cumulative_costs[k][i] == doctest::Approx(run).epsilon(1e-14));
    }
    CHECK(traj.final_cost(i) == traj.cumulative_costs[K][i]);
  }
}

TEST_CASE("episodes are bitwise deterministic in the seed") {
  std::mt19937_64 rng(43);
  GameSpec spec = oracle::random_spec(rng, {2, 2}, 2, {1, 1}, 5, true);
  BeliefTable table = oracle::random_beliefs(rng, spec.types);
  Vector x0 = Vector::Random(2);
  EpisodeOptions opt;

  Trajectory a = run_episode(spec, {0, 1}, x0, table, opt, 999);
  Trajectory b = run_episode(spec, {0, 1}, x0, table, opt, 999);
  Trajectory c = run_episode(spec, {0, 1}, x0, table, opt, 1000);
  CHECK(same_trajectory(a, b));
  CHECK(!same_trajectory(a, c));
}

TEST_CASE("replan schedule and frozen-pass actions within a block") {
  std::mt19937_64 rng(47);
  GameSpec spec = oracle::random_spec(rng, {2, 2}, 2, {1, 1}, 6, true);
  BeliefTable table = oracle::random_beliefs(rng, spec.types);
  Vector x0 = Vector::Random(2);
  JointType truth{0, 1};

  SUBCASE("level K plans once and follows the frozen pass") {
    EpisodeOptions opt;
    opt.level = 6;
    Trajectory traj = run_episode(spec, truth, x0, table, opt, 7);
    CHECK(traj.replan_stages == std::vector<int>{0});

    RiccatiSolution sol = backward_pass(spec, table, 0);
    for (int k = 0; k < 6; ++k) {
      for (int i = 0; i < 2; ++i) {
        Vector want = equilibrium_action(sol, k, traj.states[k], i, truth[i]);
        CHECK((want.array() == traj.actions[k][i].array()).all());
      }
    }

    // belief rows evolve by the table update against the frozen pass
    auto noise = make_gaussian_noise(spec);
    BeliefTable beliefs = table;
    for (int k = 0; k < 6; ++k) {
      beliefs = update_table(beliefs, spec, *noise, k, traj.states[k], traj.states[k + 1], sol,
                             &traj.actions[k]);
      CHECK(beliefs == traj.beliefs[k + 1]);
    }
  }

  SUBCASE("level 2 replans on the block boundaries with the live table") {
    EpisodeOptions opt;
    opt.level = 2;
    Trajectory traj = run_episode(spec, truth, x0, table, opt, 7);
    CHECK(traj.replan_stages == std::vector<int>{0, 2, 4});

    // stage 3's action comes from the pass planned at stage 2 with beliefs[2]
    RiccatiSolution block = backward_pass(spec, traj.beliefs[2], 2);
    for (int i = 0; i < 2; ++i) {
      Vector want = equilibrium_action(block, 3, traj.states[3], i, truth[i]);
      CHECK((want.array() == traj.actions[3][i].array()).all());
    }
  }

  SUBCASE("level 0 replans every stage") {
    EpisodeOptions opt;
    opt.level = 0;
    Trajectory traj = run_episode(spec, truth, x0, table, opt, 7);
    CHECK(traj.replan_stages == std::vector<int>{0, 1, 2, 3, 4, 5});
    RiccatiSolution pass4 = backward_pass(spec, traj.beliefs[4], 4);
    for (int i = 0; i < 2; ++i) {
      Vector want = equilibrium_action(pass4, 4, traj.states[4], i, truth[i]);
      CHECK((want.array() == traj.actions[4][i].array()).all());
    }
  }
}

TEST_CASE("complete-information policy plays the privately degenerated pass") {
  std::mt19937_64 rng(53);
  GameSpec spec = oracle::random_spec(rng, {2, 2}, 2, {1, 1}, 4, true);
  BeliefTable table = oracle::random_beliefs(rng, spec.types);
  Vector x0 = Vector::Random(2);
  JointType truth{1, 1};

  EpisodeOptions opt;
  opt.level = 0;
  opt.policies = {PolicyKind{PolicyType::kCompleteInfo}, PolicyKind{}};
  Trajectory traj = run_episode(spec, truth, x0, table, opt, 71);

  for (int k = 0; k < 4; ++k) {
    BeliefTable priv = traj.beliefs[k];
    priv.make_complete_info(spec.types, 0, truth);
    RiccatiSolution sol = backward_pass(spec, priv, k);
    Vector want = equilibrium_action(sol, k, traj.states[k], 0, truth[0]);
    CHECK((want.array() == traj.actions[k][0].array()).all());

    // the level-t player still plays from the shared public pass
    RiccatiSolution pub = backward_pass(spec, traj.beliefs[k], k);
    Vector want1 = equilibrium_action(pub, k, traj.states[k], 1, truth[1]);
    CHECK((want1.array() == traj.actions[k][1].array()).all());
  }
}

TEST_CASE("direct-following pursuer lands on the evader's position pre-noise") {
  auto params = default_params();
  auto spec = build_pursuit_evasion(params);
  BeliefTable table = BeliefTable::Uniform(spec.types);
  EpisodeOptions opt;
  opt.policies = {PolicyKind{PolicyType::kDirectFollowing}, PolicyKind{}};
  Trajectory traj = run_episode(spec, {kTypeH, kTypeB}, initial_state(params), table, opt, 5);

  for (int k = 0; k < 3; ++k) {
    Vector predicted = traj.states[k + 1] - traj.noises[k];
    // pursuer block of the pre-noise next state equals the evader's current position
    CHECK((pursuer_position(predicted) - evader_position(traj.states[k])).norm() <= 1e-12);
  }
}

TEST_CASE("conservative pursuer idles, then switches on revelation") {
  auto params = default_params();
  auto spec = build_pursuit_evasion(params);
  BeliefTable table = BeliefTable::Uniform(spec.types);
  Vector x0 = initial_state(params);

  SUBCASE("threshold 1 switches immediately") {
    EpisodeOptions opt;
    opt.policies = {PolicyKind{PolicyType::kConservative, 1.0}, PolicyKind{}};
    Trajectory traj = run_episode(spec, {kTypeH, kTypeB}, x0, table, opt, 3);
    CHECK(traj.conservative_switch[0] == 0);
    CHECK(traj.actions[0][0].norm() > 0.0);
  }

  SUBCASE("indistinguishable opponent types never trigger the switch") {
    // collapse the evader's type variation: identical hypotheses leave the
    // pursuer's row at exactly [0.5, 0.5], which can never concentrate
    std::mt19937_64 rng(67);
    GameSpec flat = oracle::random_spec(rng, {1, 2}, 2, {1, 1}, 8, true);
    flat.A = StagedTable<Matrix>::Constant(flat.dyn_A(0, {0, 0}));
    flat.B[1] = StagedTable<Matrix>::Constant(flat.dyn_B(0, 1, 0));
    flat.D[1] = StagedTable<Matrix>::Constant(flat.cost_D(0, 1, 0));
    flat.F[1][0] = StagedTable<Matrix>::PerStage(
        {flat.cost_F(0, 1, 0, 0), flat.cost_F(0, 1, 0, 0), flat.cost_F(0, 1, 0, 0),
         flat.cost_F(0, 1, 0, 0), flat.cost_F(0, 1, 0, 0), flat.cost_F(0, 1, 0, 0),
         flat.cost_F(0, 1, 0, 0), flat.cost_F(0, 1, 0, 0), Matrix::Zero(1, 1)});
    flat.F[1][1] = StagedTable<Matrix>::PerStage(
        {flat.cost_F(0, 1, 1, 0), flat.cost_F(0, 1, 1, 0), flat.cost_F(0, 1, 1, 0),
         flat.cost_F(0, 1, 1, 0), flat.cost_F(0, 1, 1, 0), flat.cost_F(0, 1, 1, 0),
         flat.cost_F(0, 1, 1, 0), flat.cost_F(0, 1, 1, 0), Matrix::Zero(1, 1)});
    flat.x_ref[1] = StagedTable<Vector>::Constant(flat.ref_x(0, 1, 0));
    flat.f_ref[1] = StagedTable<double>::Constant(flat.ref_f(0, 1, 0));
    REQUIRE(validate_spec(flat).valid());

    EpisodeOptions opt;
    opt.policies = {PolicyKind{PolicyType::kConservative, 0.3}, PolicyKind{}};
    Trajectory traj = run_episode(flat, {0, 1}, Vector::Zero(2),
                                  BeliefTable::Uniform(flat.types), opt, 3);
    CHECK(traj.conservative_switch[0] == -1);
    for (int k = 0; k < flat.horizon; ++k) CHECK(traj.actions[k][0].norm() == 0.0);
  }

  SUBCASE("post-switch actions follow the MAP-degenerated pass") {
    EpisodeOptions opt;
    opt.policies = {PolicyKind{PolicyType::kConservative, 0.4}, PolicyKind{}};
    Trajectory traj = run_episode(spec, {kTypeH, kTypeB}, x0, table, opt, 11);
    int sw = traj.conservative_switch[0];
    REQUIRE(sw > 0);  // uniform start (mismatch 0.5) cannot switch at stage 0

    for (int k = 0; k < sw; ++k) CHECK(traj.actions[k][0].norm() == 0.0);

    // at the switch stage: degenerate at the MAP profile of the current row
    const Vector& row = traj.beliefs[sw].row(kPursuer, kTypeH);
    int map_idx = 0;
    row.maxCoeff(&map_idx);
    BeliefTable priv = traj.beliefs[sw];
    priv.make_complete_info(spec.types, kPursuer,
                            spec.types.compose(kPursuer, kTypeH, map_idx));
    RiccatiSolution sol = backward_pass(spec, priv, sw);
    Vector want = equilibrium_action(sol, sw, traj.states[sw], kPursuer, kTypeH);
    CHECK((want.array() == traj.actions[sw][kPursuer].array()).all());
  }
}

TEST_CASE("episode input validation") {
  std::mt19937_64 rng(59);
  GameSpec spec = oracle::random_spec(rng, {2, 2}, 2, {1, 1}, 4, false);
  BeliefTable table = BeliefTable::Uniform(spec.types);
  Vector x0 = Vector::Zero(2);
  EpisodeOptions opt;

  CHECK_THROWS_AS(run_episode(spec, {0}, x0, table, opt, 1), ConfigError);
  CHECK_THROWS_AS(run_episode(spec, {0, 5}, x0, table, opt, 1), ConfigError);
  CHECK_THROWS_AS(run_episode(spec, {0, 0}, Vector::Zero(3), table, opt, 1), ConfigError);
  EpisodeOptions bad_level;
  bad_level.level = 7;
  CHECK_THROWS_AS(run_episode(spec, {0, 0}, x0, table, bad_level, 1), ConfigError);
  EpisodeOptions bad_policies;
  bad_policies.policies = {PolicyKind{}};
  CHECK_THROWS_AS(run_episode(spec, {0, 0}, x0, table, bad_policies, 1), ConfigError);
}

TEST_CASE("monte carlo batches are worker-count invariant") {
  std::mt19937_64 rng(61);
  GameSpec spec = oracle::random_spec(rng, {2, 2}, 2, {1, 1}, 5, true);
  BeliefTable table = oracle::random_beliefs(rng, spec.types);
  Vector x0 = Vector::Random(2);
  EpisodeOptions opt;

  MonteCarloResult serial = monte_carlo(spec, {0, 1}, x0, table, opt, 12, 555, 3, 1);
  MonteCarloResult wide = monte_carlo(spec, {0, 1}, x0, table, opt, 12, 555, 3, 4);
  REQUIRE(serial.trajectories.size() == 12);
  REQUIRE(wide.trajectories.size() == 12);
  for (int r = 0; r < 12; ++r) {
    CHECK(serial.trajectories[r].seed == derive_seed(555, 3, r));
    CHECK(same_trajectory(serial.trajectories[r], wide.trajectories[r]));
    for (int i = 0; i < 2; ++i) CHECK(serial.final_costs[r][i] == wide.final_costs[r][i]);
  }
  for (int i = 0; i < 2; ++i) {
    CHECK(serial.final_cost_stats[i].mean == wide.final_cost_stats[i].mean);
    CHECK(serial.final_cost_stats[i].variance == wide.final_cost_stats[i].variance);
  }
}

TEST_CASE("monte carlo reports the failing replication") {
  // player 0's control cost turns indefinite -> every episode fails
  GameSpec spec;
  spec.num_players = 1;
  spec.horizon = 2;
  spec.state_dim = 1;
  spec.control_dims = {1};
  spec.types = TypeSpace({{"t"}});
  auto m1 = [](double v) { return Matrix::Constant(1, 1, v); };
  spec.A = StagedTable<Matrix>::Constant(m1(1.0));
  spec.B = {StagedTable<Matrix>::Constant(m1(1.0))};
  spec.D = {StagedTable<Matrix>::Constant(m1(1.0))};
  spec.F.resize(1);
  spec.F[0] = {StagedTable<Matrix>::PerStage({m1(-9.0), m1(-9.0), m1(0.0)})};
  spec.x_ref = {StagedTable<Vector>::Constant(Vector::Zero(1))};
  spec.f_ref = {StagedTable<double>::Constant(0.0)};
  spec.Q = StagedTable<Matrix>::Constant(m1(0.01));
  REQUIRE(validate_spec(spec).valid());

  BeliefTable table = BeliefTable::Uniform(spec.types);
  EpisodeOptions opt;
  try {
    monte_carlo(spec, {0}, Vector::Zero(1), table, opt, 4, 1, 0, 2);
    FAIL("expected SolverError");
  } catch (const SolverError& e) {
    CHECK(std::string(e.what()).find("replication") != std::string::npos);
  }
}

TEST_CASE("summarize computes unbiased statistics") {
  McStatistic s = summarize({1.0, 2.0, 3.0, 4.0});
  CHECK(s.mean == doctest::Approx(2.5).epsilon(1e-15));
  CHECK(s.variance == doctest::Approx(5.0 / 3.0).epsilon(1e-13));
  CHECK(s.std_error == doctest::Approx(std::sqrt(5.0 / 3.0 / 4.0)).epsilon(1e-13));

  McStatistic single = summarize({7.0});
  CHECK(single.mean == 7.0);
  CHECK(single.variance == 0.0);
  CHECK(single.std_error == 0.0);
}

TEST_CASE("parallel_for runs every index exactly once and rethrows") {
  std::vector<std::atomic<int>> hits(100);
  parallel_for(100, 4, [&](int i) { hits[i].fetch_add(1); });
  for (auto& h : hits) CHECK(h.load() == 1);

  parallel_for(0, 4, [&](int) { FAIL("no work expected"); });

  try {
    parallel_for(50, 4, [&](int i) {
      if (i % 10 == 3) throw std::runtime_error("boom " + std::to_string(i));
    });
    FAIL("expected rethrow");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("boom") != std::string::npos);
  }
}
