// Deception metrics computed from simulated trajectories: truth-revealing
// stages, deceivability verdicts, price of deception, and endpoint
// reachability/capturability estimates.

#ifndef LQDG_METRICS_HPP
#define LQDG_METRICS_HPP

#include <cstdint>
#include <vector>

#include "lqdg/simulator.hpp"
#include "lqdg/types.hpp"

namespace lqdg {

// Belief in the true type of `subject` held by `observer` (at the observer's
// true own type), one entry per stage 0..K.
std::vector<double> true_type_belief_sequence(const Trajectory& traj, const TypeSpace& types,
                                              int observer, int subject);

// First stage k such that 1 - b^kbar <= delta for every kbar >= k (stages are
// 0-based; 0 is allowed when the initial belief already satisfies the bound).
// Returns K+1 when the bound never holds persistently.  delta must lie in
// (0, 1]; transient dips below the threshold postpone the stage.
int truth_revealing_stage(const std::vector<double>& true_type_beliefs, double delta);

struct DeceivabilityResult {
  bool deceivable = false;        // Pr(k_tr < k_tilde) <= epsilon for every group
  double max_probability = 0.0;   // worst group estimate
  std::vector<double> per_group;  // Pr(k_tr < k_tilde) per initial-belief group
};

// Estimates Pr(k_tr < k_tilde) per sample group (one group per swept initial
// belief) and quantifies over the groups: the deceiver is k_tilde-deceivable
// at level epsilon iff the estimate stays <= epsilon for all of them.
DeceivabilityResult deceivability(const std::vector<std::vector<int>>& ktr_groups, int k_tilde,
                                  double epsilon);

// Price of deception:
//   p_d = (sum_i eta_i Vhat_i + eta0) / (sum_i eta_i Vbar_i + eta0)
// where Vhat are complete-information cumulative costs and Vbar the realized
// hidden-type ones.  Requires eta0 > 0, eta_i in [0,1], sum eta_i = 1.
double price_of_deception(const std::vector<double>& v_complete,
                          const std::vector<double>& v_hidden, double eta0,
                          const std::vector<double>& eta);

struct ReachCaptureResult {
  bool reachable = false;    // Pr(evader final distance >= threshold) <= epsilon
  bool capturable = false;   // Pr(pursuer final distance >= threshold) <= epsilon
  double p_evader_far = 0.0;
  double p_pursuer_far = 0.0;
};

// Empirical verdicts from per-replication endpoint distances: the evader's
// distance to their true target (reachability) and the pursuer's distance to
// the evader (capturability).
ReachCaptureResult reach_capture(const std::vector<double>& evader_final_distances,
                                 const std::vector<double>& pursuer_final_distances,
                                 double threshold, double epsilon);

// Mean per-player cumulative cost over episodes in which every player has
// complete information (all belief rows degenerate at the true types).
// Seeds are used one episode each, pairing with hidden-type runs.
std::vector<double> complete_info_baseline(const GameSpec& spec, const JointType& true_types,
                                           const Vector& x0, const EpisodeOptions& options,
                                           const std::vector<std::uint64_t>& seeds);

}  // namespace lqdg

#endif  // LQDG_METRICS_HPP
