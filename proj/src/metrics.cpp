#include "lqdg/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace lqdg {

std::vector<double> true_type_belief_sequence(const Trajectory& traj, const TypeSpace& types,
                                              int observer, int subject) {
  if (observer == subject) throw std::invalid_argument("observer and subject must differ");
  std::vector<double> out;
  out.reserve(traj.beliefs.size());
  const int own = traj.true_types[observer];
  const int target = traj.true_types[subject];
  for (const BeliefTable& table : traj.beliefs)
    out.push_back(table.marginal(types, observer, own, subject)(target));
  return out;
}

int truth_revealing_stage(const std::vector<double>& true_type_beliefs, double delta) {
  if (!(delta > 0.0) || delta > 1.0)
    throw std::invalid_argument("truth_revealing_stage: delta must lie in (0, 1]");
  if (true_type_beliefs.empty())
    throw std::invalid_argument("truth_revealing_stage: empty belief sequence");
  // Smallest k such that the bound holds at every stage >= k: one backward
  // scan for the last violation.
  int last_violation = -1;
  for (int k = static_cast<int>(true_type_beliefs.size()) - 1; k >= 0; --k) {
    if (1.0 - true_type_beliefs[k] > delta) {
      last_violation = k;
      break;
    }
  }
  return last_violation + 1;  // K+1 when the final stage still violates
}

DeceivabilityResult deceivability(const std::vector<std::vector<int>>& ktr_groups, int k_tilde,
                                  double epsilon) {
  if (ktr_groups.empty()) throw std::invalid_argument("deceivability: no sample groups");
  DeceivabilityResult res;
  res.deceivable = true;
  for (const auto& group : ktr_groups) {
    if (group.empty()) throw std::invalid_argument("deceivability: empty sample group");
    int early = 0;
    for (int ktr : group)
      if (ktr < k_tilde) ++early;
    const double p = static_cast<double>(early) / static_cast<double>(group.size());
    res.per_group.push_back(p);
    res.max_probability = std::max(res.max_probability, p);
    if (p > epsilon) res.deceivable = false;
  }
  return res;
}

double price_of_deception(const std::vector<double>& v_complete,
                          const std::vector<double>& v_hidden, double eta0,
                          const std::vector<double>& eta) {
  const std::size_t n = v_complete.size();
  if (n == 0 || v_hidden.size() != n)
    throw std::invalid_argument("price_of_deception: cost vectors must match and be non-empty");
  std::vector<double> w = eta;
  if (w.empty()) w.assign(n, 1.0 / static_cast<double>(n));
  if (w.size() != n) throw std::invalid_argument("price_of_deception: one weight per player");
  if (!(eta0 > 0.0)) throw std::invalid_argument("price_of_deception: eta0 must be positive");
  double total = 0.0;
  for (double wi : w) {
    if (wi < 0.0 || wi > 1.0)
      throw std::invalid_argument("price_of_deception: weights must lie in [0, 1]");
    total += wi;
  }
  if (std::abs(total - 1.0) > 1e-9)
    throw std::invalid_argument("price_of_deception: weights must sum to 1");
  double num = eta0;
  double den = eta0;
  for (std::size_t i = 0; i < n; ++i) {
    num += w[i] * v_complete[i];
    den += w[i] * v_hidden[i];
  }
  return num / den;
}

ReachCaptureResult reach_capture(const std::vector<double>& evader_final_distances,
                                 const std::vector<double>& pursuer_final_distances,
                                 double threshold, double epsilon) {
  if (evader_final_distances.empty() || pursuer_final_distances.empty())
    throw std::invalid_argument("reach_capture: empty distance samples");
  auto far_fraction = [threshold](const std::vector<double>& d) {
    int far = 0;
    for (double v : d)
      if (v >= threshold) ++far;
    return static_cast<double>(far) / static_cast<double>(d.size());
  };
  ReachCaptureResult res;
  res.p_evader_far = far_fraction(evader_final_distances);
  res.p_pursuer_far = far_fraction(pursuer_final_distances);
  res.reachable = res.p_evader_far <= epsilon;
  res.capturable = res.p_pursuer_far <= epsilon;
  return res;
}

std::vector<double> complete_info_baseline(const GameSpec& spec, const JointType& true_types,
                                           const Vector& x0, const EpisodeOptions& options,
                                           const std::vector<std::uint64_t>& seeds) {
  if (seeds.empty()) throw std::invalid_argument("complete_info_baseline: no seeds");
  BeliefTable table = BeliefTable::Uniform(spec.types);
  for (int i = 0; i < spec.num_players; ++i)
    table.make_complete_info(spec.types, i, true_types);
  EpisodeOptions opts = options;
  opts.policies.assign(spec.num_players, PolicyKind{});  // equilibrium play only
  opts.bayesian_update.clear();
  std::vector<double> mean(spec.num_players, 0.0);
  for (std::uint64_t seed : seeds) {
    const Trajectory traj = run_episode(spec, true_types, x0, table, opts, seed);
    for (int i = 0; i < spec.num_players; ++i) mean[i] += traj.final_cost(i);
  }
  for (double& v : mean) v /= static_cast<double>(seeds.size());
  return mean;
}

}  // namespace lqdg
