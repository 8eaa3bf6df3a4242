#include "lqdg/belief.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lqdg/riccati.hpp"

namespace lqdg {

BeliefTable BeliefTable::Uniform(const TypeSpace& types) {
  BeliefTable table;
  table.rows_.resize(types.num_players());
  for (int i = 0; i < types.num_players(); ++i) {
    const int opp = types.num_opponent(i);
    table.rows_[i].assign(types.num_types(i), Vector::Constant(opp, 1.0 / opp));
  }
  return table;
}

void BeliefTable::set_row(int player, int own_type, Vector row) {
  if (static_cast<int>(rows_.size()) <= player) rows_.resize(player + 1);
  if (static_cast<int>(rows_[player].size()) <= own_type) rows_[player].resize(own_type + 1);
  rows_[player][own_type] = std::move(row);
}

Vector BeliefTable::marginal(const TypeSpace& types, int player, int own_type, int other) const {
  Vector m = Vector::Zero(types.num_types(other));
  const Vector& r = rows_[player][own_type];
  for (int opp = 0; opp < r.size(); ++opp)
    m(types.opponent_component(player, opp, other)) += r(opp);
  return m;
}

bool BeliefTable::row_degenerate(int player, int own_type) const {
  const Vector& r = rows_[player][own_type];
  for (int i = 0; i < r.size(); ++i)
    if (r(i) != 0.0 && r(i) != 1.0) return false;
  return true;
}

void BeliefTable::make_complete_info(const TypeSpace& types, int player, const JointType& truth) {
  const int target = types.flatten_opponent(player, truth);
  for (int t = 0; t < types.num_types(player); ++t) {
    Vector row = Vector::Zero(types.num_opponent(player));
    row(target) = 1.0;
    rows_[player][t] = std::move(row);
  }
}

std::vector<double> LikelihoodProfile::values() const {
  std::vector<double> v(log_values.size());
  std::transform(log_values.begin(), log_values.end(), v.begin(),
                 [](double l) { return std::exp(l); });
  return v;
}

LikelihoodProfile likelihood(const GameSpec& spec, const NoiseModel& noise, int k,
                             const Vector& x, const Vector& x_next,
                             const ActionHypothesis& actions, int player, int own_type) {
  const int num_opp = spec.types.num_opponent(player);
  LikelihoodProfile profile;
  profile.log_values.resize(num_opp);
  for (int opp = 0; opp < num_opp; ++opp) {
    const JointType joint = spec.types.compose(player, own_type, opp);
    const std::vector<Vector> u = actions(joint);
    Vector predicted = spec.dyn_A(k, joint) * x;
    for (int j = 0; j < spec.num_players; ++j) predicted += spec.dyn_B(k, j, joint[j]) * u[j];
    profile.log_values[opp] = noise.log_density(k, x_next - predicted);
  }
  return profile;
}

Vector bayes_update(const Vector& prior, const LikelihoodProfile& lik) {
  // Degenerate priors are absorbing: complete information never erodes.
  bool degenerate = true;
  for (int i = 0; i < prior.size(); ++i)
    if (prior(i) != 0.0 && prior(i) != 1.0) {
      degenerate = false;
      break;
    }
  if (degenerate) return prior;

  // Max subtraction over the prior's support keeps the largest supported
  // term at exp(0); zero-prior candidates stay exactly zero.
  double max_log = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < prior.size(); ++i)
    if (prior(i) > 0.0) max_log = std::max(max_log, lik.log_values[i]);
  if (!std::isfinite(max_log))
    throw SolverError("bayes_update: all supported candidates have zero likelihood", -1);

  Vector posterior(prior.size());
  double total = 0.0;
  for (int i = 0; i < prior.size(); ++i) {
    posterior(i) = prior(i) > 0.0 ? prior(i) * std::exp(lik.log_values[i] - max_log) : 0.0;
    total += posterior(i);
  }
  if (!(total > 0.0) || !std::isfinite(total))
    throw SolverError("bayes_update: posterior has no effective mass", -1);
  posterior /= total;
  return posterior;
}

double closed_form_belief(double b0, std::span<const double> ratios) {
  double product = 1.0;
  for (double e : ratios) product *= e;
  return 1.0 / (1.0 + (1.0 / b0 - 1.0) * product);
}

BeliefTable update_table(const BeliefTable& table, const GameSpec& spec, const NoiseModel& noise,
                         int k, const Vector& x, const Vector& x_next,
                         const RiccatiSolution& solution,
                         const std::vector<Vector>* realized_actions,
                         const std::vector<bool>* update_mask) {
  BeliefTable next = table;
  for (int i = 0; i < spec.num_players; ++i) {
    if (update_mask && !(*update_mask)[i]) continue;
    for (int t = 0; t < spec.types.num_types(i); ++t) {
      const Vector& prior = table.row(i, t);
      if (table.row_degenerate(i, t)) continue;  // absorbing; skip the likelihood work
      // Candidates hypothesize equilibrium play; the observer's own action is
      // the realized one when available (players know what they played).
      ActionHypothesis hyp = [&](const JointType& joint) {
        std::vector<Vector> u(spec.num_players);
        for (int j = 0; j < spec.num_players; ++j) {
          if (realized_actions && j == i)
            u[j] = (*realized_actions)[j];
          else
            u[j] = equilibrium_action(solution, k, x, j, joint[j]);
        }
        return u;
      };
      const LikelihoodProfile lik = likelihood(spec, noise, k, x, x_next, hyp, i, t);
      next.set_row(i, t, bayes_update(prior, lik));
    }
  }
  return next;
}

}  // namespace lqdg
