// Bayesian type beliefs.  Each player i, for each of their own possible
// types theta_i, maintains a probability vector over the joint types of the
// other players.  Observing a public state transition x^k -> x^{k+1} updates
// every row by Bayes' rule with the process-noise density as likelihood:
//
//   l^{k+1}(theta_-i) ~ l^k(theta_-i) * d_w(x^{k+1} - f^k(x^k, u^k, theta))
//
// where the candidate actions u^k come from hypothesized equilibrium play.
// Updates run in log space with max subtraction; probabilities are never
// floored, and exact 0/1 entries are absorbing.

#ifndef LQDG_BELIEF_HPP
#define LQDG_BELIEF_HPP

#include <functional>
#include <span>
#include <vector>

#include "lqdg/game_spec.hpp"
#include "lqdg/types.hpp"

namespace lqdg {

class BeliefTable {
 public:
  BeliefTable() = default;

  // All rows uniform over the opponent profiles.
  static BeliefTable Uniform(const TypeSpace& types);

  const Vector& row(int player, int own_type) const { return rows_[player][own_type]; }
  void set_row(int player, int own_type, Vector row);

  int num_players() const { return static_cast<int>(rows_.size()); }
  int num_own_types(int player) const { return static_cast<int>(rows_[player].size()); }

  // Marginal over the types of player `other` held by (player, own_type).
  Vector marginal(const TypeSpace& types, int player, int own_type, int other) const;

  // True iff the row places all mass on a single opponent profile.
  bool row_degenerate(int player, int own_type) const;

  // Degenerates every row of `player` onto the opponents' true types:
  // complete information for that player.
  void make_complete_info(const TypeSpace& types, int player, const JointType& truth);

  bool operator==(const BeliefTable& other) const {
    if (rows_.size() != other.rows_.size()) return false;
    for (std::size_t i = 0; i < rows_.size(); ++i) {
      if (rows_[i].size() != other.rows_[i].size()) return false;
      for (std::size_t t = 0; t < rows_[i].size(); ++t)
        if (rows_[i][t] != other.rows_[i][t]) return false;
    }
    return true;
  }

 private:
  std::vector<std::vector<Vector>> rows_;  // [player][own_type] -> prob over opponent profiles
};

// Log-likelihood of each candidate opponent profile for one observer row.
struct LikelihoodProfile {
  std::vector<double> log_values;  // indexed by opponent-profile flat index
  // Densities (exp of log_values); strictly positive for full-support noise.
  std::vector<double> values() const;
};

// Joint action hypothesis: returns each player's action under the given
// joint type profile.
using ActionHypothesis = std::function<std::vector<Vector>(const JointType&)>;

// Evaluates the transition likelihood of x_next from x at stage k for
// observer (player, own_type), for every candidate opponent profile.
LikelihoodProfile likelihood(const GameSpec& spec, const NoiseModel& noise, int k,
                             const Vector& x, const Vector& x_next,
                             const ActionHypothesis& actions, int player, int own_type);

// One Bayes step: posterior ~ prior * exp(loglik), computed with
// max subtraction over the prior's support.  Exact 0/1 priors short-circuit
// (absorbing complete information).  Throws SolverError if all supported
// candidates have zero effective mass.
Vector bayes_update(const Vector& prior, const LikelihoodProfile& lik);

// Closed form for the two-type scalar recursion: belief in the true type
// after applying likelihood ratios e^0..e^{k} (wrong-type density over
// true-type density) to prior b0:
//   b^{k+1} = 1 / (1 + (1/b0 - 1) * prod_k e^k).
double closed_form_belief(double b0, std::span<const double> ratios);

struct RiccatiSolution;  // riccati.hpp

// Applies one Bayes step to every row of the table, hypothesizing that each
// candidate joint type plays the equilibrium actions given by `solution`'s
// stage-k gains evaluated at x.  When `realized_actions` is supplied, each
// observer substitutes their own realized action for their own hypothesis
// (players know what they actually played).  `update_mask`, when supplied,
// freezes the rows of players whose entry is false.
BeliefTable update_table(const BeliefTable& table, const GameSpec& spec, const NoiseModel& noise,
                         int k, const Vector& x, const Vector& x_next,
                         const RiccatiSolution& solution,
                         const std::vector<Vector>* realized_actions = nullptr,
                         const std::vector<bool>* update_mask = nullptr);

}  // namespace lqdg

#endif  // LQDG_BELIEF_HPP
