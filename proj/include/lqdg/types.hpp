// Core value types shared across the library: dense matrix aliases, the
// indexing scheme for joint player types, stage/type-broadcast storage for
// stage-varying game data, and the solver error hierarchy.

#ifndef LQDG_TYPES_HPP
#define LQDG_TYPES_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace lqdg {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// One type label index per player, e.g. {1, 0} = player 0 has type 1,
// player 1 has type 0.
using JointType = std::vector<int>;

// Enumerates joint type profiles and the opponent-profile subspaces used by
// beliefs.  Flat indices are mixed-radix with the *last* player varying
// fastest; opponent profiles for player i enumerate the remaining players in
// increasing player order, again last-fastest.  All modules must share this
// ordering, so it lives here.
class TypeSpace {
 public:
  TypeSpace() = default;
  explicit TypeSpace(std::vector<std::vector<std::string>> labels);

  int num_players() const { return static_cast<int>(labels_.size()); }
  int num_types(int player) const { return static_cast<int>(labels_[player].size()); }
  const std::string& label(int player, int type) const { return labels_[player][type]; }
  const std::vector<std::string>& labels(int player) const { return labels_[player]; }

  // Index of a label within a player's type set; throws if unknown.
  int type_index(int player, const std::string& label) const;

  // Product of all players' type counts.
  int num_joint() const;
  // Product of type counts over players other than `player`.
  int num_opponent(int player) const;

  int flatten(const JointType& joint) const;
  JointType unflatten(int flat) const;

  // Flat index of the opponent profile (types of everyone but `player`)
  // embedded in a full joint profile.
  int flatten_opponent(int player, const JointType& joint) const;
  // Rebuild a full joint profile from (player, own type, opponent index).
  JointType compose(int player, int own_type, int opponent_index) const;
  // Type of player `other` inside an opponent profile of `player`.
  int opponent_component(int player, int opponent_index, int other) const;

 private:
  std::vector<std::vector<std::string>> labels_;
};

// Storage for stage- and type-indexed game data with broadcast semantics:
// either axis may be collapsed to a single stored value when the data does
// not vary along it.  `variant` is the joint-type index for shared data
// (e.g. A) and the own-type index for per-player data (e.g. B_i).
template <typename T>
class StagedTable {
 public:
  StagedTable() = default;

  static StagedTable Constant(T value) {
    StagedTable t;
    t.data_.push_back({std::move(value)});
    return t;
  }
  static StagedTable PerStage(std::vector<T> values) {
    StagedTable t;
    for (auto& v : values) t.data_.push_back({std::move(v)});
    return t;
  }
  static StagedTable PerVariant(std::vector<T> values) {
    StagedTable t;
    t.data_.push_back(std::move(values));
    return t;
  }
  // Full layout: data[stage][variant].
  static StagedTable Full(std::vector<std::vector<T>> values) {
    StagedTable t;
    t.data_ = std::move(values);
    return t;
  }

  bool empty() const { return data_.empty(); }
  bool stage_broadcast() const { return data_.size() == 1; }
  bool variant_broadcast() const {
    for (const auto& row : data_)
      if (row.size() != 1) return false;
    return true;
  }
  int stored_stages() const { return static_cast<int>(data_.size()); }
  int stored_variants() const { return data_.empty() ? 0 : static_cast<int>(data_[0].size()); }

  const T& at(int stage, int variant = 0) const {
    const auto& row = data_[data_.size() == 1 ? 0 : static_cast<std::size_t>(stage)];
    return row[row.size() == 1 ? 0 : static_cast<std::size_t>(variant)];
  }

  template <typename Fn>
  void for_each(Fn&& fn) {
    for (auto& row : data_)
      for (auto& v : row) fn(v);
  }
  template <typename Fn>
  void for_each(Fn&& fn) const {
    for (const auto& row : data_)
      for (const auto& v : row) fn(v);
  }

 private:
  std::vector<std::vector<T>> data_;  // [stage-or-0][variant-or-0]
};

// Raised when a stage subproblem violates an equilibrium existence
// condition.  `stage` is the 0-based stage index at which the backward
// recursion failed.
class SolverError : public std::runtime_error {
 public:
  SolverError(std::string what, int stage) : std::runtime_error(std::move(what)), stage(stage) {}
  int stage;
};

// R_i^k(theta_i) = F_ii^k + B_i' S_i^{k+1} B_i failed the positive
// definiteness test for some player/type at `stage`.
class NoEquilibriumError : public SolverError {
 public:
  NoEquilibriumError(std::string what, int stage, int player, int type, double min_eig,
                     double norm)
      : SolverError(std::move(what), stage),
        player(player),
        type(type),
        min_eig(min_eig),
        norm(norm) {}
  int player;
  int type;
  double min_eig;
  double norm;
};

// The stacked coupling matrix W0 at `stage` is numerically singular.
class SingularCouplingError : public SolverError {
 public:
  SingularCouplingError(std::string what, int stage, double rcond)
      : SolverError(std::move(what), stage), rcond(rcond) {}
  double rcond;
};

// Invalid experiment configuration (unknown keys, bad dimensions, missing
// required fields).  The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Deterministically mixes a base seed with stream identifiers (sweep cell,
// replication) so parallel runs draw from disjoint, order-independent
// streams.  SplitMix64 finalizer over the concatenated words.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t cell, std::uint64_t replication);

}  // namespace lqdg

#endif  // LQDG_TYPES_HPP
