#include "lqdg/types.hpp"

#include <stdexcept>

namespace lqdg {

TypeSpace::TypeSpace(std::vector<std::vector<std::string>> labels) : labels_(std::move(labels)) {
  for (const auto& set : labels_)
    if (set.empty()) throw std::invalid_argument("TypeSpace: empty type set");
}

int TypeSpace::type_index(int player, const std::string& label) const {
  const auto& set = labels_[player];
  for (int t = 0; t < static_cast<int>(set.size()); ++t)
    if (set[t] == label) return t;
  throw std::invalid_argument("TypeSpace: unknown type label '" + label + "' for player " +
                              std::to_string(player));
}

int TypeSpace::num_joint() const {
  int total = 1;
  for (int i = 0; i < num_players(); ++i) total *= num_types(i);
  return total;
}

int TypeSpace::num_opponent(int player) const {
  int total = 1;
  for (int i = 0; i < num_players(); ++i)
    if (i != player) total *= num_types(i);
  return total;
}

int TypeSpace::flatten(const JointType& joint) const {
  int flat = 0;
  for (int i = 0; i < num_players(); ++i) flat = flat * num_types(i) + joint[i];
  return flat;
}

JointType TypeSpace::unflatten(int flat) const {
  JointType joint(num_players());
  for (int i = num_players() - 1; i >= 0; --i) {
    joint[i] = flat % num_types(i);
    flat /= num_types(i);
  }
  return joint;
}

int TypeSpace::flatten_opponent(int player, const JointType& joint) const {
  int flat = 0;
  for (int i = 0; i < num_players(); ++i) {
    if (i == player) continue;
    flat = flat * num_types(i) + joint[i];
  }
  return flat;
}

JointType TypeSpace::compose(int player, int own_type, int opponent_index) const {
  JointType joint(num_players());
  joint[player] = own_type;
  for (int i = num_players() - 1; i >= 0; --i) {
    if (i == player) continue;
    joint[i] = opponent_index % num_types(i);
    opponent_index /= num_types(i);
  }
  return joint;
}

int TypeSpace::opponent_component(int player, int opponent_index, int other) const {
  return compose(player, 0, opponent_index)[other];
}

namespace {
// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}
}  // namespace

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t cell, std::uint64_t replication) {
  std::uint64_t h = mix64(base);
  h = mix64(h ^ (cell + 0x51'7c'c1'b7'27'22'0a'95ULL));
  h = mix64(h ^ replication);
  return h;
}

}  // namespace lqdg
