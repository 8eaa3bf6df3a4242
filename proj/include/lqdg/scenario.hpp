// Planar pursuit-evasion with deception.  State x = [p1; p2] stacks the
// pursuer's and evader's positions (n = 4), both players steer their own
// block with single-integrator dynamics (A = I).  The pursuer's type scales
// their maneuverability; the evader's type selects which of two landmark
// targets is real.  The evader's stage cost keeps the weights on both targets
// balanced until the terminal stage, where the weight on the fake target
// drops to zero (forced revelation), optionally plus a growing evasion bonus
// for distance from the pursuer (coupled variant).

#ifndef LQDG_SCENARIO_HPP
#define LQDG_SCENARIO_HPP

#include <array>

#include "lqdg/game_spec.hpp"
#include "lqdg/types.hpp"

namespace lqdg {

struct PursuitEvasionParams {
  int horizon = 40;  // K

  // Maneuverability: control gain per pursuer type (H, L) and for the evader.
  double b1_high = 0.66;
  double b1_low = 0.3;
  double b2 = 0.35;

  // Landmark targets: type g aims at target_g, type b at target_b.
  Eigen::Vector2d target_g{-4.0, 8.0};
  Eigen::Vector2d target_b{4.0, 8.0};

  Eigen::Vector2d pursuer_start{0.0, -4.0};
  Eigen::Vector2d evader_start{0.0, 0.0};

  // Evader trajectory weights for k < K: the true target carries d2_traj,
  // the fake target d2_traj * deception_ratio.  The ambiguity budget bounds
  // |d_true/d_fake - 1| <= epsilon0.
  double d2_traj = 0.05;
  double deception_ratio = 1.0;
  double epsilon0 = 0.0;
  // Terminal weight on the true target (the fake target's terminal weight is
  // zero: revelation).  Must dwarf d2_traj.
  double d2_terminal = 40.0;

  // Evasion coupling d21^k = alpha * k (0 = decoupled evader).
  double alpha = 0.0;

  // Pursuer proximity weight: zero before the terminal stage.
  double d12_terminal = 8.0;

  // Control effort weights (zero at the terminal stage).
  double f11 = 1.0;
  double f22 = 1.0;
  // Cross control couplings enter costs negatively (-f12 |u2|^2 for the
  // pursuer and vice versa).  Nonzero f21 breaks the evader's cost
  // decoupling.
  double f12 = 0.0;
  double f21 = 0.0;

  // Process noise: Q^k = noise_std^2 * I4 for k < K.
  double noise_std = 0.12;

  bool coupled() const { return alpha != 0.0 || f21 != 0.0; }
};

inline constexpr int kPursuer = 0;
inline constexpr int kEvader = 1;
// Pursuer type indices (player 0): H = 0, L = 1.  Evader (player 1):
// g = 0, b = 1.
inline constexpr int kTypeH = 0;
inline constexpr int kTypeL = 1;
inline constexpr int kTypeG = 0;
inline constexpr int kTypeB = 1;

// Assembles the full game spec (validated and canonicalized; throws
// ConfigError if the parameters violate the scenario invariants).
GameSpec build_pursuit_evasion(const PursuitEvasionParams& params);

// Canonical defaults; mirrored by configs/pursuit_evasion_default.yaml.
PursuitEvasionParams default_params();

// Scenario geometry helpers used by metrics and heuristics.
Eigen::Vector2d pursuer_position(const Vector& x);
Eigen::Vector2d evader_position(const Vector& x);
Eigen::Vector2d evader_target(const PursuitEvasionParams& params, int evader_type);
Vector initial_state(const PursuitEvasionParams& params);

// Distance from the evader's final position to their true target.
double evader_endpoint_distance(const PursuitEvasionParams& params, const Vector& x_final,
                                int evader_type);
// Distance from the pursuer's final position to the evader's.
double pursuer_endpoint_distance(const Vector& x_final);

}  // namespace lqdg

#endif  // LQDG_SCENARIO_HPP
