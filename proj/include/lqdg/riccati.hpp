// Extended Riccati recursions for the level-t equilibrium of the hidden-type
// LQ game.  For fixed beliefs, each player i and own type theta_i carries a
// quadratic value function
//
//   V_i^k(x) = q_i^k + x' N_i^k + x' S_i^k x
//
// with boundary S^K = D^K, N^K = -2 D^K x_d^K, q^K = x_d' D^K x_d + f_d^K.
// At each stage the first-order conditions of all (player, type) pairs stack
// into one linear system
//
//   W0 u + W1 x + W2 = 0,   u* = (-W0)^{-1} (W1 x + W2),
//
// whose blocks couple players through the belief matrices.  With M the row
// block of (-W0)^{-1} belonging to (i, theta_i), that pair's action is
// u_i* = (M W1) x + (M W2) =: fb x + ff.

#ifndef LQDG_RICCATI_HPP
#define LQDG_RICCATI_HPP

#include <vector>

#include "lqdg/belief.hpp"
#include "lqdg/game_spec.hpp"
#include "lqdg/types.hpp"

namespace lqdg {

// Stacked stage system.  Row/column blocks are ordered by player, then own
// type: offset(i, l) = sum_{j<i} m_j * N_j + m_i * l.
struct StageSystem {
  Matrix W0;  // (sum_i m_i N_i) square
  Matrix W1;  // (sum_i m_i N_i) x n
  Vector W2;  // (sum_i m_i N_i)
  // Belief marginal matrices: L[i][j] is N_i x N_j, row l = belief of
  // (i, theta_i^l) over player j's types.  Right stochastic.  L[i][i] is the
  // identity.  These expand to the block-structured coupling inside W0.
  std::vector<std::vector<Matrix>> L;
  // Diagonal blocks R_i(theta_i^l) = F_ii + B_i' S_i^{k+1} B_i, symmetrized.
  std::vector<std::vector<Matrix>> R;
  std::vector<int> row_offset_player;  // offset of player i's block
  int rows = 0;
  int row_offset(int player, int own_type, const GameSpec& spec) const {
    return row_offset_player[player] + spec.control_dims[player] * own_type;
  }
};

// Equilibrium action of one (player, type) pair at one stage:
// u = fb * x + ff.
struct Gain {
  Matrix fb;  // m_i x n
  Vector ff;  // m_i
};

struct StageDiagnostics {
  double w0_rcond = 0.0;        // reciprocal condition estimate of -W0
  double min_r_eig_ratio = 0.0; // min over (i, theta) of lambda_min(R) / ||R||_2
};

// Value coefficients and gains for stages from_stage..K (gains ..K-1),
// computed against beliefs frozen at the pass's start.
struct RiccatiSolution {
  int from_stage = 0;
  int horizon = 0;
  // Indexed [k][player][own_type]; S/N/q valid for k >= from_stage, gains
  // for from_stage <= k <= K-1.
  std::vector<std::vector<std::vector<Matrix>>> S;
  std::vector<std::vector<std::vector<Vector>>> N;
  std::vector<std::vector<std::vector<double>>> q;
  std::vector<std::vector<std::vector<Gain>>> gains;
  std::vector<StageDiagnostics> diagnostics;  // [k] for k >= from_stage
};

// Assembles the stage-k stacked system from the next-stage value
// coefficients S_next/N_next (indexed [player][own_type]) and the beliefs.
// Verifies R_i positive definiteness (throws NoEquilibriumError).
StageSystem assemble_stage_system(const GameSpec& spec, int k,
                                  const std::vector<std::vector<Matrix>>& S_next,
                                  const std::vector<std::vector<Vector>>& N_next,
                                  const BeliefTable& beliefs);

// Solves the stacked system for every pair's gains.  -W0 is factorized, not
// inverted; a reciprocal-condition estimate below 1e-12 throws
// SingularCouplingError.  Players whose off-diagonal W0 row blocks are
// exactly zero are solved from their diagonal blocks alone, so their gains
// are bit-for-bit independent of the other players' data (exact cognitive
// decoupling).
std::vector<std::vector<Gain>> solve_stage(const StageSystem& system, const GameSpec& spec, int k,
                                           StageDiagnostics* diag = nullptr);

// Full backward pass from stage K down to from_stage with beliefs held
// fixed.  Value recursions, for each supported opponent profile (weights
// from the belief row, zero-weight profiles skipped):
//
//   A_cl = A(theta) + sum_j B_j(theta_j) fb_j,  c = sum_j B_j(theta_j) ff_j
//   S_i^k = D_i + E[ A_cl' S_i^{k+1} A_cl + sum_j fb_j' F_ij fb_j ]
//   N_i^k = -2 D_i x_d + E[ A_cl'(N_i^{k+1} + 2 S_i^{k+1} c)
//                           + 2 sum_j fb_j' F_ij ff_j ]
//   q_i^k = tr(S_i^{k+1} Q^k) + q_i^{k+1} + x_d' D_i x_d + f_d
//           + E[ c' N_i^{k+1} + c' S_i^{k+1} c + sum_j ff_j' F_ij ff_j ]
//
// S is re-symmetrized after every update.
RiccatiSolution backward_pass(const GameSpec& spec, const BeliefTable& beliefs,
                              int from_stage = 0);

// Consistency oracle: recomputes S at every stage of a completed pass
// through the one-sided form
//
//   S_i^k = D_i + E[ Atil' G_i' S_i^{k+1} Atil
//                    + sum_{j != i} fb_j' F_ij fb_j ],
//   Atil  = A(theta) + sum_{j != i} B_j(theta_j) fb_j,
//   G_i   = I - B_i R_i^{-1} B_i' S_i^{k+1},
//
// using the pass's own S^{k+1} and gains.  Returns [k][player][own_type].
std::vector<std::vector<std::vector<Matrix>>> alternative_S(const GameSpec& spec,
                                                            const BeliefTable& beliefs,
                                                            const RiccatiSolution& solution);

// u_i*(x) at stage k for (player, own_type).
Vector equilibrium_action(const RiccatiSolution& solution, int k, const Vector& x, int player,
                          int own_type);

// V_i^k(x) = q + x'N + x'Sx.
double value_function(const RiccatiSolution& solution, int k, const Vector& x, int player,
                      int own_type);

// Weighted sum over opponent profiles with two exactness short-circuits:
// zero-weight terms are skipped, and if every supported term is elementwise
// identical the common value is returned unweighted.  Keeps decoupled
// players' recursions bit-for-bit independent of belief values.  Exposed for
// tests.
Matrix weighted_sum(const std::vector<double>& weights, const std::vector<Matrix>& items);
Vector weighted_sum(const std::vector<double>& weights, const std::vector<Vector>& items);
double weighted_sum(const std::vector<double>& weights, const std::vector<double>& items);

}  // namespace lqdg

#endif  // LQDG_RICCATI_HPP
