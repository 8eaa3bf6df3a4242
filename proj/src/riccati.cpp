#include "lqdg/riccati.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <cmath>
#include <sstream>

namespace lqdg {

namespace {

constexpr double kRPdRelTol = 1e-10;    // lambda_min(R) must exceed this times ||R||_2
constexpr double kW0RcondTol = 1e-12;   // reciprocal condition floor for -W0

// Combines weight/item pairs.  Zero-weight pairs must already be filtered
// out by the caller; if all items are elementwise identical the common item
// is returned as-is so that belief-independent summands stay bit-for-bit
// stable under belief perturbations.
template <typename T>
T combine(const std::vector<double>& weights, const std::vector<T>& items) {
  bool all_equal = true;
  for (std::size_t i = 1; i < items.size(); ++i) {
    if constexpr (std::is_same_v<T, double>) {
      if (items[i] != items[0]) {
        all_equal = false;
        break;
      }
    } else {
      if (items[i].rows() != items[0].rows() || items[i].cols() != items[0].cols() ||
          !(items[i].array() == items[0].array()).all()) {
        all_equal = false;
        break;
      }
    }
  }
  if (all_equal) return items[0];
  T sum = weights[0] * items[0];
  for (std::size_t i = 1; i < items.size(); ++i) sum += weights[i] * items[i];
  return sum;
}

template <typename T>
T weighted_sum_impl(const std::vector<double>& weights, const std::vector<T>& items) {
  if (weights.size() != items.size() || items.empty())
    throw std::invalid_argument("weighted_sum: mismatched or empty inputs");
  std::vector<double> w;
  std::vector<T> v;
  w.reserve(weights.size());
  v.reserve(items.size());
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] != 0.0) {
      w.push_back(weights[i]);
      v.push_back(items[i]);
    }
  }
  if (v.empty()) throw std::invalid_argument("weighted_sum: all weights are zero");
  return combine(w, v);
}

Matrix symmetrized(const Matrix& m) { return 0.5 * (m + m.transpose()); }

// lambda_min and spectral norm of a symmetric matrix.
std::pair<double, double> symmetric_extremes(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(m);
  const auto& ev = es.eigenvalues();
  return {ev.minCoeff(), std::max(std::abs(ev.minCoeff()), std::abs(ev.maxCoeff()))};
}

}  // namespace

Matrix weighted_sum(const std::vector<double>& weights, const std::vector<Matrix>& items) {
  return weighted_sum_impl(weights, items);
}
Vector weighted_sum(const std::vector<double>& weights, const std::vector<Vector>& items) {
  return weighted_sum_impl(weights, items);
}
double weighted_sum(const std::vector<double>& weights, const std::vector<double>& items) {
  return weighted_sum_impl(weights, items);
}

StageSystem assemble_stage_system(const GameSpec& spec, int k,
                                  const std::vector<std::vector<Matrix>>& S_next,
                                  const std::vector<std::vector<Vector>>& N_next,
                                  const BeliefTable& beliefs) {
  const int N = spec.num_players;
  StageSystem sys;
  sys.row_offset_player.resize(N);
  sys.rows = 0;
  for (int i = 0; i < N; ++i) {
    sys.row_offset_player[i] = sys.rows;
    sys.rows += spec.control_dims[i] * spec.types.num_types(i);
  }
  sys.W0 = Matrix::Zero(sys.rows, sys.rows);
  sys.W1 = Matrix::Zero(sys.rows, spec.state_dim);
  sys.W2 = Vector::Zero(sys.rows);
  sys.R.resize(N);
  sys.L.assign(N, std::vector<Matrix>(N));

  // Belief marginals over each opponent's types; right stochastic by
  // construction of the rows.
  for (int i = 0; i < N; ++i) {
    for (int j = 0; j < N; ++j) {
      if (i == j) {
        sys.L[i][j] = Matrix::Identity(spec.types.num_types(i), spec.types.num_types(i));
        continue;
      }
      Matrix L(spec.types.num_types(i), spec.types.num_types(j));
      for (int l = 0; l < spec.types.num_types(i); ++l)
        L.row(l) = beliefs.marginal(spec.types, i, l, j).transpose();
      sys.L[i][j] = std::move(L);
    }
  }

  for (int i = 0; i < N; ++i) {
    const int mi = spec.control_dims[i];
    sys.R[i].resize(spec.types.num_types(i));
    for (int l = 0; l < spec.types.num_types(i); ++l) {
      const Matrix& Bi = spec.dyn_B(k, i, l);
      const Matrix BtS = Bi.transpose() * S_next[i][l];  // m_i x n

      // R_i(theta_i^l) = F_ii + B_i' S_i^{k+1} B_i, must be positive definite.
      const Matrix R = symmetrized(spec.cost_F(k, i, i, l) + BtS * Bi);
      const auto [min_eig, norm] = symmetric_extremes(R);
      if (!(min_eig > kRPdRelTol * norm)) {
        std::ostringstream os;
        os << "control cost R for player " << i << " type " << l << " at stage " << k
           << " is not positive definite (min eig " << min_eig << ", norm " << norm << ")";
        throw NoEquilibriumError(os.str(), k, i, l, min_eig, norm);
      }
      sys.R[i][l] = R;

      const int row = sys.row_offset(i, l, spec);
      sys.W0.block(row, row, mi, mi) = R;

      // Off-diagonal coupling blocks: belief marginal times B_i'S_i B_j.
      // The matrix product runs before the scalar so exact zero structure in
      // B_i'S_i survives any belief value.
      for (int j = 0; j < N; ++j) {
        if (j == i) continue;
        const int mj = spec.control_dims[j];
        for (int p = 0; p < spec.types.num_types(j); ++p) {
          const Matrix coupling = BtS * spec.dyn_B(k, j, p);
          sys.W0.block(row, sys.row_offset(j, p, spec), mi, mj) = sys.L[i][j](l, p) * coupling;
        }
      }

      // W1 row block: B_i' S_i^{k+1} E_{theta_-i}[A]; the expectation is taken
      // over the products so belief-independent rows short-circuit exactly.
      const Vector& row_belief = beliefs.row(i, l);
      std::vector<double> weights;
      std::vector<Matrix> products;
      for (int opp = 0; opp < row_belief.size(); ++opp) {
        if (row_belief(opp) == 0.0) continue;
        weights.push_back(row_belief(opp));
        products.push_back(BtS * spec.dyn_A(k, spec.types.compose(i, l, opp)));
      }
      sys.W1.middleRows(row, mi) = combine(weights, products);

      // W2 row block: (1/2) B_i' N_i^{k+1}.
      sys.W2.segment(row, mi) = 0.5 * (Bi.transpose() * N_next[i][l]);
    }
  }
  return sys;
}

std::vector<std::vector<Gain>> solve_stage(const StageSystem& sys, const GameSpec& spec, int k,
                                           StageDiagnostics* diag) {
  const int N = spec.num_players;

  // Reciprocal condition estimate of the full stacked operator -W0.
  Eigen::PartialPivLU<Matrix> full_lu(-sys.W0);
  const double rcond = full_lu.rcond();
  if (diag) {
    diag->w0_rcond = rcond;
    double worst = std::numeric_limits<double>::infinity();
    for (int i = 0; i < N; ++i)
      for (const Matrix& R : sys.R[i]) {
        const auto [min_eig, norm] = symmetric_extremes(R);
        worst = std::min(worst, min_eig / norm);
      }
    diag->min_r_eig_ratio = worst;
  }
  if (!(rcond > kW0RcondTol)) {
    std::ostringstream os;
    os << "stacked coupling matrix W0 at stage " << k
       << " is numerically singular (rcond " << rcond << ")";
    throw SingularCouplingError(os.str(), k, rcond);
  }

  // Players whose W0 row blocks vanish off the diagonal decouple from the
  // joint solve; handling them separately keeps their gains bit-for-bit
  // unaffected by the other players.
  std::vector<bool> decoupled(N);
  std::vector<int> coupled;
  for (int i = 0; i < N; ++i) {
    const int row = sys.row_offset_player[i];
    const int size = spec.control_dims[i] * spec.types.num_types(i);
    bool clean = true;
    for (int j = 0; j < N && clean; ++j) {
      if (j == i) continue;
      const int col = sys.row_offset_player[j];
      const int jsize = spec.control_dims[j] * spec.types.num_types(j);
      clean = (sys.W0.block(row, col, size, jsize).array() == 0.0).all();
    }
    decoupled[i] = clean;
    if (!clean) coupled.push_back(i);
  }

  std::vector<std::vector<Gain>> gains(N);
  for (int i = 0; i < N; ++i) gains[i].resize(spec.types.num_types(i));

  // Decoupled rows reduce to R u + W1 x + W2 = 0 per type.
  for (int i = 0; i < N; ++i) {
    if (!decoupled[i]) continue;
    const int mi = spec.control_dims[i];
    for (int l = 0; l < spec.types.num_types(i); ++l) {
      const int row = sys.row_offset(i, l, spec);
      Eigen::LDLT<Matrix> ldlt(sys.R[i][l]);
      gains[i][l].fb = -ldlt.solve(sys.W1.middleRows(row, mi));
      gains[i][l].ff = -ldlt.solve(sys.W2.segment(row, mi));
    }
  }

  if (!coupled.empty()) {
    // Gather the coupled sub-system; the decoupled players' solved gains move
    // to the right-hand side:
    //   (-W0_cc) u_c = W0_cd u_d + W1_c x + W2_c.
    std::vector<int> rows;
    for (int i : coupled) {
      const int base = sys.row_offset_player[i];
      const int size = spec.control_dims[i] * spec.types.num_types(i);
      for (int r = 0; r < size; ++r) rows.push_back(base + r);
    }
    const int nc = static_cast<int>(rows.size());
    Matrix T(nc, nc);
    Matrix rhs_fb(nc, spec.state_dim);
    Vector rhs_ff(nc);
    for (int a = 0; a < nc; ++a) {
      for (int b = 0; b < nc; ++b) T(a, b) = -sys.W0(rows[a], rows[b]);
      rhs_fb.row(a) = sys.W1.row(rows[a]);
      rhs_ff(a) = sys.W2(rows[a]);
    }
    for (int i = 0; i < N; ++i) {
      if (!decoupled[i]) continue;
      const int mi = spec.control_dims[i];
      for (int l = 0; l < spec.types.num_types(i); ++l) {
        const int col = sys.row_offset(i, l, spec);
        for (int a = 0; a < nc; ++a) {
          rhs_fb.row(a) += sys.W0.block(rows[a], col, 1, mi) * gains[i][l].fb;
          rhs_ff(a) += sys.W0.block(rows[a], col, 1, mi).row(0).dot(gains[i][l].ff);
        }
      }
    }
    Eigen::PartialPivLU<Matrix> lu(T);
    const Matrix fb = lu.solve(rhs_fb);
    const Vector ff = lu.solve(rhs_ff);
    int cursor = 0;
    for (int i : coupled) {
      const int mi = spec.control_dims[i];
      for (int l = 0; l < spec.types.num_types(i); ++l) {
        gains[i][l].fb = fb.middleRows(cursor, mi);
        gains[i][l].ff = ff.segment(cursor, mi);
        cursor += mi;
      }
    }
  }
  return gains;
}

RiccatiSolution backward_pass(const GameSpec& spec, const BeliefTable& beliefs, int from_stage) {
  const int N = spec.num_players;
  const int K = spec.horizon;
  if (from_stage < 0 || from_stage > K)
    throw std::invalid_argument("backward_pass: from_stage out of range");

  RiccatiSolution sol;
  sol.from_stage = from_stage;
  sol.horizon = K;
  sol.S.resize(K + 1);
  sol.N.resize(K + 1);
  sol.q.resize(K + 1);
  sol.gains.resize(K);
  sol.diagnostics.resize(K);
  for (int k = 0; k <= K; ++k) {
    sol.S[k].resize(N);
    sol.N[k].resize(N);
    sol.q[k].resize(N);
    for (int i = 0; i < N; ++i) {
      sol.S[k][i].resize(spec.types.num_types(i));
      sol.N[k][i].resize(spec.types.num_types(i));
      sol.q[k][i].assign(spec.types.num_types(i), 0.0);
    }
  }

  // Terminal boundary: S^K = D^K, N^K = -2 D^K x_d, q^K = x_d' D^K x_d + f_d.
  for (int i = 0; i < N; ++i) {
    for (int l = 0; l < spec.types.num_types(i); ++l) {
      const Matrix& D = spec.cost_D(K, i, l);
      const Vector& xd = spec.ref_x(K, i, l);
      sol.S[K][i][l] = symmetrized(D);
      sol.N[K][i][l] = -2.0 * (D * xd);
      sol.q[K][i][l] = xd.dot(D * xd) + spec.ref_f(K, i, l);
    }
  }

  for (int k = K - 1; k >= from_stage; --k) {
    StageSystem sys = assemble_stage_system(spec, k, sol.S[k + 1], sol.N[k + 1], beliefs);
    sol.gains[k] = solve_stage(sys, spec, k, &sol.diagnostics[k]);

    for (int i = 0; i < N; ++i) {
      for (int l = 0; l < spec.types.num_types(i); ++l) {
        const Matrix& S_next = sol.S[k + 1][i][l];
        const Vector& N_next = sol.N[k + 1][i][l];
        const Vector& row_belief = beliefs.row(i, l);

        std::vector<double> weights;
        std::vector<Matrix> s_items;
        std::vector<Vector> n_items;
        std::vector<double> q_items;
        for (int opp = 0; opp < row_belief.size(); ++opp) {
          if (row_belief(opp) == 0.0) continue;
          weights.push_back(row_belief(opp));
          const JointType joint = spec.types.compose(i, l, opp);

          // Closed loop under the stage equilibrium: x+ = A_cl x + c + w.
          Matrix A_cl = spec.dyn_A(k, joint);
          Vector c = Vector::Zero(spec.state_dim);
          for (int j = 0; j < N; ++j) {
            const Matrix& Bj = spec.dyn_B(k, j, joint[j]);
            const Gain& g = sol.gains[k][j][joint[j]];
            A_cl += Bj * g.fb;
            c += Bj * g.ff;
          }

          Matrix s_term = A_cl.transpose() * S_next * A_cl;
          const Vector Sc = S_next * c;
          Vector n_term = A_cl.transpose() * (N_next + 2.0 * Sc);
          double q_term = c.dot(N_next) + c.dot(Sc);
          for (int j = 0; j < N; ++j) {
            const Matrix& Fij = spec.cost_F(k, i, j, l);
            const Gain& g = sol.gains[k][j][joint[j]];
            const Matrix Ffb = Fij * g.fb;
            s_term += g.fb.transpose() * Ffb;
            n_term += 2.0 * (g.fb.transpose() * (Fij * g.ff));
            q_term += g.ff.dot(Fij * g.ff);
          }
          s_items.push_back(std::move(s_term));
          n_items.push_back(std::move(n_term));
          q_items.push_back(q_term);
        }
        if (weights.empty())
          throw SolverError("backward_pass: belief row has no support", k);

        const Matrix& D = spec.cost_D(k, i, l);
        const Vector& xd = spec.ref_x(k, i, l);
        sol.S[k][i][l] = symmetrized(D + combine(weights, s_items));
        sol.N[k][i][l] = -2.0 * (D * xd) + combine(weights, n_items);
        sol.q[k][i][l] = (S_next * spec.noise_Q(k)).trace() + sol.q[k + 1][i][l] +
                         xd.dot(D * xd) + spec.ref_f(k, i, l) + combine(weights, q_items);
      }
    }
  }
  return sol;
}

std::vector<std::vector<std::vector<Matrix>>> alternative_S(const GameSpec& spec,
                                                            const BeliefTable& beliefs,
                                                            const RiccatiSolution& sol) {
  const int N = spec.num_players;
  const int K = spec.horizon;
  std::vector<std::vector<std::vector<Matrix>>> alt(K + 1);
  for (int k = 0; k <= K; ++k) {
    alt[k].resize(N);
    for (int i = 0; i < N; ++i) alt[k][i].resize(spec.types.num_types(i));
  }
  for (int i = 0; i < N; ++i)
    for (int l = 0; l < spec.types.num_types(i); ++l)
      alt[K][i][l] = symmetrized(spec.cost_D(K, i, l));

  for (int k = K - 1; k >= sol.from_stage; --k) {
    for (int i = 0; i < N; ++i) {
      for (int l = 0; l < spec.types.num_types(i); ++l) {
        const Matrix& S_next = sol.S[k + 1][i][l];
        const Matrix& Bi = spec.dyn_B(k, i, l);
        const Matrix BtS = Bi.transpose() * S_next;
        const Matrix R = symmetrized(spec.cost_F(k, i, i, l) + BtS * Bi);
        // G_i' S = S - S B_i R^{-1} B_i' S, the one-sided closed-loop weight.
        const Matrix GtS = S_next - BtS.transpose() * Eigen::LDLT<Matrix>(R).solve(BtS);

        const Vector& row_belief = beliefs.row(i, l);
        std::vector<double> weights;
        std::vector<Matrix> items;
        for (int opp = 0; opp < row_belief.size(); ++opp) {
          if (row_belief(opp) == 0.0) continue;
          weights.push_back(row_belief(opp));
          const JointType joint = spec.types.compose(i, l, opp);
          Matrix A_open = spec.dyn_A(k, joint);  // closed for others, open for i
          for (int j = 0; j < N; ++j) {
            if (j == i) continue;
            A_open += spec.dyn_B(k, j, joint[j]) * sol.gains[k][j][joint[j]].fb;
          }
          Matrix term = A_open.transpose() * GtS * A_open;
          for (int j = 0; j < N; ++j) {
            if (j == i) continue;
            const Gain& g = sol.gains[k][j][joint[j]];
            term += g.fb.transpose() * (spec.cost_F(k, i, j, l) * g.fb);
          }
          items.push_back(std::move(term));
        }
        alt[k][i][l] = spec.cost_D(k, i, l) + combine(weights, items);
      }
    }
  }
  return alt;
}

Vector equilibrium_action(const RiccatiSolution& sol, int k, const Vector& x, int player,
                          int own_type) {
  const Gain& g = sol.gains[k][player][own_type];
  return g.fb * x + g.ff;
}

double value_function(const RiccatiSolution& sol, int k, const Vector& x, int player,
                      int own_type) {
  return sol.q[k][player][own_type] + x.dot(sol.N[k][player][own_type]) +
         x.dot(sol.S[k][player][own_type] * x);
}

}  // namespace lqdg
