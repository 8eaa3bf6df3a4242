#include "oracles.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>

namespace oracle {

LqrSolution solve_tracking_lqr(const std::vector<Matrix>& A, const std::vector<Matrix>& B,
                               const std::vector<Matrix>& D, const std::vector<Matrix>& F,
                               const std::vector<Vector>& xd, const std::vector<double>& fd,
                               const std::vector<Matrix>& Q) {
  const int K = static_cast<int>(A.size());
  LqrSolution sol;
  sol.P.resize(K + 1);
  sol.b.resize(K + 1);
  sol.c.resize(K + 1);
  sol.K.resize(K);
  sol.d.resize(K);

  sol.P[K] = D[K];
  sol.b[K] = -2.0 * (D[K] * xd[K]);
  sol.c[K] = xd[K].dot(D[K] * xd[K]) + fd[K];

  for (int k = K - 1; k >= 0; --k) {
    const Matrix& P = sol.P[k + 1];
    const Vector& b = sol.b[k + 1];
    // min_u u'Fu + (Ax+Bu)'P(Ax+Bu) + b'(Ax+Bu):
    //   (F + B'PB) u = -B'PA x - (1/2) B'b.
    const Matrix G = F[k] + B[k].transpose() * P * B[k];
    Eigen::LDLT<Matrix> ldlt(0.5 * (G + G.transpose()));
    sol.K[k] = -ldlt.solve(B[k].transpose() * P * A[k]);
    sol.d[k] = -0.5 * ldlt.solve(B[k].transpose() * b);

    const Matrix Acl = A[k] + B[k] * sol.K[k];
    const Vector Bd = B[k] * sol.d[k];
    Matrix Pk = D[k] + sol.K[k].transpose() * F[k] * sol.K[k] + Acl.transpose() * P * Acl;
    sol.P[k] = 0.5 * (Pk + Pk.transpose());
    sol.b[k] = -2.0 * (D[k] * xd[k]) + 2.0 * (sol.K[k].transpose() * (F[k] * sol.d[k])) +
               2.0 * (Acl.transpose() * (P * Bd)) + Acl.transpose() * b;
    sol.c[k] = xd[k].dot(D[k] * xd[k]) + fd[k] + sol.d[k].dot(F[k] * sol.d[k]) + Bd.dot(P * Bd) +
               b.dot(Bd) + sol.c[k + 1] + (P * Q[k]).trace();
  }
  return sol;
}

NashSolution solve_complete_info_nash(const std::vector<Matrix>& A,
                                      const std::vector<std::vector<Matrix>>& B,
                                      const std::vector<std::vector<Matrix>>& D,
                                      const std::vector<std::vector<std::vector<Matrix>>>& F,
                                      const std::vector<std::vector<Vector>>& xd,
                                      const std::vector<std::vector<double>>& fd,
                                      const std::vector<Matrix>& Q) {
  const int K = static_cast<int>(A.size());
  const int N = static_cast<int>(B[0].size());
  const int n = static_cast<int>(A[0].rows());
  std::vector<int> m(N), offset(N);
  int total = 0;
  for (int i = 0; i < N; ++i) {
    m[i] = static_cast<int>(B[0][i].cols());
    offset[i] = total;
    total += m[i];
  }

  NashSolution sol;
  sol.P.resize(K + 1);
  sol.b.resize(K + 1);
  sol.c.resize(K + 1);
  sol.K.resize(K);
  sol.d.resize(K);
  sol.P[K].resize(N);
  sol.b[K].resize(N);
  sol.c[K].resize(N);
  for (int i = 0; i < N; ++i) {
    sol.P[K][i] = D[K][i];
    sol.b[K][i] = -2.0 * (D[K][i] * xd[K][i]);
    sol.c[K][i] = xd[K][i].dot(D[K][i] * xd[K][i]) + fd[K][i];
  }

  for (int k = K - 1; k >= 0; --k) {
    // Player i's first-order condition:
    //   (F_ii + B_i'P_iB_i) u_i + sum_{j != i} B_i'P_iB_j u_j
    //     = -B_i'P_iA x - (1/2) B_i'b_i.
    Matrix M = Matrix::Zero(total, total);
    Matrix Rx = Matrix::Zero(total, n);
    Vector rc = Vector::Zero(total);
    for (int i = 0; i < N; ++i) {
      const Matrix BtP = B[k][i].transpose() * sol.P[k + 1][i];
      for (int j = 0; j < N; ++j) {
        Matrix block = BtP * B[k][j];
        if (j == i) block += F[k][i][i];
        M.block(offset[i], offset[j], m[i], m[j]) = block;
      }
      Rx.middleRows(offset[i], m[i]) = -(BtP * A[k]);
      rc.segment(offset[i], m[i]) = -0.5 * (B[k][i].transpose() * sol.b[k + 1][i]);
    }
    Eigen::ColPivHouseholderQR<Matrix> qr(M);
    const Matrix Kall = qr.solve(Rx);
    const Vector dall = qr.solve(rc);

    sol.K[k].resize(N);
    sol.d[k].resize(N);
    for (int i = 0; i < N; ++i) {
      sol.K[k][i] = Kall.middleRows(offset[i], m[i]);
      sol.d[k][i] = dall.segment(offset[i], m[i]);
    }

    Matrix Acl = A[k];
    Vector cv = Vector::Zero(n);
    for (int j = 0; j < N; ++j) {
      Acl += B[k][j] * sol.K[k][j];
      cv += B[k][j] * sol.d[k][j];
    }

    sol.P[k].resize(N);
    sol.b[k].resize(N);
    sol.c[k].resize(N);
    for (int i = 0; i < N; ++i) {
      const Matrix& P = sol.P[k + 1][i];
      const Vector& b = sol.b[k + 1][i];
      Matrix Pk = D[k][i] + Acl.transpose() * P * Acl;
      Vector bk = -2.0 * (D[k][i] * xd[k][i]) + Acl.transpose() * (b + 2.0 * (P * cv));
      double ck = (P * Q[k]).trace() + sol.c[k + 1][i] + xd[k][i].dot(D[k][i] * xd[k][i]) +
                  fd[k][i] + cv.dot(b) + cv.dot(P * cv);
      for (int j = 0; j < N; ++j) {
        Pk += sol.K[k][j].transpose() * F[k][i][j] * sol.K[k][j];
        bk += 2.0 * (sol.K[k][j].transpose() * (F[k][i][j] * sol.d[k][j]));
        ck += sol.d[k][j].dot(F[k][i][j] * sol.d[k][j]);
      }
      sol.P[k][i] = 0.5 * (Pk + Pk.transpose());
      sol.b[k][i] = std::move(bk);
      sol.c[k][i] = ck;
    }
  }
  return sol;
}

NashSolution solve_nash_at_profile(const lqdg::GameSpec& spec, const lqdg::JointType& joint) {
  const int K = spec.horizon;
  const int N = spec.num_players;
  std::vector<Matrix> A(K), Q(K);
  std::vector<std::vector<Matrix>> B(K, std::vector<Matrix>(N));
  std::vector<std::vector<Matrix>> D(K + 1, std::vector<Matrix>(N));
  std::vector<std::vector<std::vector<Matrix>>> F(
      K + 1, std::vector<std::vector<Matrix>>(N, std::vector<Matrix>(N)));
  std::vector<std::vector<Vector>> xd(K + 1, std::vector<Vector>(N));
  std::vector<std::vector<double>> fd(K + 1, std::vector<double>(N));
  for (int k = 0; k < K; ++k) {
    A[k] = spec.dyn_A(k, joint);
    Q[k] = spec.noise_Q(k);
    for (int i = 0; i < N; ++i) B[k][i] = spec.dyn_B(k, i, joint[i]);
  }
  for (int k = 0; k <= K; ++k) {
    for (int i = 0; i < N; ++i) {
      D[k][i] = spec.cost_D(k, i, joint[i]);
      xd[k][i] = spec.ref_x(k, i, joint[i]);
      fd[k][i] = spec.ref_f(k, i, joint[i]);
      for (int j = 0; j < N; ++j) F[k][i][j] = spec.cost_F(k, i, j, joint[i]);
    }
  }
  return solve_complete_info_nash(A, B, D, F, xd, fd, Q);
}

lqdg::GameSpec random_spec(std::mt19937_64& rng, const std::vector<int>& type_counts, int n,
                           const std::vector<int>& control_dims, int horizon,
                           bool coupled_costs) {
  const int N = static_cast<int>(type_counts.size());
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> positive(0.2, 1.0);

  auto rand_matrix = [&](int r, int c, double scale) {
    Matrix m(r, c);
    for (int a = 0; a < r; ++a)
      for (int b = 0; b < c; ++b) m(a, b) = scale * unit(rng);
    return m;
  };
  auto rand_psd = [&](int dim, double scale) {
    const Matrix L = rand_matrix(dim, dim, 1.0);
    return Matrix(scale * (L.transpose() * L));
  };
  auto rand_pd = [&](int dim, double scale) {
    return Matrix(rand_psd(dim, scale) + 0.25 * scale * Matrix::Identity(dim, dim));
  };
  auto rand_vector = [&](int dim, double scale) {
    Vector v(dim);
    for (int a = 0; a < dim; ++a) v(a) = scale * unit(rng);
    return v;
  };

  lqdg::GameSpec spec;
  spec.num_players = N;
  spec.horizon = horizon;
  spec.state_dim = n;
  spec.control_dims = control_dims;
  std::vector<std::vector<std::string>> labels(N);
  for (int i = 0; i < N; ++i)
    for (int t = 0; t < type_counts[i]; ++t)
      labels[i].push_back("t" + std::to_string(i) + "_" + std::to_string(t));
  spec.types = lqdg::TypeSpace(labels);

  // A varies with the joint profile; entries scaled so closed loops stay tame.
  std::vector<std::vector<Matrix>> A(horizon);
  for (int k = 0; k < horizon; ++k)
    for (int j = 0; j < spec.types.num_joint(); ++j)
      A[k].push_back(Matrix::Identity(n, n) * 0.6 + rand_matrix(n, n, 0.4 / n));
  spec.A = lqdg::StagedTable<Matrix>::Full(std::move(A));

  spec.B.resize(N);
  for (int i = 0; i < N; ++i) {
    std::vector<std::vector<Matrix>> B(horizon);
    for (int k = 0; k < horizon; ++k)
      for (int t = 0; t < type_counts[i]; ++t)
        B[k].push_back(rand_matrix(n, control_dims[i], 0.8));
    spec.B[i] = lqdg::StagedTable<Matrix>::Full(std::move(B));
  }

  spec.D.resize(N);
  spec.x_ref.resize(N);
  spec.f_ref.resize(N);
  spec.F.resize(N);
  for (int i = 0; i < N; ++i) {
    std::vector<std::vector<Matrix>> D(horizon + 1);
    std::vector<std::vector<Vector>> xd(horizon + 1);
    std::vector<std::vector<double>> fd(horizon + 1);
    for (int k = 0; k <= horizon; ++k)
      for (int t = 0; t < type_counts[i]; ++t) {
        D[k].push_back(rand_psd(n, 0.5));
        xd[k].push_back(rand_vector(n, 1.0));
        fd[k].push_back(positive(rng));
      }
    spec.D[i] = lqdg::StagedTable<Matrix>::Full(std::move(D));
    spec.x_ref[i] = lqdg::StagedTable<Vector>::Full(std::move(xd));
    spec.f_ref[i] = lqdg::StagedTable<double>::Full(std::move(fd));

    spec.F[i].resize(N);
    for (int j = 0; j < N; ++j) {
      std::vector<std::vector<Matrix>> F(horizon + 1);
      for (int k = 0; k <= horizon; ++k)
        for (int t = 0; t < type_counts[i]; ++t) {
          if (k == horizon) {
            F[k].push_back(Matrix::Zero(control_dims[j], control_dims[j]));
          } else if (j == i) {
            F[k].push_back(rand_pd(control_dims[j], 1.0));
          } else if (coupled_costs) {
            F[k].push_back(rand_psd(control_dims[j], 0.2));
          } else {
            F[k].push_back(Matrix::Zero(control_dims[j], control_dims[j]));
          }
        }
      spec.F[i][j] = lqdg::StagedTable<Matrix>::Full(std::move(F));
    }
  }

  std::vector<Matrix> Q(horizon);
  for (int k = 0; k < horizon; ++k) Q[k] = rand_psd(n, 0.02);
  spec.Q = lqdg::StagedTable<Matrix>::PerStage(std::move(Q));

  lqdg::validate_spec(spec);
  return spec;
}

lqdg::BeliefTable random_beliefs(std::mt19937_64& rng, const lqdg::TypeSpace& types) {
  std::uniform_real_distribution<double> unit(0.05, 1.0);
  lqdg::BeliefTable table = lqdg::BeliefTable::Uniform(types);
  for (int i = 0; i < types.num_players(); ++i) {
    for (int t = 0; t < types.num_types(i); ++t) {
      Vector row(types.num_opponent(i));
      for (int p = 0; p < row.size(); ++p) row(p) = unit(rng);
      table.set_row(i, t, row / row.sum());
    }
  }
  return table;
}

}  // namespace oracle
