#include "lqdg/scenario.hpp"

#include <cmath>
#include <sstream>

namespace lqdg {

namespace {

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError("pursuit-evasion scenario: " + message);
}

// Evader cost slice at one stage: weight wt on the true target T, wf on the
// fake target Tf, minus d21 on the squared pursuer distance.  Expanding
//
//   wt|p2 - T|^2 + wf|p2 - Tf|^2 - d21|p1 - p2|^2
//     = (x - xd)' D (x - xd) + fd,
//   D  = [ -d21 I   d21 I ]        xd = [c; c],  c = (wt T + wf Tf)/(wt+wf)
//        [  d21 I  (wt+wf-d21) I ], fd = wt wf |T - Tf|^2 / (wt + wf).
struct EvaderSlice {
  Matrix D;
  Vector xd;
  double fd;
};

EvaderSlice evader_slice(double wt, double wf, double d21, const Eigen::Vector2d& target,
                         const Eigen::Vector2d& fake) {
  const double sigma = wt + wf;
  EvaderSlice s;
  s.D = Matrix::Zero(4, 4);
  const Matrix I2 = Matrix::Identity(2, 2);
  if (d21 != 0.0) {
    s.D.block(0, 0, 2, 2) = -d21 * I2;
    s.D.block(0, 2, 2, 2) = d21 * I2;
    s.D.block(2, 0, 2, 2) = d21 * I2;
  }
  s.D.block(2, 2, 2, 2) = (sigma - d21) * I2;
  const Eigen::Vector2d c = (wt * target + wf * fake) / sigma;
  s.xd = Vector::Zero(4);
  s.xd.segment(0, 2) = c;
  s.xd.segment(2, 2) = c;
  s.fd = wt * wf * (target - fake).squaredNorm() / sigma;
  return s;
}

}  // namespace

GameSpec build_pursuit_evasion(const PursuitEvasionParams& p) {
  require(p.horizon >= 1, "horizon must be at least 1");
  require(p.b1_high > 0.0 && p.b1_low > 0.0 && p.b2 > 0.0,
          "maneuverability gains must be positive");
  require(p.d2_traj > 0.0, "trajectory target weight must be positive");
  require(p.d2_terminal > 0.0, "terminal target weight must be positive");
  require(p.deception_ratio >= 0.0, "deception ratio must be non-negative");
  require(p.f11 > 0.0 && p.f22 > 0.0, "own control costs must be positive");
  require(p.f12 >= 0.0 && p.f21 >= 0.0, "cross control weights must be non-negative");
  require(p.noise_std >= 0.0, "noise level must be non-negative");
  if (p.deception_ratio > 0.0) {
    // Ambiguity budget: the true/fake weight ratio may deviate from 1 by at
    // most epsilon0.
    const double deviation = std::abs(1.0 / p.deception_ratio - 1.0);
    require(deviation <= p.epsilon0 + 1e-12,
            "true/fake weight ratio exceeds the ambiguity budget");
  }

  const int K = p.horizon;
  const Matrix I2 = Matrix::Identity(2, 2);
  const Matrix Z2 = Matrix::Zero(2, 2);

  GameSpec spec;
  spec.num_players = 2;
  spec.horizon = K;
  spec.state_dim = 4;
  spec.control_dims = {2, 2};
  spec.types = TypeSpace({{"H", "L"}, {"g", "b"}});

  spec.A = StagedTable<Matrix>::Constant(Matrix::Identity(4, 4));

  auto embed = [](const Matrix& block, int row) {
    Matrix B = Matrix::Zero(4, 2);
    B.block(row, 0, 2, 2) = block;
    return B;
  };
  spec.B.resize(2);
  spec.B[kPursuer] =
      StagedTable<Matrix>::PerVariant({embed(p.b1_high * I2, 0), embed(p.b1_low * I2, 0)});
  spec.B[kEvader] = StagedTable<Matrix>::Constant(embed(p.b2 * I2, 2));

  // Pursuer cost: proximity at the terminal stage only.
  std::vector<Matrix> D1(K + 1, Matrix::Zero(4, 4));
  Matrix prox = Matrix::Zero(4, 4);
  prox.block(0, 0, 2, 2) = I2;
  prox.block(0, 2, 2, 2) = -I2;
  prox.block(2, 0, 2, 2) = -I2;
  prox.block(2, 2, 2, 2) = I2;
  D1[K] = p.d12_terminal * prox;

  // Evader cost: balanced target weights before K (deception), revelation at
  // K (fake weight drops to zero), evasion coupling d21^k = alpha * k.
  const double wt = p.d2_traj;
  const double wf = p.d2_traj * p.deception_ratio;
  std::vector<Matrix> D2(K + 1);
  std::vector<std::vector<Vector>> xd2(K + 1, std::vector<Vector>(2));
  std::vector<double> fd2(K + 1);
  const std::array<Eigen::Vector2d, 2> target = {p.target_g, p.target_b};
  for (int k = 0; k <= K; ++k) {
    const double d21 = p.alpha * k;
    const double wt_k = (k < K) ? wt : p.d2_terminal;
    const double wf_k = (k < K) ? wf : 0.0;
    for (int type = 0; type < 2; ++type) {
      const EvaderSlice s =
          evader_slice(wt_k, wf_k, d21, target[type], target[1 - type]);
      if (type == 0) {
        D2[k] = s.D;  // type-independent: both types share sigma and d21
        fd2[k] = s.fd;
      }
      xd2[k][type] = s.xd;
    }
  }

  spec.D.resize(2);
  spec.D[kPursuer] = StagedTable<Matrix>::PerStage(std::move(D1));
  spec.D[kEvader] = StagedTable<Matrix>::PerStage(std::move(D2));

  auto control_cost = [K](const Matrix& stage_value) {
    std::vector<Matrix> per_stage(K + 1, stage_value);
    per_stage[K] = Matrix::Zero(stage_value.rows(), stage_value.cols());
    return StagedTable<Matrix>::PerStage(std::move(per_stage));
  };
  spec.F.resize(2, std::vector<StagedTable<Matrix>>(2));
  spec.F[kPursuer][kPursuer] = control_cost(p.f11 * I2);
  spec.F[kPursuer][kEvader] = control_cost(p.f12 == 0.0 ? Z2 : Matrix(-p.f12 * I2));
  spec.F[kEvader][kPursuer] = control_cost(p.f21 == 0.0 ? Z2 : Matrix(-p.f21 * I2));
  spec.F[kEvader][kEvader] = control_cost(p.f22 * I2);

  spec.x_ref.resize(2);
  spec.x_ref[kPursuer] = StagedTable<Vector>::Constant(Vector::Zero(4));
  spec.x_ref[kEvader] = StagedTable<Vector>::Full(std::move(xd2));

  spec.f_ref.resize(2);
  spec.f_ref[kPursuer] = StagedTable<double>::Constant(0.0);
  spec.f_ref[kEvader] = StagedTable<double>::PerStage(std::move(fd2));

  spec.Q = StagedTable<Matrix>::Constant(p.noise_std * p.noise_std * Matrix::Identity(4, 4));

  const ValidationReport report = validate_spec(spec);
  if (!report.valid()) {
    std::ostringstream os;
    os << "pursuit-evasion scenario: invalid spec:";
    for (const auto& e : report.errors) os << "\n  " << e;
    throw ConfigError(os.str());
  }
  return spec;
}

PursuitEvasionParams default_params() { return PursuitEvasionParams{}; }

Eigen::Vector2d pursuer_position(const Vector& x) { return x.segment(0, 2); }
Eigen::Vector2d evader_position(const Vector& x) { return x.segment(2, 2); }

Eigen::Vector2d evader_target(const PursuitEvasionParams& params, int evader_type) {
  return evader_type == kTypeG ? params.target_g : params.target_b;
}

Vector initial_state(const PursuitEvasionParams& params) {
  Vector x(4);
  x.segment(0, 2) = params.pursuer_start;
  x.segment(2, 2) = params.evader_start;
  return x;
}

double evader_endpoint_distance(const PursuitEvasionParams& params, const Vector& x_final,
                                int evader_type) {
  return (evader_position(x_final) - evader_target(params, evader_type)).norm();
}

double pursuer_endpoint_distance(const Vector& x_final) {
  return (pursuer_position(x_final) - evader_position(x_final)).norm();
}

}  // namespace lqdg
