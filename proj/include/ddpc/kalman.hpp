#pragma once

// Steady-state Kalman filter: DARE, gain, predictor-form system, filtering
// pass and multi-step prediction.

#include <optional>
#include <string>

#include "ddpc/hankel.hpp"
#include "ddpc/linalg.hpp"
#include "ddpc/lti.hpp"

namespace ddpc {

struct KalmanModel {
  SystemModel sys;
  Matrix K;               ///< n x n_y steady-state gain
  Matrix P;               ///< one-step predicted state error covariance (DARE solution)
  Matrix A_cl;            ///< A - K C
  Matrix innovation_cov;  ///< C P C^T + sigma_v
  int iterations = 0;
};

/// One application of the Riccati map
/// f(P) = A P A^T - A P C^T (C P C^T + sigma_v)^{-1} C P A^T + sigma_w.
inline Matrix riccati_map(const SystemModel& sys, const Matrix& P) {
  const Matrix S = sys.C * P * sys.C.transpose() + sys.sigma_v;
  Eigen::LLT<Matrix> llt(S);
  if (llt.info() != Eigen::Success) throw NumericalError("riccati_map: innovation covariance is not positive definite");
  const Matrix APCt = sys.A * P * sys.C.transpose();
  Matrix next = sys.A * P * sys.A.transpose() - APCt * llt.solve(APCt.transpose()) + sys.sigma_w;
  return 0.5 * (next + next.transpose());
}

inline double dare_residual(const SystemModel& sys, const Matrix& P) { return (riccati_map(sys, P) - P).norm(); }

/// Fixed-point iteration of the Riccati map from P = sigma_w.
inline KalmanModel solve_dare(const SystemModel& sys, double tol = 1e-12, int max_iter = 100000) {
  sys.validate();
  Matrix P = sys.sigma_w;
  double change = 0.0;
  int it = 0;
  for (; it < max_iter; ++it) {
    Matrix next = riccati_map(sys, P);
    change = (next - P).norm();
    P = std::move(next);
    if (!P.allFinite()) throw NumericalError("solve_dare: iteration diverged");
    if (change <= tol * std::max(1.0, P.norm())) break;
  }
  if (it == max_iter)
    throw NumericalError("solve_dare: no convergence after " + std::to_string(max_iter) +
                         " iterations, last change " + std::to_string(change));

  KalmanModel km;
  km.sys = sys;
  km.P = P;
  km.innovation_cov = sys.C * P * sys.C.transpose() + sys.sigma_v;
  Eigen::LLT<Matrix> llt(km.innovation_cov);
  if (llt.info() != Eigen::Success) throw NumericalError("solve_dare: singular innovation covariance");
  km.K = llt.solve((sys.A * P * sys.C.transpose()).transpose()).transpose();
  km.A_cl = sys.A - km.K * sys.C;
  km.iterations = it + 1;

  const double res = dare_residual(sys, km.P);
  if (res > 1e-9 * (1.0 + km.P.norm())) throw NumericalError("solve_dare: residual " + std::to_string(res) + " too large");
  if (spectral_radius(km.A_cl) >= 1.0) throw NumericalError("solve_dare: A - K C is not Schur stable");
  return km;
}

/// The filter seen as an LTI system with inputs (u, y) and output ŷ:
/// x̂+ = (A - K C) x̂ + [B - K D, K] col(u, y),  ŷ = C x̂ + [D, 0] col(u, y).
struct PredictorSystem {
  Matrix A_cl, B_aug, C, D_aug;
};

inline PredictorSystem predictor_system(const KalmanModel& km) {
  const SystemModel& s = km.sys;
  PredictorSystem p;
  p.A_cl = km.A_cl;
  p.B_aug.resize(s.n(), s.n_u() + s.n_y());
  p.B_aug << s.B - km.K * s.D, km.K;
  p.C = s.C;
  p.D_aug = Matrix::Zero(s.n_y(), s.n_u() + s.n_y());
  p.D_aug.leftCols(s.n_u()) = s.D;
  return p;
}

/// Runs x̂_{t+1} = A x̂_t + B u_t + K (y_t - ŷ_t), ŷ_t = C x̂_t + D u_t over the
/// trajectory and fills yhat, e and xhat.
inline Trajectory kalman_filter_pass(const KalmanModel& km, const Trajectory& traj, const Vector& xhat0) {
  const SystemModel& s = km.sys;
  if (traj.n_u() != s.n_u() || traj.n_y() != s.n_y())
    throw DimensionError("kalman_filter_pass: trajectory channels do not match the model");
  if (xhat0.size() != s.n()) throw DimensionError("kalman_filter_pass: xhat0 has wrong size");
  Trajectory out = traj;
  const Index T = traj.length();
  out.yhat = Matrix(s.n_y(), T);
  out.e = Matrix(s.n_y(), T);
  out.xhat = Matrix(s.n(), T);
  Vector xh = xhat0;
  for (Index t = 0; t < T; ++t) {
    out.xhat->col(t) = xh;
    const Vector yh = s.C * xh + s.D * traj.u.col(t);
    const Vector e = traj.y.col(t) - yh;
    out.yhat->col(t) = yh;
    out.e->col(t) = e;
    xh = s.A * xh + s.B * traj.u.col(t) + km.K * e;
  }
  return out;
}

/// Filter state after running the window's past samples from `xhat_start`.
inline Vector kalman_state_after(const KalmanModel& km, const Vector& u_ini, const Vector& y_ini,
                                 const std::optional<Vector>& xhat_start = std::nullopt) {
  const SystemModel& s = km.sys;
  const Index nu = s.n_u();
  const Index ny = s.n_y();
  if (u_ini.size() % nu != 0 || y_ini.size() % ny != 0 || u_ini.size() / nu != y_ini.size() / ny)
    throw DimensionError("kalman_state_after: inconsistent window lengths");
  Vector xh = xhat_start.value_or(Vector::Zero(s.n()));
  if (xh.size() != s.n()) throw DimensionError("kalman_state_after: start estimate has wrong size");
  const Index L = u_ini.size() / nu;
  for (Index k = 0; k < L; ++k) {
    const Vector u = u_ini.segment(k * nu, nu);
    const Vector e = y_ini.segment(k * ny, ny) - (s.C * xh + s.D * u);
    xh = s.A * xh + s.B * u + km.K * e;
  }
  return xh;
}

/// Zero-innovation multi-step prediction ŷ = O x̂_t + G u as (O, G).
struct KalmanPredictionMap {
  Matrix O;  ///< n_y Lf x n
  Matrix G;  ///< n_y Lf x n_u Lf, block lower triangular
};

inline KalmanPredictionMap kalman_prediction_map(const SystemModel& s, Index Lf) {
  const Index ny = s.n_y();
  const Index nu = s.n_u();
  KalmanPredictionMap m{Matrix::Zero(ny * Lf, s.n()), Matrix::Zero(ny * Lf, nu * Lf)};
  Matrix CAk = s.C;
  for (Index k = 0; k < Lf; ++k) {
    m.O.middleRows(k * ny, ny) = CAk;
    CAk = CAk * s.A;
  }
  for (Index k = 0; k < Lf; ++k) {
    m.G.block(k * ny, k * nu, ny, nu) = s.D;
    for (Index j = 0; j < k; ++j)
      m.G.block(k * ny, j * nu, ny, nu) = m.O.middleRows((k - j - 1) * ny, ny) * s.B;
  }
  return m;
}

/// Multi-step prediction of the steady-state filter: filter over the window's
/// past (starting from `xhat_start`, zero if absent), then propagate with zero
/// innovations over window.u_future.
inline Vector kalman_multistep_predict(const KalmanModel& km, const WindowData& window,
                                       const std::optional<Vector>& xhat_start = std::nullopt) {
  const SystemModel& s = km.sys;
  const Index nu = s.n_u();
  const Index ny = s.n_y();
  if (window.u_future.size() % nu != 0) throw DimensionError("kalman_multistep_predict: u_future size");
  Vector xh = kalman_state_after(km, window.u_ini, window.y_ini, xhat_start);
  const Index Lf = window.u_future.size() / nu;
  Vector out(ny * Lf);
  for (Index k = 0; k < Lf; ++k) {
    const Vector u = window.u_future.segment(k * nu, nu);
    out.segment(k * ny, ny) = s.C * xh + s.D * u;
    xh = s.A * xh + s.B * u;
  }
  return out;
}

}  // namespace ddpc
