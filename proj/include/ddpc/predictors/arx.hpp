#pragma once

// High-order one-step-ahead ARX model fitted by least squares; its residuals
// stand in for the innovation sequence.

#include <string>
#include <utility>

#include "ddpc/predictors/common.hpp"

namespace ddpc {

struct ArxModel {
  Index order = 0;
  bool include_lag0 = true;
  Index n_u = 0;
  Index n_y = 0;
  /// [a_1 .. a_ρ | b_0 .. b_ρ] (b_0 absent when include_lag0 is false)
  Matrix theta;
  /// ê over the training trajectory; columns before `order` are zero
  Matrix residuals;

  Index regressor_size() const { return n_y * order + n_u * (order + (include_lag0 ? 1 : 0)); }

  Matrix coeff_y(Index i) const {
    if (i < 1 || i > order) throw IndexError("ArxModel::coeff_y: lag out of range");
    return theta.middleCols((i - 1) * n_y, n_y);
  }
  Matrix coeff_u(Index i) const {
    if (i < 0 || i > order) throw IndexError("ArxModel::coeff_u: lag out of range");
    if (i == 0 && !include_lag0) return Matrix::Zero(n_y, n_u);
    const Index first = include_lag0 ? 0 : 1;
    return theta.middleCols(n_y * order + (i - first) * n_u, n_u);
  }

  /// Regressor for predicting y_t from signals u, y (channels x time).
  Vector regressor(const Matrix& u, const Matrix& y, Index t) const {
    const Index u_need = include_lag0 ? t + 1 : t;
    if (t < order || u.cols() < u_need || y.cols() < t)
      throw IndexError("ArxModel: one-step prediction at t=" + std::to_string(t) + " needs order <= t and samples up to t");
    Vector phi(regressor_size());
    Index k = 0;
    for (Index i = 1; i <= order; ++i, k += n_y) phi.segment(k, n_y) = y.col(t - i);
    for (Index i = include_lag0 ? 0 : 1; i <= order; ++i, k += n_u) phi.segment(k, n_u) = u.col(t - i);
    return phi;
  }

  Vector predict_one_step(const Matrix& u, const Matrix& y, Index t) const { return theta * regressor(u, y, t); }

  /// ê_t = y_t - ŷ_t for t in [order, T); earlier columns are zero.
  Matrix residuals_over(const Matrix& u, const Matrix& y) const {
    if (u.rows() != n_u || y.rows() != n_y || u.cols() != y.cols())
      throw DimensionError("ArxModel::residuals_over: signal shapes do not match the model");
    Matrix e = Matrix::Zero(n_y, y.cols());
    for (Index t = order; t < y.cols(); ++t) e.col(t) = y.col(t) - predict_one_step(u, y, t);
    return e;
  }
};

inline ArxModel fit_arx(const Trajectory& traj, Index order, bool include_lag0 = true) {
  if (order < 1) throw DomainError("fit_arx: order must be >= 1");
  traj.validate();
  const Index T = traj.length();
  const Index nu = traj.n_u();
  const Index ny = traj.n_y();
  const Index need = (ny + nu) * (order + 1) + order;
  if (T <= need)
    throw DimensionError("fit_arx: trajectory length " + std::to_string(T) + " too short for order " +
                         std::to_string(order) + " (need > " + std::to_string(need) + ")");
  ArxModel m;
  m.order = order;
  m.include_lag0 = include_lag0;
  m.n_u = nu;
  m.n_y = ny;
  const Index N = T - order;
  Matrix X(m.regressor_size(), N);
  for (Index t = order; t < T; ++t) X.col(t - order) = m.regressor(traj.u, traj.y, t);
  const Matrix Y = traj.y.rightCols(N);
  const Index r = numerical_rank(X);
  if (r < X.rows())
    throw RankError("fit_arx: regressor matrix has rank " + std::to_string(r) + " < " + std::to_string(X.rows()) +
                    "; lower the order or use a richer input");
  m.theta = X.transpose().colPivHouseholderQr().solve(Y.transpose()).transpose();
  m.residuals = Matrix::Zero(ny, T);
  m.residuals.rightCols(N) = Y - m.theta * X;
  return m;
}

/// Slice [order, T) of the trajectory carrying ê and ŷ = y - ê from the model.
inline Trajectory with_arx_innovations(const ArxModel& arx, const Trajectory& traj) {
  const Matrix e = arx.residuals_over(traj.u, traj.y);
  Trajectory out = traj.slice(arx.order, traj.length());
  out.e = e.rightCols(traj.length() - arx.order);
  out.yhat = out.y - *out.e;
  return out;
}

/// ARX residuals of the past window ending at t-1, given the longer history
/// (u, y) that provides the extra `order` samples; also returns ŷ_ini.
inline std::pair<Vector, Vector> arx_window_innovations(const ArxModel& arx, const Matrix& u, const Matrix& y, Index t,
                                                        Index Lp) {
  if (t - Lp < arx.order)
    throw IndexError("arx_window_innovations: need order + Lp = " + std::to_string(arx.order + Lp) +
                     " past samples, have " + std::to_string(t));
  Vector e(arx.n_y * Lp), yh(arx.n_y * Lp);
  for (Index k = 0; k < Lp; ++k) {
    const Index s = t - Lp + k;
    const Vector p = arx.predict_one_step(u, y, s);
    yh.segment(k * arx.n_y, arx.n_y) = p;
    e.segment(k * arx.n_y, arx.n_y) = y.col(s) - p;
  }
  return {e, yh};
}

struct ArxNullspace {
  Matrix E_p;
  Matrix E_f;
  NullspaceEstimate ns;
};

/// Residual Hankels over the trimmed trajectory: column j of E_f covers times
/// order+Lp+j .. order+Lp+Lf-1+j of the original trajectory.
inline ArxNullspace arx_nullspace(const ArxModel& arx, const Trajectory& traj, Index Lp, Index Lf) {
  const HankelSet h = build_hankel_set(with_arx_innovations(arx, traj), Lp, Lf);
  ArxNullspace out{*h.Ep, *h.Ef, {}};
  out.ns = nullspace_estimate_of(NullspaceMethod::ARX, out.E_f);
  return out;
}

}  // namespace ddpc
