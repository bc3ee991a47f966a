#pragma once

// Past/future block Hankel matrices and data windows.
//
// Layout: block row i of a depth-L Hankel built from start s holds samples
// s+i .. s+i+n_cols-1, and each block row is n_channels scalar rows (time-major,
// channel-minor), so column j is col(x_{s+j}, ..., x_{s+j+L-1}).

#include <optional>
#include <string>

#include "ddpc/linalg.hpp"
#include "ddpc/lti.hpp"

namespace ddpc {

inline Matrix block_hankel(const Matrix& signal, Index start, Index depth, Index n_cols) {
  const Index ch = signal.rows();
  if (start < 0 || depth < 0 || n_cols < 0 || start + depth + n_cols - 1 > signal.cols())
    throw DimensionError("block_hankel: needs samples up to " + std::to_string(start + depth + n_cols - 1) +
                         ", signal has " + std::to_string(signal.cols()));
  Matrix h(ch * depth, n_cols);
  for (Index i = 0; i < depth; ++i) h.middleRows(i * ch, ch) = signal.middleCols(start + i, n_cols);
  return h;
}

/// col(x_start, ..., x_{start+len-1}), oldest first.
inline Vector stack_samples(const Matrix& signal, Index start, Index len) {
  if (start < 0 || start + len > signal.cols())
    throw IndexError("stack_samples: range [" + std::to_string(start) + ", " + std::to_string(start + len) +
                     ") outside length " + std::to_string(signal.cols()));
  const Matrix block = signal.middleCols(start, len);
  return Eigen::Map<const Vector>(block.data(), block.size());
}

struct HankelSet {
  Index Lp = 0;
  Index Lf = 0;
  Index n_cols = 0;
  Index n_u = 0;
  Index n_y = 0;
  Matrix Up, Yp, Uf, Yf;
  std::optional<Matrix> Ep, Ef, Yhat_p, Yhat_f;

  /// Phi = col(Up, Yp, Uf).
  Matrix phi() const { return vstack({&Up, &Yp, &Uf}); }
  Index past_rows() const { return (n_u + n_y) * Lp; }
};

/// n_cols = T - Lp - Lf + 1 for a trajectory of length T.
inline HankelSet build_hankel_set(const Trajectory& traj, Index Lp, Index Lf) {
  if (Lp < 1 || Lf < 1) throw DomainError("build_hankel_set: Lp and Lf must be >= 1");
  traj.validate();
  const Index T = traj.length();
  if (T < Lp + Lf)
    throw DimensionError("build_hankel_set: trajectory too short, need at least " + std::to_string(Lp + Lf) +
                         " samples, have " + std::to_string(T));
  HankelSet h;
  h.Lp = Lp;
  h.Lf = Lf;
  h.n_cols = T - Lp - Lf + 1;
  h.n_u = traj.n_u();
  h.n_y = traj.n_y();
  h.Up = block_hankel(traj.u, 0, Lp, h.n_cols);
  h.Yp = block_hankel(traj.y, 0, Lp, h.n_cols);
  h.Uf = block_hankel(traj.u, Lp, Lf, h.n_cols);
  h.Yf = block_hankel(traj.y, Lp, Lf, h.n_cols);
  if (traj.e) {
    h.Ep = block_hankel(*traj.e, 0, Lp, h.n_cols);
    h.Ef = block_hankel(*traj.e, Lp, Lf, h.n_cols);
  }
  if (traj.yhat) {
    h.Yhat_p = block_hankel(*traj.yhat, 0, Lp, h.n_cols);
    h.Yhat_f = block_hankel(*traj.yhat, Lp, Lf, h.n_cols);
  }
  return h;
}

/// True iff the depth-L block Hankel matrix of `signal` (channels x T) has full
/// numerical row rank.
inline bool persistency_order(const Matrix& signal, Index L, std::optional<double> rank_tol = std::nullopt) {
  if (L < 1) throw DomainError("persistency_order: L must be >= 1");
  if (signal.cols() < L) throw DimensionError("persistency_order: signal shorter than L");
  const Index cols = signal.cols() - L + 1;
  const Matrix h = block_hankel(signal, 0, L, cols);
  if (h.rows() > h.cols()) return false;
  return numerical_rank(h, rank_tol) == h.rows();
}

inline bool persistency_order(const Vector& scalar_signal, Index L, std::optional<double> rank_tol = std::nullopt) {
  return persistency_order(Matrix(scalar_signal.transpose()), L, rank_tol);
}

struct WindowData {
  Vector u_ini;     ///< n_u * Lp
  Vector y_ini;     ///< n_y * Lp
  Vector u_future;  ///< n_u * Lf (may be empty when only the past is known)
  std::optional<Vector> e_ini;
  std::optional<Vector> yhat_ini;
  std::optional<Vector> xhat_start;  ///< filter state at the window start (SSKF)
};

/// Window around time t: past samples t-Lp .. t-1, future t .. t+Lf-1.
inline WindowData extract_window(const Trajectory& traj, Index t, Index Lp, Index Lf) {
  if (t < Lp || t + Lf > traj.length())
    throw IndexError("extract_window: t=" + std::to_string(t) + " invalid for Lp=" + std::to_string(Lp) +
                     ", Lf=" + std::to_string(Lf) + ", length " + std::to_string(traj.length()));
  WindowData w;
  w.u_ini = stack_samples(traj.u, t - Lp, Lp);
  w.y_ini = stack_samples(traj.y, t - Lp, Lp);
  w.u_future = stack_samples(traj.u, t, Lf);
  if (traj.e) w.e_ini = stack_samples(*traj.e, t - Lp, Lp);
  if (traj.yhat) w.yhat_ini = stack_samples(*traj.yhat, t - Lp, Lp);
  return w;
}

/// Past-only window ending just before t (u_future left empty).
inline WindowData extract_past_window(const Trajectory& traj, Index t, Index Lp) {
  if (t < Lp || t > traj.length())
    throw IndexError("extract_past_window: t=" + std::to_string(t) + " invalid for Lp=" + std::to_string(Lp));
  WindowData w;
  w.u_ini = stack_samples(traj.u, t - Lp, Lp);
  w.y_ini = stack_samples(traj.y, t - Lp, Lp);
  if (traj.e) w.e_ini = stack_samples(*traj.e, t - Lp, Lp);
  if (traj.yhat) w.yhat_ini = stack_samples(*traj.yhat, t - Lp, Lp);
  return w;
}

}  // namespace ddpc
