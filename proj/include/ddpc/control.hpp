#pragma once

// Receding-horizon predictive control through any PredictorModel.

#include <ostream>
#include <string>

#include "ddpc/cost.hpp"
#include "ddpc/lti.hpp"
#include "ddpc/predictors/model.hpp"

namespace ddpc {

struct StepSolution {
  Vector u;  ///< stacked future input, n_u Lf
  Vector y;  ///< predicted output at u
};

/// Minimizes ||ŷ - r||²_Q + ||u||²_R through the predictor. Affine kinds solve
/// (GᵀQ̄G + R̄) u = GᵀQ̄ (r - F0); regularized kinds use their joint solvers.
inline StepSolution solve_step(const PredictorModel& pred, const WindowData& window, const CostWeights& cost,
                               const Vector& r_future) {
  cost.validate();
  if (is_regularized(pred.kind())) {
    const RegularizedSolution s = pred.solve_regularized(window, cost, r_future);
    return {s.u, s.y};
  }
  const AffineMap map = pred.affine_map(window);
  if (r_future.size() != map.offset.size())
    throw DimensionError("solve_step: reference has size " + std::to_string(r_future.size()) + ", expected " +
                         std::to_string(map.offset.size()));
  const Matrix Qb = cost.Q_bar(pred.Lf());
  const Matrix H = map.gain.transpose() * Qb * map.gain + cost.R_bar(pred.Lf());
  const Vector rhs = map.gain.transpose() * Qb * (r_future - map.offset);
  Eigen::LLT<Matrix> llt(H);
  if (llt.info() != Eigen::Success) {
    const Vector s = singular_values(H);
    throw NumericalError(std::string("solve_step: singular Hessian for ") + to_string(pred.kind()) + " (condition " +
                         std::to_string(s(0) / std::max(s(s.size() - 1), 1e-300)) + ")");
  }
  StepSolution out;
  out.u = llt.solve(rhs);
  out.y = map.apply(out.u);
  return out;
}

struct ClosedLoopResult {
  Matrix u;           ///< n_u x N realized inputs
  Matrix y;           ///< n_y x N realized outputs
  Matrix r;           ///< n_y x N reference
  Matrix yhat_first;  ///< n_y x N first block of each step's prediction
  Vector step_cost;   ///< ||y_t - r_t||²_Q + ||u_t||²_R
  Vector plan_cost;   ///< predicted horizon cost at each step's optimum
  double J_total = 0.0;

  Index length() const { return u.cols(); }
};

/// r_t .. r_{t+Lf-1}, holding the last sample past the end.
inline Vector reference_window(const Matrix& r, Index t, Index Lf) {
  const Index ny = r.rows();
  Vector out(ny * Lf);
  for (Index k = 0; k < Lf; ++k) out.segment(k * ny, ny) = r.col(std::min(t + k, r.cols() - 1));
  return out;
}

inline double stage_cost(const Vector& y, const Vector& r, const Vector& u, const CostWeights& cost) {
  const Vector d = y - r;
  return d.dot(cost.Q * d) + u.dot(cost.R * u);
}

/// Runs len(r) steps. The history starts with `warmup`, whose x_final is the
/// plant's initial state; the plant draws its noise from `seed`.
inline ClosedLoopResult run_receding_horizon(const SystemModel& sys, const PredictorModel& pred,
                                             const CostWeights& cost, const Matrix& r, const Trajectory& warmup,
                                             std::uint64_t seed) {
  sys.validate();
  cost.validate();
  if (r.rows() != sys.n_y() || r.cols() < 1) throw DimensionError("run_receding_horizon: reference shape");
  if (!warmup.x_final) throw DomainError("run_receding_horizon: warm-up trajectory has no final state");
  const Index W = warmup.length();
  if (W < pred.history_needed())
    throw DimensionError("run_receding_horizon: warm-up has " + std::to_string(W) + " samples, predictor needs " +
                         std::to_string(pred.history_needed()));
  const Index N = r.cols();
  const Index nu = sys.n_u();
  const Index ny = sys.n_y();
  Matrix u_hist = Matrix::Zero(nu, W + N);
  Matrix y_hist = Matrix::Zero(ny, W + N);
  u_hist.leftCols(W) = warmup.u;
  y_hist.leftCols(W) = warmup.y;

  Plant plant(sys, *warmup.x_final, seed);
  ClosedLoopResult res;
  res.u.resize(nu, N);
  res.y.resize(ny, N);
  res.r = r;
  res.yhat_first.resize(ny, N);
  res.step_cost.resize(N);
  res.plan_cost.resize(N);
  for (Index t = 0; t < N; ++t) {
    const Index now = W + t;
    StepSolution sol;
    const Vector rf = reference_window(r, t, pred.Lf());
    try {
      const WindowData w = pred.make_window(u_hist.leftCols(now), y_hist.leftCols(now), now);
      sol = solve_step(pred, w, cost, rf);
    } catch (const Error& e) {
      throw NumericalError("run_receding_horizon: step " + std::to_string(t) + ": " + e.what());
    }
    const Vector u = sol.u.head(nu);
    const Vector y = plant.step(u);
    u_hist.col(now) = u;
    y_hist.col(now) = y;
    res.u.col(t) = u;
    res.y.col(t) = y;
    res.yhat_first.col(t) = sol.y.head(ny);
    res.step_cost(t) = stage_cost(y, r.col(t), u, cost);
    const Vector d = sol.y - rf;
    res.plan_cost(t) = d.dot(cost.Q_bar(pred.Lf()) * d) + sol.u.dot(cost.R_bar(pred.Lf()) * sol.u);
    res.J_total += res.step_cost(t);
  }
  return res;
}

/// Realized cost Σ_t ||y_t - r_t||²_Q + ||u_t||²_R recomputed from signals.
inline double evaluate_cost(const Matrix& u, const Matrix& y, const Matrix& r, const CostWeights& cost) {
  if (u.cols() != y.cols() || r.cols() != y.cols() || r.rows() != y.rows())
    throw DimensionError("evaluate_cost: signal lengths differ");
  double J = 0.0;
  for (Index t = 0; t < y.cols(); ++t) J += stage_cost(y.col(t), r.col(t), u.col(t), cost);
  return J;
}

inline double evaluate_cost(const ClosedLoopResult& res, const CostWeights& cost) {
  return evaluate_cost(res.u, res.y, res.r, cost);
}

/// CSV with columns t, u_i, y_i, r_i, yhat_first_i, step_cost.
inline void write_closed_loop_csv(std::ostream& os, const ClosedLoopResult& res) {
  const auto old_prec = os.precision(17);
  os << 't';
  for (Index i = 0; i < res.u.rows(); ++i) os << ",u_" << i;
  for (Index i = 0; i < res.y.rows(); ++i) os << ",y_" << i;
  for (Index i = 0; i < res.r.rows(); ++i) os << ",r_" << i;
  for (Index i = 0; i < res.yhat_first.rows(); ++i) os << ",yhat_first_" << i;
  os << ",step_cost\n";
  for (Index t = 0; t < res.length(); ++t) {
    os << t;
    for (Index i = 0; i < res.u.rows(); ++i) os << ',' << res.u(i, t);
    for (Index i = 0; i < res.y.rows(); ++i) os << ',' << res.y(i, t);
    for (Index i = 0; i < res.r.rows(); ++i) os << ',' << res.r(i, t);
    for (Index i = 0; i < res.yhat_first.rows(); ++i) os << ',' << res.yhat_first(i, t);
    os << ',' << res.step_cost(t) << '\n';
  }
  os.precision(old_prec);
}

}  // namespace ddpc
