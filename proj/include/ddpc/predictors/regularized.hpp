#pragma once

// Regularized DeePC schemes that softly push the decision vector g towards the
// LS estimate of the innovation null space:
//  - projection regularizer   λ ||(I - Π) g||²
//  - split g = ĝ_LS(u) + (I - Π) g'  with weighted penalty on Ê_f,LS g'
//  - γ-DDPC over the LQ coordinates γ = Q g
//
// Each solver minimizes J(u, ŷ) = ||ŷ - r||²_Q + ||u||²_R plus its penalty
// jointly over u and the internal variables. Without the control cost the
// penalty alone selects the SPC prediction, which is what predict() returns.

#include <string>

#include "ddpc/cost.hpp"
#include "ddpc/predictors/common.hpp"
#include "ddpc/predictors/spc.hpp"

namespace ddpc {

struct RegularizedSolution {
  Vector u;         ///< optimal future input
  Vector y;         ///< predicted output at the optimum
  Vector internal;  ///< g, g' or γ depending on the scheme
};

namespace detail {

inline void check_reference(const Vector& r, const HankelSet& h, const std::string& who) {
  if (r.size() != h.n_y * h.Lf)
    throw DimensionError(who + ": reference has size " + std::to_string(r.size()) + ", expected " +
                         std::to_string(h.n_y * h.Lf));
}

inline void check_cost(const CostWeights& c, const HankelSet& h, const std::string& who) {
  c.validate();
  if (c.Q.rows() != h.n_y || c.R.rows() != h.n_u) throw DimensionError(who + ": cost weight dimensions");
}

inline Vector solve_spd(const Matrix& H, const Vector& rhs, const std::string& who) {
  Eigen::LLT<Matrix> llt(H);
  if (llt.info() != Eigen::Success) {
    const Vector s = singular_values(H);
    const double cond = s.size() && s(s.size() - 1) > 0 ? s(0) / s(s.size() - 1) : INFINITY;
    throw NumericalError(who + ": singular Hessian (condition " + std::to_string(cond) + ")");
  }
  return llt.solve(rhs);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Projection regularizer

struct ProjRegModel {
  HankelSet hankels;
  Matrix phi;
  Matrix pi_perp;
  SpcModel spc;

  AffineMap affine_map(const WindowData& w) const { return spc.affine_map(w); }
  Vector predict(const WindowData& w) const { return spc.predict(w); }

  /// min J + λ ||(I-Π) g||²  s.t.  Φ g = col(u_ini, y_ini, u),  ŷ = Yf g,
  /// solved through its KKT system.
  RegularizedSolution solve(const WindowData& w, const CostWeights& cost, const Vector& r, double lambda) const {
    const HankelSet& h = hankels;
    if (lambda < 0.0) throw DomainError("deepc_projreg_solve: lambda must be >= 0");
    require_window(w, h, false, "deepc_projreg_solve");
    detail::check_reference(r, h, "deepc_projreg_solve");
    detail::check_cost(cost, h, "deepc_projreg_solve");
    const Index mu = h.n_u * h.Lf;
    const Index n = h.n_cols;
    const Index m = phi.rows();
    const Index past = h.past_rows();
    const Matrix Qb = cost.Q_bar(h.Lf);

    Matrix K = Matrix::Zero(mu + n + m, mu + n + m);
    K.topLeftCorner(mu, mu) = cost.R_bar(h.Lf);
    K.block(mu, mu, n, n) = h.Yf.transpose() * Qb * h.Yf + lambda * pi_perp;
    // constraint rows: Φ g - S u = col(u_ini, y_ini, 0)
    K.block(mu + n, mu, m, n) = phi;
    K.block(mu + n + past, 0, mu, mu) = -Matrix::Identity(mu, mu);
    K.block(mu, mu + n, n, m) = phi.transpose();
    K.block(0, mu + n + past, mu, mu) = -Matrix::Identity(mu, mu);

    Vector rhs = Vector::Zero(mu + n + m);
    rhs.segment(mu, n) = h.Yf.transpose() * Qb * r;
    rhs.segment(mu + n, h.n_u * h.Lp) = w.u_ini;
    rhs.segment(mu + n + h.n_u * h.Lp, h.n_y * h.Lp) = w.y_ini;

    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(K);
    const Vector z = cod.solve(rhs);
    const double resid = (K * z - rhs).norm();
    const double scale = K.norm() * z.norm() + rhs.norm();
    if (!z.allFinite() || resid > 1e-8 * scale) {
      const Vector s = singular_values(K);
      throw NumericalError("deepc_projreg_solve: inconsistent KKT system (lambda=" + std::to_string(lambda) +
                           ", condition " + std::to_string(s(0) / std::max(s(s.size() - 1), 1e-300)) +
                           ", residual " + std::to_string(resid) + ")");
    }
    RegularizedSolution sol;
    sol.u = z.head(mu);
    sol.internal = z.segment(mu, n);
    sol.y = h.Yf * sol.internal;
    return sol;
  }
};

inline ProjRegModel fit_projreg(const HankelSet& h) {
  ProjRegModel m;
  m.spc = fit_spc(h);
  m.hankels = h;
  m.phi = h.phi();
  m.pi_perp = orth_projector(m.phi).pi_perp;
  return m;
}

inline RegularizedSolution deepc_projreg_solve(const HankelSet& h, const WindowData& w, const CostWeights& cost,
                                               const Vector& r, double lambda) {
  return fit_projreg(h).solve(w, cost, r, lambda);
}

// ---------------------------------------------------------------------------
// Split g = ĝ_LS(u) + (I - Π) g'

struct SplitModel {
  HankelSet hankels;
  SpcModel spc;
  Matrix phi_pinv;  ///< Φ†
  Matrix E_hat;     ///< Ê_f,LS = Yf (I - Π)
  Matrix U_E;       ///< orthonormal basis of range(Ê_f,LS)
  Vector S_E;       ///< its nonzero singular values
  Matrix V_E;

  AffineMap affine_map(const WindowData& w) const { return spc.affine_map(w); }
  Vector predict(const WindowData& w) const { return spc.predict(w); }

  /// min J + λ1 ||ĝ_LS(u)||² + λ2 ||Ê g'||²_{(Ê Êᵀ)†}  with ŷ = ŷ_LS(u) + Ê g'.
  /// Writing Ê g' = U_E c turns the weighted norm into ||S_E^{-1} c||².
  RegularizedSolution solve(const WindowData& w, const CostWeights& cost, const Vector& r, double lambda1,
                            double lambda2) const {
    const HankelSet& h = hankels;
    if (lambda1 < 0.0 || lambda2 < 0.0) throw DomainError("deepc_split_solve: lambda1, lambda2 must be >= 0");
    require_window(w, h, false, "deepc_split_solve");
    detail::check_reference(r, h, "deepc_split_solve");
    detail::check_cost(cost, h, "deepc_split_solve");
    const Index mu = h.n_u * h.Lf;
    const Index k = U_E.cols();
    const Vector ini = vcat({&w.u_ini, &w.y_ini});
    const AffineMap ls = spc.affine_map(w);
    const Vector g0 = phi_pinv.leftCols(ini.size()) * ini;
    const Matrix Pu = phi_pinv.rightCols(mu);
    const Matrix Qb = cost.Q_bar(h.Lf);

    Matrix M(ls.gain.rows(), mu + k);
    M << ls.gain, U_E;
    Matrix H = M.transpose() * Qb * M;
    H.topLeftCorner(mu, mu) += cost.R_bar(h.Lf) + lambda1 * Pu.transpose() * Pu;
    if (k > 0) H.bottomRightCorner(k, k).diagonal() += lambda2 * S_E.array().square().inverse().matrix();
    Vector rhs = M.transpose() * Qb * (r - ls.offset);
    rhs.head(mu) -= lambda1 * Pu.transpose() * g0;
    const Vector z = detail::solve_spd(H, rhs, "deepc_split_solve");

    RegularizedSolution sol;
    sol.u = z.head(mu);
    const Vector c = z.tail(k);
    sol.y = ls.apply(sol.u) + U_E * c;
    sol.internal = V_E * S_E.cwiseInverse().asDiagonal() * c;
    return sol;
  }
};

inline SplitModel fit_split(const HankelSet& h) {
  SplitModel m;
  m.spc = fit_spc(h);
  m.hankels = h;
  const Matrix phi = h.phi();
  m.phi_pinv = pinv(phi);
  m.E_hat = h.Yf - (h.Yf * m.phi_pinv) * phi;
  const Svd d = svd(m.E_hat);
  // rank relative to Yf so that noise-free data (Ê ~ roundoff) gives rank 0
  const double scale = std::max(singular_values(h.Yf).maxCoeff(), 1e-300);
  Index r = 0;
  while (r < d.s.size() && d.s(r) > default_rank_tol(h.Yf.rows(), h.Yf.cols()) * scale * 1e3) ++r;
  m.U_E = d.U.leftCols(r);
  m.S_E = d.s.head(r);
  m.V_E = d.V.leftCols(r);
  return m;
}

inline RegularizedSolution deepc_split_solve(const HankelSet& h, const WindowData& w, const CostWeights& cost,
                                             const Vector& r, double lambda1, double lambda2) {
  return fit_split(h).solve(w, cost, r, lambda1, lambda2);
}

// ---------------------------------------------------------------------------
// γ-DDPC

/// Full block LQ of col(col(Up, Yp), Uf, Yf) with row blocks (n_u+n_y)Lp,
/// n_u Lf, n_y Lf. Q is square: Q3 holds every row orthogonal to Q1, Q2, so
/// I - Π = Q3ᵀ Q3, and L33 is n_y Lf x rows(Q3), zero past its first n_y Lf columns.
struct GammaBlocks {
  Index Lp = 0, Lf = 0, n_u = 0, n_y = 0;
  Matrix L11, L21, L22, L31, L32, L33;
  Matrix Q1, Q2, Q3;
  Matrix L11_pinv;
  Matrix L22_inv;

  Matrix L() const {
    const Index p = L11.rows(), fu = L22.rows(), fy = L33.rows(), q3 = L33.cols();
    Matrix out = Matrix::Zero(p + fu + fy, p + fu + q3);
    out.block(0, 0, p, p) = L11;
    out.block(p, 0, fu, p) = L21;
    out.block(p, p, fu, fu) = L22;
    out.block(p + fu, 0, fy, p) = L31;
    out.block(p + fu, p, fy, fu) = L32;
    out.block(p + fu, p + fu, fy, q3) = L33;
    return out;
  }
  Matrix Q() const { return vstack({&Q1, &Q2, &Q3}); }

  /// Penalty-free prediction (γ3 = 0, γ2 fixed by u); equals SPC on noisy data.
  AffineMap affine_map(const WindowData& w) const {
    if (w.u_ini.size() != n_u * Lp || w.y_ini.size() != n_y * Lp)
      throw DimensionError("gamma-DDPC: window past lengths do not match Lp");
    const Vector gamma1 = L11_pinv * vcat({&w.u_ini, &w.y_ini});
    const Matrix gain = L32 * L22_inv;
    return {L31 * gamma1 - gain * (L21 * gamma1), gain};
  }
  Vector predict(const WindowData& w) const { return affine_map(w).apply(w.u_future); }
};

inline GammaBlocks gamma_ddpc_factorize(const HankelSet& h) {
  require_input_excitation(h, "gamma_ddpc_factorize");
  const Index p = h.past_rows();
  const Index fu = h.n_u * h.Lf;
  const Index fy = h.n_y * h.Lf;
  const Matrix stacked = vstack({&h.Up, &h.Yp, &h.Uf, &h.Yf});
  if (stacked.rows() > stacked.cols())
    throw DimensionError("gamma_ddpc_factorize: stacked Hankel is not fat (" +
                         shape_str(stacked.rows(), stacked.cols()) + ")");
  const Index rows = stacked.rows();
  const Index n = stacked.cols();
  Eigen::HouseholderQR<Matrix> qr(stacked.transpose());
  Matrix R = qr.matrixQR().topRows(rows).triangularView<Eigen::Upper>();
  Matrix Qfull = qr.householderQ();
  for (Index i = 0; i < rows; ++i) {
    if (R(i, i) < 0.0) {
      R.row(i) *= -1.0;
      Qfull.col(i) *= -1.0;
    }
  }
  const Matrix L = R.transpose();
  const Index q3 = n - p - fu;
  GammaBlocks b;
  b.Lp = h.Lp;
  b.Lf = h.Lf;
  b.n_u = h.n_u;
  b.n_y = h.n_y;
  b.L11 = L.block(0, 0, p, p);
  b.L21 = L.block(p, 0, fu, p);
  b.L22 = L.block(p, p, fu, fu);
  b.L31 = L.block(p + fu, 0, fy, p);
  b.L32 = L.block(p + fu, p, fy, fu);
  b.L33 = Matrix::Zero(fy, q3);
  b.L33.leftCols(fy) = L.block(p + fu, p + fu, fy, fy);
  b.Q1 = Qfull.leftCols(p).transpose();
  b.Q2 = Qfull.middleCols(p, fu).transpose();
  b.Q3 = Qfull.rightCols(q3).transpose();
  if (numerical_rank(b.L22) < fu)
    throw RankError("gamma_ddpc_factorize: L22 is rank deficient (future input not persistently exciting)");
  // L11 may be singular on noise-free data (Yp is state-determined); use the pseudo-inverse.
  b.L11_pinv = pinv(b.L11);
  b.L22_inv = b.L22.triangularView<Eigen::Lower>().solve(Matrix::Identity(fu, fu));
  return b;
}

/// γ1 = L11⁻¹ col(u_ini, y_ini);  u = L21 γ1 + L22 γ2;  ŷ = L31 γ1 + L32 γ2 + L33 γ3;
/// minimizes J + β2 ||γ2||² + β3 ||γ3||² over (γ2, γ3). `internal` holds col(γ1, γ2, γ3).
inline RegularizedSolution gamma_ddpc_solve(const GammaBlocks& b, const WindowData& w, const CostWeights& cost,
                                            const Vector& r, double beta2, double beta3) {
  if (beta2 < 0.0 || beta3 < 0.0) throw DomainError("gamma_ddpc_solve: beta2, beta3 must be >= 0");
  if (w.u_ini.size() != b.n_u * b.Lp || w.y_ini.size() != b.n_y * b.Lp)
    throw DimensionError("gamma_ddpc_solve: window past lengths do not match Lp");
  if (r.size() != b.n_y * b.Lf) throw DimensionError("gamma_ddpc_solve: reference size");
  cost.validate();
  const Index fu = b.L22.rows();
  const Index fy = b.L33.rows();
  const Vector gamma1 = b.L11_pinv * vcat({&w.u_ini, &w.y_ini});
  const Vector u0 = b.L21 * gamma1;
  const Vector y0 = b.L31 * gamma1;
  Matrix Mu = Matrix::Zero(fu, fu + fy);
  Mu.leftCols(fu) = b.L22;
  Matrix My(fy, fu + fy);
  // components of γ3 past the first n_y Lf never reach ŷ; their optimum is zero
  My << b.L32, b.L33.leftCols(fy);
  const Matrix Qb = cost.Q_bar(b.Lf);
  const Matrix Rb = cost.R_bar(b.Lf);
  Matrix H = Mu.transpose() * Rb * Mu + My.transpose() * Qb * My;
  H.diagonal().head(fu).array() += beta2;
  H.diagonal().tail(fy).array() += beta3;
  const Vector rhs = My.transpose() * Qb * (r - y0) - Mu.transpose() * Rb * u0;
  const Vector z = detail::solve_spd(H, rhs, "gamma_ddpc_solve");

  RegularizedSolution sol;
  sol.u = u0 + Mu * z;
  sol.y = y0 + My * z;
  sol.internal = Vector::Zero(gamma1.size() + fu + b.L33.cols());
  sol.internal << gamma1, z, Vector::Zero(b.L33.cols() - fy);
  return sol;
}

}  // namespace ddpc
