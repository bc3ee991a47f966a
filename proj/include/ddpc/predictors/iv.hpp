#pragma once

// Instrumental-variable DeePC: g = Zᵀ h with an instrument Z that is
// uncorrelated with the future innovations.

#include <string>

#include "ddpc/predictors/common.hpp"

namespace ddpc {

enum class InstrumentKind {
  Phi,       ///< Z = col(Up, Yp, Uf), open-loop data
  PastData,  ///< Z = col(Up, Yp), closed-loop data
};

inline const char* to_string(InstrumentKind k) { return k == InstrumentKind::Phi ? "phi" : "past"; }

inline Matrix make_instrument(const HankelSet& h, InstrumentKind kind) {
  return kind == InstrumentKind::Phi ? h.phi() : vstack({&h.Up, &h.Yp});
}

struct IvModel {
  HankelSet hankels;
  Matrix Z;
  Matrix W;  ///< Yf Zᵀ (Φ Zᵀ)†

  AffineMap affine_map(const WindowData& w) const {
    require_window(w, hankels, false, "IV-DeePC");
    return affine_from_linear(W, vcat({&w.u_ini, &w.y_ini}), hankels.n_u * hankels.Lf);
  }
  Vector predict(const WindowData& w) const {
    require_window(w, hankels, true, "IV-DeePC");
    return W * vcat({&w.u_ini, &w.y_ini, &w.u_future});
  }
};

/// Requires rank(Φ Zᵀ) = rank(Φ) so that every right-hand side reachable by g
/// is reachable by Zᵀ h.
inline IvModel fit_iv(const HankelSet& h, const Matrix& Z) {
  require_input_excitation(h, "fit_iv");
  if (Z.cols() != h.n_cols)
    throw DimensionError("fit_iv: instrument has " + std::to_string(Z.cols()) + " columns, Hankels have " +
                         std::to_string(h.n_cols));
  const Matrix phi = h.phi();
  const Matrix M = phi * Z.transpose();
  const Index r_phi = numerical_rank(phi);
  const Index r_m = numerical_rank(M);
  if (r_m != r_phi)
    throw RankError("fit_iv: IV rank condition fails, rank(Phi Z^T) = " + std::to_string(r_m) + " but rank(Phi) = " +
                    std::to_string(r_phi));
  IvModel m;
  m.hankels = h;
  m.Z = Z;
  m.W = h.Yf * Z.transpose() * pinv(M);
  return m;
}

/// Decision set of IV-DeePC as a subspace of R^{n_cols}: range(Zᵀ) together
/// with the directions invisible to every data row, null(col(Φ, Yf)).
/// For Z = Φ this is exactly null(Yf (I - Π)).
inline NullspaceEstimate iv_nullspace(const HankelSet& h, const Matrix& Z) {
  if (Z.cols() != h.n_cols) throw DimensionError("iv_nullspace: instrument column count");
  const Matrix phi = h.phi();
  const Matrix data = vstack({&phi, &h.Yf});
  const RowNullSplit split = row_null_split(data);
  const SubspaceBasis zt = orthonormal_range(Z.transpose());
  const Index n = h.n_cols;
  Matrix basis(n, zt.dim() + split.null_space.dim());
  basis << zt.basis(), split.null_space.basis();
  const Matrix& R = split.row_space.basis();
  const Matrix rest = R - zt.basis() * (zt.basis().transpose() * R);
  // rest is a projection of an orthonormal set; its vanishing directions are
  // exactly those already in range(Zᵀ)
  SubspaceBasis comp = orthonormal_range(rest, 1e-8);
  NullspaceEstimate est{NullspaceMethod::IV, SubspaceBasis(std::move(basis)), std::nullopt};
  if (comp.dim() + est.dim() == n) est.complement = std::move(comp);
  return est;
}

struct IvPrediction {
  Vector prediction;
  NullspaceEstimate ns;
};

inline IvPrediction iv_deepc_predict(const HankelSet& h, const Matrix& Z, const WindowData& w) {
  const IvModel m = fit_iv(h, Z);
  return {m.predict(w), iv_nullspace(h, Z)};
}

}  // namespace ddpc
