#pragma once

// Least-squares predictors: SPC (Θ = Yf Φ†), the LS residual Hankel
// Ê_f,LS = Yf (I - Π) and minimum-norm DeePC.

#include "ddpc/predictors/common.hpp"

namespace ddpc {

struct SpcModel {
  HankelSet hankels;
  Matrix theta;  ///< n_y Lf x rows(Φ)

  AffineMap affine_map(const WindowData& w) const {
    require_window(w, hankels, false, "SPC");
    const Vector ini = vcat({&w.u_ini, &w.y_ini});
    return affine_from_linear(theta, ini, hankels.n_u * hankels.Lf);
  }

  Vector predict(const WindowData& w) const {
    require_window(w, hankels, true, "SPC");
    return theta * vcat({&w.u_ini, &w.y_ini, &w.u_future});
  }
};

inline SpcModel fit_spc(const HankelSet& h) {
  require_input_excitation(h, "fit_spc");
  SpcModel m;
  m.hankels = h;
  m.theta = h.Yf * pinv(h.phi());
  return m;
}

struct LsResidual {
  Matrix E_hat;  ///< Yf (I - Π)
  NullspaceEstimate ns;
};

inline LsResidual ls_residual_hankel(const HankelSet& h) {
  require_input_excitation(h, "ls_residual_hankel");
  const Matrix phi = h.phi();
  // Yf (I - Φ†Φ) without forming the n_cols x n_cols projector.
  Matrix E = h.Yf - (h.Yf * pinv(phi)) * phi;
  NullspaceEstimate ns = nullspace_estimate_of(NullspaceMethod::LS, E);
  return {std::move(E), std::move(ns)};
}

/// g = Φ† col(u_ini, y_ini, u), ŷ = Yf g.
inline Vector deepc_pinv_decision(const HankelSet& h, const WindowData& w) {
  require_input_excitation(h, "deepc_pinv_predict");
  require_window(w, h, true, "deepc_pinv_predict");
  return pinv(h.phi()) * vcat({&w.u_ini, &w.y_ini, &w.u_future});
}

inline Vector deepc_pinv_predict(const HankelSet& h, const WindowData& w) { return h.Yf * deepc_pinv_decision(h, w); }

}  // namespace ddpc
