#pragma once

#include <optional>
#include <string>

#include "ddpc/hankel.hpp"
#include "ddpc/linalg.hpp"

namespace ddpc {

/// ŷ = offset + gain * u_future.
struct AffineMap {
  Vector offset;
  Matrix gain;

  Vector apply(const Vector& u_future) const {
    if (u_future.size() != gain.cols())
      throw DimensionError("AffineMap: u_future has size " + std::to_string(u_future.size()) + ", expected " +
                           std::to_string(gain.cols()));
    return offset + gain * u_future;
  }
};

enum class NullspaceMethod { LS, IV, ARX, TRUE };

inline const char* to_string(NullspaceMethod m) {
  switch (m) {
    case NullspaceMethod::LS: return "LS";
    case NullspaceMethod::IV: return "IV";
    case NullspaceMethod::ARX: return "ARX";
    case NullspaceMethod::TRUE: return "TRUE";
  }
  return "?";
}

/// Estimated innovation null space over R^{n_cols}. `complement` is the
/// orthogonal complement when the producer has it for free.
struct NullspaceEstimate {
  NullspaceMethod method = NullspaceMethod::TRUE;
  SubspaceBasis basis;
  std::optional<SubspaceBasis> complement;

  Index ambient_dim() const { return basis.ambient_dim(); }
  Index dim() const { return basis.dim(); }
};

inline NullspaceEstimate nullspace_estimate_of(NullspaceMethod method, const Matrix& m) {
  RowNullSplit split = row_null_split(m);
  return {method, std::move(split.null_space), std::move(split.row_space)};
}

/// Largest principal angle between an estimate and a reference null space.
/// Uses the sine route through whichever complement is available, falling back
/// to the cosine route.
inline double largest_angle(const NullspaceEstimate& est, const NullspaceEstimate& ref) {
  if (est.ambient_dim() != ref.ambient_dim())
    throw DimensionError("largest_angle: ambient dimensions differ (" + std::to_string(est.ambient_dim()) + " vs " +
                         std::to_string(ref.ambient_dim()) + ")");
  if (est.dim() <= ref.dim() && ref.complement) return largest_principal_angle_via_complement(est.basis, *ref.complement);
  if (ref.dim() <= est.dim() && est.complement) return largest_principal_angle_via_complement(ref.basis, *est.complement);
  return largest_principal_angle(est.basis, ref.basis);
}

/// Persistency-of-excitation check on the input rows col(Up, Uf). The output
/// rows are not checked: for noise-free data Yp is state-determined and Phi is
/// never full row rank once Lp exceeds the state dimension.
inline void require_input_excitation(const HankelSet& h, const std::string& who) {
  const Matrix inputs = vstack({&h.Up, &h.Uf});
  if (inputs.rows() > inputs.cols())
    throw RankError(who + ": " + std::to_string(inputs.cols()) + " Hankel columns cannot excite " +
                    std::to_string(inputs.rows()) + " input rows col(Up, Uf); use more data");
  const Index r = numerical_rank(inputs);
  if (r < inputs.rows())
    throw RankError(who + ": input rows col(Up, Uf) have rank " + std::to_string(r) + " < " +
                    std::to_string(inputs.rows()) + " (input not persistently exciting)");
}

inline void require_window(const WindowData& w, const HankelSet& h, bool need_future, const std::string& who) {
  if (w.u_ini.size() != h.n_u * h.Lp || w.y_ini.size() != h.n_y * h.Lp)
    throw DimensionError(who + ": window past lengths do not match Lp=" + std::to_string(h.Lp));
  if (need_future && w.u_future.size() != h.n_u * h.Lf)
    throw DimensionError(who + ": u_future has size " + std::to_string(w.u_future.size()) + ", expected " +
                         std::to_string(h.n_u * h.Lf));
}

/// Split W (rows x (ini + n_u Lf)) applied to col(ini, u) into an affine map.
inline AffineMap affine_from_linear(const Matrix& W, const Vector& ini, Index nu_lf) {
  return {W.leftCols(ini.size()) * ini, W.middleCols(ini.size(), nu_lf)};
}

}  // namespace ddpc
