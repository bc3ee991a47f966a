#pragma once

#include "ddpc/linalg.hpp"

namespace ddpc {

/// Per-step weights of J(u, ŷ) = ||ŷ - r||²_Q + ||u||²_R, repeated block-diagonally
/// over the prediction horizon.
struct CostWeights {
  Matrix Q;  ///< n_y x n_y, symmetric positive definite
  Matrix R;  ///< n_u x n_u, symmetric positive definite

  static CostWeights scalar(double q, double r) { return {Matrix::Constant(1, 1, q), Matrix::Constant(1, 1, r)}; }

  void validate() const {
    check(Q, "Q");
    check(R, "R");
  }

  Matrix Q_bar(Index Lf) const { return block_diag_repeat(Q, Lf); }
  Matrix R_bar(Index Lf) const { return block_diag_repeat(R, Lf); }

 private:
  static void check(const Matrix& w, const char* name) {
    if (w.rows() != w.cols() || w.rows() == 0) throw DimensionError(std::string("CostWeights.") + name + " must be square");
    require_finite(w, std::string("CostWeights.") + name);
    if ((w - w.transpose()).cwiseAbs().maxCoeff() > 1e-12)
      throw DomainError(std::string("CostWeights.") + name + " is not symmetric");
    if (Eigen::LLT<Matrix>(w).info() != Eigen::Success)
      throw DomainError(std::string("CostWeights.") + name + " is not positive definite");
  }
};

}  // namespace ddpc
