#pragma once

// Dense real linear algebra used throughout the library: SVD, pseudo-inverse,
// orthogonal projectors, null-space bases, LQ factorization and principal
// angles between subspaces. Everything is double precision.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "ddpc/errors.hpp"

namespace ddpc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

inline void require_finite(const Matrix& m, const std::string& what) {
  if (!m.allFinite()) throw NumericalError(what + ": non-finite entry in " + shape_str(m.rows(), m.cols()) + " matrix");
}

inline void require_shape(const Matrix& m, Index rows, Index cols, const std::string& what) {
  if (m.rows() != rows || m.cols() != cols)
    throw DimensionError(what + ": expected " + shape_str(rows, cols) + ", got " + shape_str(m.rows(), m.cols()));
}

/// Orthonormal basis of a linear subspace of R^ambient_dim, one basis vector per column.
///
/// The constructor trusts its argument; use is_orthonormal() to check inputs
/// that did not come from this header.
class SubspaceBasis {
 public:
  SubspaceBasis() = default;
  explicit SubspaceBasis(Matrix basis) : basis_(std::move(basis)) {}

  static SubspaceBasis empty(Index ambient_dim) { return SubspaceBasis(Matrix(ambient_dim, 0)); }

  Index ambient_dim() const { return basis_.rows(); }
  Index dim() const { return basis_.cols(); }
  const Matrix& basis() const { return basis_; }

  bool is_orthonormal(double tol = 1e-10) const {
    if (dim() > ambient_dim()) return false;
    const Matrix gram = basis_.transpose() * basis_;
    return (gram - Matrix::Identity(dim(), dim())).cwiseAbs().maxCoeff() <= tol || dim() == 0;
  }

 private:
  Matrix basis_;
};

struct Svd {
  Matrix U;   ///< rows x k, orthonormal columns
  Vector s;   ///< k = min(rows, cols) singular values, nonincreasing
  Matrix V;   ///< cols x k, orthonormal columns
};

namespace detail {

inline void check_svd(const Eigen::BDCSVD<Matrix>& dec, const Matrix& m) {
  if (dec.info() != Eigen::Success)
    throw NumericalError("svd did not converge for " + shape_str(m.rows(), m.cols()) + " matrix");
}

}  // namespace detail

/// Thin singular value decomposition m = U diag(s) V^T.
inline Svd svd(const Matrix& m) {
  require_finite(m, "svd");
  if (m.size() == 0) {
    const Index k = std::min(m.rows(), m.cols());
    return {Matrix::Zero(m.rows(), k), Vector::Zero(k), Matrix::Zero(m.cols(), k)};
  }
  Eigen::BDCSVD<Matrix> dec(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  detail::check_svd(dec, m);
  return {dec.matrixU(), dec.singularValues(), dec.matrixV()};
}

inline Vector singular_values(const Matrix& m) {
  require_finite(m, "singular_values");
  if (m.size() == 0) return Vector::Zero(0);
  Eigen::BDCSVD<Matrix> dec(m);
  detail::check_svd(dec, m);
  return dec.singularValues();
}

/// Relative rank tolerance: singular values <= tol * s_max count as zero.
inline double default_rank_tol(Index rows, Index cols) {
  return static_cast<double>(std::max<Index>({rows, cols, 1})) * std::numeric_limits<double>::epsilon();
}

inline Index rank_from_singular_values(const Vector& s, double rel_tol) {
  if (s.size() == 0 || s(0) == 0.0) return 0;
  const double cut = rel_tol * s(0);
  Index r = 0;
  while (r < s.size() && s(r) > cut) ++r;
  return r;
}

inline Index numerical_rank(const Matrix& m, std::optional<double> rank_tol = std::nullopt) {
  const double tol = rank_tol.value_or(default_rank_tol(m.rows(), m.cols()));
  return rank_from_singular_values(singular_values(m), tol);
}

/// Moore-Penrose pseudo-inverse by SVD truncation.
inline Matrix pinv(const Matrix& m, std::optional<double> rank_tol = std::nullopt) {
  const Svd d = svd(m);
  const Index r = rank_from_singular_values(d.s, rank_tol.value_or(default_rank_tol(m.rows(), m.cols())));
  if (r == 0) return Matrix::Zero(m.cols(), m.rows());
  return d.V.leftCols(r) * d.s.head(r).cwiseInverse().asDiagonal() * d.U.leftCols(r).transpose();
}

struct OrthProjector {
  Matrix pi;       ///< projector onto the row space of phi
  Matrix pi_perp;  ///< I - pi
};

inline OrthProjector orth_projector(const Matrix& phi) {
  Matrix pi = pinv(phi) * phi;
  pi = 0.5 * (pi + pi.transpose());
  Matrix perp = Matrix::Identity(phi.cols(), phi.cols()) - pi;
  return {std::move(pi), std::move(perp)};
}

/// Row space and null space of m, both from one SVD.
struct RowNullSplit {
  SubspaceBasis row_space;
  SubspaceBasis null_space;
};

inline RowNullSplit row_null_split(const Matrix& m, std::optional<double> rank_tol = std::nullopt) {
  require_finite(m, "nullspace_basis");
  const Index n = m.cols();
  if (n < 1) throw DomainError("nullspace_basis: matrix must have at least one column");
  if (m.rows() == 0) return {SubspaceBasis::empty(n), SubspaceBasis(Matrix::Identity(n, n))};
  Eigen::BDCSVD<Matrix> dec(m, Eigen::ComputeThinU | Eigen::ComputeFullV);
  detail::check_svd(dec, m);
  const Index r = rank_from_singular_values(dec.singularValues(),
                                            rank_tol.value_or(default_rank_tol(m.rows(), m.cols())));
  const Matrix& V = dec.matrixV();
  return {SubspaceBasis(V.leftCols(r)), SubspaceBasis(V.rightCols(n - r))};
}

inline SubspaceBasis nullspace_basis(const Matrix& m, std::optional<double> rank_tol = std::nullopt) {
  return row_null_split(m, rank_tol).null_space;
}

/// Orthonormal basis of the column space of m.
inline SubspaceBasis orthonormal_range(const Matrix& m, std::optional<double> rank_tol = std::nullopt) {
  if (m.cols() == 0) return SubspaceBasis::empty(m.rows());
  const Svd d = svd(m);
  const Index r = rank_from_singular_values(d.s, rank_tol.value_or(default_rank_tol(m.rows(), m.cols())));
  return SubspaceBasis(d.U.leftCols(r));
}

struct Lq {
  Matrix L;  ///< rows x rows, lower triangular, nonnegative diagonal
  Matrix Q;  ///< rows x cols, orthonormal rows
};

/// m = L Q, computed as the transpose of a Householder QR of m^T.
inline Lq lq_decompose(const Matrix& m) {
  require_finite(m, "lq_decompose");
  const Index r = m.rows();
  const Index c = m.cols();
  if (c < r) throw DimensionError("lq_decompose: need cols >= rows, got " + shape_str(r, c));
  Eigen::HouseholderQR<Matrix> qr(m.transpose());
  Matrix R = qr.matrixQR().topRows(r).triangularView<Eigen::Upper>();
  Matrix Qthin = qr.householderQ() * Matrix::Identity(c, r);
  for (Index i = 0; i < r; ++i) {
    if (R(i, i) < 0.0) {
      R.row(i) *= -1.0;
      Qthin.col(i) *= -1.0;
    }
  }
  return {R.transpose(), Qthin.transpose()};
}

/// Principal angles between two subspaces, nondecreasing, in radians.
///
/// Cosine route: arccos of the singular values of a^T b, clamped to [0, 1].
/// Loses accuracy below roughly 1e-8 rad.
inline std::vector<double> principal_angles(const SubspaceBasis& a, const SubspaceBasis& b) {
  if (a.ambient_dim() != b.ambient_dim())
    throw DimensionError("principal_angles: ambient dimensions differ (" + std::to_string(a.ambient_dim()) +
                         " vs " + std::to_string(b.ambient_dim()) + ")");
  if (a.dim() == 0 || b.dim() == 0) throw DomainError("principal_angles: empty subspace");
  const Vector s = singular_values(a.basis().transpose() * b.basis());
  std::vector<double> angles(static_cast<std::size_t>(s.size()));
  for (Index i = 0; i < s.size(); ++i) angles[static_cast<std::size_t>(i)] = std::acos(std::clamp(s(i), 0.0, 1.0));
  std::sort(angles.begin(), angles.end());
  return angles;
}

inline double largest_principal_angle(const SubspaceBasis& a, const SubspaceBasis& b) {
  return principal_angles(a, b).back();
}

/// Largest principal angle between `a` and a subspace B given through an
/// orthonormal basis of its complement, valid when dim a <= dim B:
/// sin(theta_max) = || B_perp^T a ||_2.
inline double largest_principal_angle_via_complement(const SubspaceBasis& a, const SubspaceBasis& b_complement) {
  if (a.ambient_dim() != b_complement.ambient_dim())
    throw DimensionError("largest_principal_angle_via_complement: ambient dimensions differ");
  if (a.dim() == 0) throw DomainError("largest_principal_angle_via_complement: empty subspace");
  if (a.dim() > a.ambient_dim() - b_complement.dim())
    throw DomainError("largest_principal_angle_via_complement: dim a exceeds dim of the complemented subspace");
  if (b_complement.dim() == 0) return 0.0;
  const Vector s = singular_values(b_complement.basis().transpose() * a.basis());
  const double top = s.size() > 0 ? s(0) : 0.0;
  return std::asin(std::clamp(top, 0.0, 1.0));
}

/// Vertical stack of blocks with equal column counts.
inline Matrix vstack(std::initializer_list<const Matrix*> blocks) {
  Index rows = 0;
  Index cols = -1;
  for (const Matrix* b : blocks) {
    if (cols >= 0 && b->cols() != cols)
      throw DimensionError("vstack: column mismatch " + std::to_string(cols) + " vs " + std::to_string(b->cols()));
    cols = b->cols();
    rows += b->rows();
  }
  Matrix out(rows, std::max<Index>(cols, 0));
  Index r = 0;
  for (const Matrix* b : blocks) {
    out.middleRows(r, b->rows()) = *b;
    r += b->rows();
  }
  return out;
}

inline Vector vcat(std::initializer_list<const Vector*> parts) {
  Index n = 0;
  for (const Vector* p : parts) n += p->size();
  Vector out(n);
  Index i = 0;
  for (const Vector* p : parts) {
    out.segment(i, p->size()) = *p;
    i += p->size();
  }
  return out;
}

/// kron(I_blocks, w): block-diagonal weight over a horizon.
inline Matrix block_diag_repeat(const Matrix& w, Index blocks) {
  Matrix out = Matrix::Zero(w.rows() * blocks, w.cols() * blocks);
  for (Index k = 0; k < blocks; ++k) out.block(k * w.rows(), k * w.cols(), w.rows(), w.cols()) = w;
  return out;
}

inline double spectral_radius(const Matrix& a) {
  if (a.rows() != a.cols()) throw DimensionError("spectral_radius: matrix not square");
  if (a.size() == 0) return 0.0;
  return a.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace ddpc
