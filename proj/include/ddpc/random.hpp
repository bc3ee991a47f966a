#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

#include "ddpc/linalg.hpp"

namespace ddpc {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed for an independent stream identified by (master, path...). Depends only
/// on its arguments, so trial order and worker count never change a stream.
inline std::uint64_t stream_key(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
  std::uint64_t h = splitmix64(master);
  for (std::uint64_t p : path) h = splitmix64(h ^ splitmix64(p + 0x632be59bd9b4e019ULL));
  return h;
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double normal() { return normal_(engine_); }

  Vector standard_normal(Index n) {
    Vector v(n);
    for (Index i = 0; i < n; ++i) v(i) = normal();
    return v;
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

/// Draws N(0, sigma) vectors through a square-root factor F with F F^T = sigma.
/// Cholesky when sigma is positive definite, symmetric eigendecomposition otherwise.
class GaussianSampler {
 public:
  GaussianSampler() = default;
  explicit GaussianSampler(const Matrix& sigma) {
    if (sigma.rows() != sigma.cols()) throw DimensionError("GaussianSampler: covariance must be square");
    Eigen::LLT<Matrix> llt(sigma);
    if (llt.info() == Eigen::Success) {
      factor_ = llt.matrixL();
    } else {
      Eigen::SelfAdjointEigenSolver<Matrix> eig(sigma);
      factor_ = eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
    }
  }

  Index dim() const { return factor_.rows(); }
  const Matrix& factor() const { return factor_; }

  Vector draw(Rng& rng) const { return factor_ * rng.standard_normal(factor_.cols()); }

 private:
  Matrix factor_;
};

}  // namespace ddpc
