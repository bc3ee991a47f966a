#pragma once

// Ground-truth stochastic LTI plant: state-space and innovation forms,
// open- and closed-loop simulation, and the excitation/reference signals.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>

#include "ddpc/errors.hpp"
#include "ddpc/linalg.hpp"
#include "ddpc/random.hpp"

namespace ddpc {

/// x_{t+1} = A x_t + B u_t + w_t,  y_t = C x_t + D u_t + v_t,
/// w ~ N(0, sigma_w), v ~ N(0, sigma_v).
struct SystemModel {
  Matrix A, B, C, D;
  Matrix sigma_w, sigma_v;

  Index n() const { return A.rows(); }
  Index n_u() const { return B.cols(); }
  Index n_y() const { return C.rows(); }

  void validate() const {
    const Index nx = A.rows();
    require_shape(A, nx, nx, "SystemModel.A");
    require_shape(B, nx, B.cols(), "SystemModel.B");
    require_shape(C, C.rows(), nx, "SystemModel.C");
    require_shape(D, C.rows(), B.cols(), "SystemModel.D");
    require_shape(sigma_w, nx, nx, "SystemModel.sigma_w");
    require_shape(sigma_v, C.rows(), C.rows(), "SystemModel.sigma_v");
    for (const Matrix* m : {&A, &B, &C, &D, &sigma_w, &sigma_v}) require_finite(*m, "SystemModel");
    check_psd(sigma_w, "sigma_w");
    check_psd(sigma_v, "sigma_v");
  }

 private:
  static void check_psd(const Matrix& s, const char* name) {
    if ((s - s.transpose()).cwiseAbs().maxCoeff() > 1e-12)
      throw DomainError(std::string("SystemModel.") + name + " is not symmetric");
    if (s.size() > 0 && Eigen::SelfAdjointEigenSolver<Matrix>(s).eigenvalues().minCoeff() < -1e-12)
      throw DomainError(std::string("SystemModel.") + name + " is not positive semidefinite");
  }
};

/// Two-state SISO plant used in the numerical study (sigma_w = 5e-3, sigma_v = 2e-3).
inline SystemModel paper_sec5_system() {
  SystemModel s;
  s.A.resize(2, 2);
  s.A << 0.7326, -0.0861, 0.1722, 0.9909;
  s.B.resize(2, 1);
  s.B << 0.0609, 0.0064;
  s.C.resize(1, 2);
  s.C << 0.0, 1.4142;
  s.D = Matrix::Zero(1, 1);
  const double sw = 5e-3;
  const double sv = 2e-3;
  s.sigma_w = sw * sw * Matrix::Identity(2, 2);
  s.sigma_v = Matrix::Constant(1, 1, sv * sv);
  return s;
}

inline SystemModel without_noise(SystemModel s) {
  s.sigma_w.setZero();
  s.sigma_v.setZero();
  return s;
}

enum class LoopMode { Unknown, Open, Closed };

inline const char* to_string(LoopMode m) {
  switch (m) {
    case LoopMode::Open: return "open";
    case LoopMode::Closed: return "closed";
    default: return "unknown";
  }
}

/// Time-indexed signals, one column per time step.
struct Trajectory {
  Matrix u;                     ///< n_u x T
  Matrix y;                     ///< n_y x T
  std::optional<Matrix> x;      ///< true state, n x T
  std::optional<Matrix> e;      ///< innovations, n_y x T
  std::optional<Matrix> yhat;   ///< one-step predictions, n_y x T
  std::optional<Matrix> xhat;   ///< filter state estimates x̂_t, n x T
  std::optional<Vector> x_final;  ///< state after the last step (x_T)
  std::uint64_t seed = 0;
  LoopMode loop_mode = LoopMode::Unknown;

  Index length() const { return u.cols(); }
  Index n_u() const { return u.rows(); }
  Index n_y() const { return y.rows(); }

  void validate() const {
    const Index T = u.cols();
    auto check = [&](const Matrix& m, const char* name) {
      if (m.cols() != T)
        throw DimensionError(std::string("Trajectory.") + name + " has " + std::to_string(m.cols()) +
                             " samples, expected " + std::to_string(T));
      require_finite(m, std::string("Trajectory.") + name);
    };
    check(y, "y");
    if (x) check(*x, "x");
    if (e) check(*e, "e");
    if (yhat) check(*yhat, "yhat");
    if (xhat) check(*xhat, "xhat");
  }

  /// Samples [begin, end).
  Trajectory slice(Index begin, Index end) const {
    if (begin < 0 || end > length() || begin > end)
      throw IndexError("Trajectory::slice: [" + std::to_string(begin) + ", " + std::to_string(end) +
                       ") outside length " + std::to_string(length()));
    const Index n = end - begin;
    Trajectory t;
    t.u = u.middleCols(begin, n);
    t.y = y.middleCols(begin, n);
    if (x) t.x = x->middleCols(begin, n);
    if (e) t.e = e->middleCols(begin, n);
    if (yhat) t.yhat = yhat->middleCols(begin, n);
    if (xhat) t.xhat = xhat->middleCols(begin, n);
    if (end == length()) t.x_final = x_final;
    t.seed = seed;
    t.loop_mode = loop_mode;
    return t;
  }
};

enum class SignalKind { SquareWave, Sinusoid, WhiteNoise, Constant };

struct SignalSpec {
  SignalKind kind = SignalKind::Constant;
  Index period = 1;
  double amplitude = 0.0;
  double noise_variance = 0.0;
  Index length = 0;

  void validate() const {
    if ((kind == SignalKind::SquareWave || kind == SignalKind::Sinusoid) && period < 1)
      throw DomainError("SignalSpec.period must be >= 1");
    if (noise_variance < 0.0) throw DomainError("SignalSpec.noise_variance must be >= 0");
    if (length < 0) throw DomainError("SignalSpec.length must be >= 0");
  }
};

/// Deterministic part plus additive N(0, noise_variance) per sample. The square
/// wave starts at +amplitude and switches every period/2 steps.
inline Vector generate_signal(const SignalSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  const double sd = std::sqrt(spec.noise_variance);
  Vector s(spec.length);
  for (Index t = 0; t < spec.length; ++t) {
    double base = 0.0;
    switch (spec.kind) {
      case SignalKind::SquareWave:
        base = (t % spec.period) < spec.period / 2 ? spec.amplitude : -spec.amplitude;
        break;
      case SignalKind::Sinusoid:
        base = spec.amplitude * std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / static_cast<double>(spec.period));
        break;
      case SignalKind::WhiteNoise:
        base = 0.0;
        break;
      case SignalKind::Constant:
        base = spec.amplitude;
        break;
    }
    s(t) = base + (sd > 0.0 ? sd * rng.normal() : 0.0);
  }
  return s;
}

/// Stateful plant with its own noise stream. Each step draws w_t then v_t.
class Plant {
 public:
  struct Noise {
    Vector w;
    Vector v;
  };

  Plant(SystemModel sys, Vector x0, std::uint64_t seed)
      : sys_(std::move(sys)), x_(std::move(x0)), rng_(seed), w_(sys_.sigma_w), v_(sys_.sigma_v) {
    sys_.validate();
    if (x_.size() != sys_.n()) throw DimensionError("Plant: x0 has size " + std::to_string(x_.size()));
  }

  const SystemModel& system() const { return sys_; }
  const Vector& state() const { return x_; }

  Noise draw_noise() {
    Noise n;
    n.w = w_.draw(rng_);
    n.v = v_.draw(rng_);
    return n;
  }

  /// Applies u_t: returns y_t = C x_t + D u_t + v_t and advances the state.
  Vector step(const Vector& u) {
    if (u.size() != sys_.n_u()) throw DimensionError("Plant::step: input has size " + std::to_string(u.size()));
    const Noise n = draw_noise();
    Vector y = sys_.C * x_ + sys_.D * u + n.v;
    x_ = sys_.A * x_ + sys_.B * u + n.w;
    return y;
  }

  /// SISO static feedback u_t = gain (r_t - y_t) on the current noisy measurement.
  /// Resolves the algebraic loop when D != 0. Returns (u_t, y_t).
  std::pair<double, double> step_feedback(double gain, double r) {
    if (sys_.n_u() != 1 || sys_.n_y() != 1)
      throw DimensionError("Plant::step_feedback: scalar feedback needs a SISO system");
    const Noise n = draw_noise();
    const double y_free = (sys_.C * x_)(0) + n.v(0);
    const double d = sys_.D(0, 0);
    const double denom = 1.0 + gain * d;
    if (denom == 0.0) throw NumericalError("Plant::step_feedback: ill-posed loop, 1 + gain*D = 0");
    const double u = gain * (r - y_free) / denom;
    const double y = y_free + d * u;
    x_ = sys_.A * x_ + sys_.B * Vector::Constant(1, u) + n.w;
    return {u, y};
  }

 private:
  SystemModel sys_;
  Vector x_;
  Rng rng_;
  GaussianSampler w_;
  GaussianSampler v_;
};

inline Trajectory simulate_open_loop(const SystemModel& sys, const Matrix& u, const Vector& x0, std::uint64_t seed) {
  sys.validate();
  if (u.rows() != sys.n_u()) throw DimensionError("simulate_open_loop: input has " + std::to_string(u.rows()) + " channels");
  if (u.cols() == 0) throw DimensionError("simulate_open_loop: empty input sequence");
  Plant plant(sys, x0, seed);
  const Index T = u.cols();
  Trajectory tr;
  tr.u = u;
  tr.y.resize(sys.n_y(), T);
  tr.x = Matrix(sys.n(), T);
  for (Index t = 0; t < T; ++t) {
    tr.x->col(t) = plant.state();
    tr.y.col(t) = plant.step(u.col(t));
  }
  tr.x_final = plant.state();
  tr.seed = seed;
  tr.loop_mode = LoopMode::Open;
  return tr;
}

inline Trajectory simulate_closed_loop(const SystemModel& sys, double feedback_gain, const Vector& r, const Vector& x0,
                                       std::uint64_t seed) {
  sys.validate();
  if (sys.n_u() != 1 || sys.n_y() != 1)
    throw DimensionError("simulate_closed_loop: scalar feedback gain requires a SISO system");
  if (r.size() == 0) throw DimensionError("simulate_closed_loop: empty reference");
  Plant plant(sys, x0, seed);
  const Index T = r.size();
  Trajectory tr;
  tr.u.resize(1, T);
  tr.y.resize(1, T);
  tr.x = Matrix(sys.n(), T);
  for (Index t = 0; t < T; ++t) {
    tr.x->col(t) = plant.state();
    const auto [u, y] = plant.step_feedback(feedback_gain, r(t));
    tr.u(0, t) = u;
    tr.y(0, t) = y;
  }
  tr.x_final = plant.state();
  tr.seed = seed;
  tr.loop_mode = LoopMode::Closed;
  return tr;
}

/// x_{t+1} = A x_t + B u_t + K e_t,  y_t = C x_t + D u_t + e_t.
struct InnovationModel {
  Matrix A, B, C, D, K;
};

inline InnovationModel innovation_form(const SystemModel& sys, const Matrix& K) {
  require_shape(K, sys.n(), sys.n_y(), "innovation_form: K");
  return {sys.A, sys.B, sys.C, sys.D, K};
}

inline Trajectory simulate_innovation(const InnovationModel& m, const Matrix& u, const Matrix& e, const Vector& x0) {
  if (u.cols() != e.cols()) throw DimensionError("simulate_innovation: u and e lengths differ");
  require_shape(u, m.B.cols(), u.cols(), "simulate_innovation: u");
  require_shape(e, m.C.rows(), e.cols(), "simulate_innovation: e");
  const Index T = u.cols();
  Trajectory tr;
  tr.u = u;
  tr.e = e;
  tr.y.resize(m.C.rows(), T);
  tr.x = Matrix(m.A.rows(), T);
  Vector x = x0;
  for (Index t = 0; t < T; ++t) {
    tr.x->col(t) = x;
    tr.y.col(t) = m.C * x + m.D * u.col(t) + e.col(t);
    x = m.A * x + m.B * u.col(t) + m.K * e.col(t);
  }
  tr.x_final = x;
  return tr;
}

}  // namespace ddpc
