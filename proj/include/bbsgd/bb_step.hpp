#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>

#include "bbsgd/dataset.hpp"
#include "bbsgd/errors.hpp"

namespace bbsgd {

/// Relative guard applied to every BB denominator: eps = 1e-14 ||s|| ||y||.
template <std::floating_point Scalar>
constexpr Scalar kDenominatorGuard = Scalar(1e-14);

template <std::floating_point Scalar>
struct GuardedStep {
  Scalar step;
  bool fallback_used;
};

/// ||s||^2 / (s^T y), the least-squares fit of (1/eta) s = y.
template <typename DerivedS, typename DerivedY>
typename DerivedS::Scalar bb1_step(const Eigen::MatrixBase<DerivedS>& s,
                                   const Eigen::MatrixBase<DerivedY>& y) {
  using Scalar = typename DerivedS::Scalar;
  if (s.size() != y.size()) throw std::invalid_argument("bb1_step: s and y differ in length");
  const Scalar sy = s.dot(y);
  const Scalar eps = kDenominatorGuard<Scalar> * s.norm() * y.norm();
  if (!(std::abs(sy) > eps)) throw DegenerateCurvature("bb1_step: s^T y vanishes");
  return s.squaredNorm() / sy;
}

/// s^T y / ||y||^2, the least-squares fit of s = eta y.
template <typename DerivedS, typename DerivedY>
typename DerivedS::Scalar bb2_step(const Eigen::MatrixBase<DerivedS>& s,
                                   const Eigen::MatrixBase<DerivedY>& y) {
  using Scalar = typename DerivedS::Scalar;
  if (s.size() != y.size()) throw std::invalid_argument("bb2_step: s and y differ in length");
  const Scalar yy = y.squaredNorm();
  if (!(yy > std::numeric_limits<Scalar>::min())) throw DegenerateCurvature("bb2_step: y vanishes");
  return s.dot(y) / yy;
}

namespace detail {

template <typename D1, typename D2, typename D3, typename D4>
void check_bb_inputs(const Eigen::MatrixBase<D1>& a, const Eigen::MatrixBase<D2>& b,
                     const Eigen::MatrixBase<D3>& c, const Eigen::MatrixBase<D4>& d,
                     std::size_t m) {
  if (m < 1) throw std::invalid_argument("epoch length m must be >= 1");
  if (a.size() != b.size() || a.size() != c.size() || a.size() != d.size())
    throw std::invalid_argument("BB step inputs differ in length");
}

}  // namespace detail

/// Epoch-level BB step for SVRG: (1/m) ||dx||^2 / (dx^T dg) from two
/// consecutive snapshots and their full gradients. A denominator that does
/// not exceed the guard (including a negative one) returns `fallback`.
template <typename D1, typename D2, typename D3, typename D4>
GuardedStep<typename D1::Scalar> svrg_bb_step(const Eigen::MatrixBase<D1>& x_cur,
                                              const Eigen::MatrixBase<D2>& x_prev,
                                              const Eigen::MatrixBase<D3>& g_cur,
                                              const Eigen::MatrixBase<D4>& g_prev, std::size_t m,
                                              typename D1::Scalar fallback) {
  using Scalar = typename D1::Scalar;
  detail::check_bb_inputs(x_cur, x_prev, g_cur, g_prev, m);
  const Vector<Scalar> s = x_cur - x_prev;
  const Vector<Scalar> y = g_cur - g_prev;
  const Scalar sy = s.dot(y);
  if (!(sy > kDenominatorGuard<Scalar> * s.norm() * y.norm())) return {fallback, true};
  return {s.squaredNorm() / sy / Scalar(m), false};
}

/// SGD-BB variant: the denominator enters as |dx^T (ghat_cur - ghat_prev)|
/// because averaged stochastic gradients can make it negative.
template <typename D1, typename D2, typename D3, typename D4>
GuardedStep<typename D1::Scalar> sgd_bb_step(const Eigen::MatrixBase<D1>& x_cur,
                                             const Eigen::MatrixBase<D2>& x_prev,
                                             const Eigen::MatrixBase<D3>& ghat_cur,
                                             const Eigen::MatrixBase<D4>& ghat_prev,
                                             std::size_t m, typename D1::Scalar fallback) {
  using Scalar = typename D1::Scalar;
  detail::check_bb_inputs(x_cur, x_prev, ghat_cur, ghat_prev, m);
  const Vector<Scalar> s = x_cur - x_prev;
  const Vector<Scalar> y = ghat_cur - ghat_prev;
  const Scalar sy = std::abs(s.dot(y));
  if (!(sy > kDenominatorGuard<Scalar> * s.norm() * y.norm())) return {fallback, true};
  return {s.squaredNorm() / sy / Scalar(m), false};
}

/// phi(k) in the step-size model C / phi(k).
enum class DecayKind {
  Harmonic,  ///< phi(k) = k + 1
  Constant,  ///< phi(k) = 1
};

inline std::string_view to_string(DecayKind kind) {
  return kind == DecayKind::Harmonic ? "harmonic" : "constant";
}

inline DecayKind parse_decay_kind(std::string_view name) {
  if (name == "harmonic") return DecayKind::Harmonic;
  if (name == "constant") return DecayKind::Constant;
  throw std::invalid_argument("unknown decay function '" + std::string(name) +
                              "' (expected harmonic|constant)");
}

template <std::floating_point Scalar>
Scalar decay(DecayKind kind, std::size_t k) {
  return kind == DecayKind::Harmonic ? Scalar(k) + Scalar(1) : Scalar(1);
}

/// Running geometric-mean constant C_hat over the BB steps absorbed so far.
/// `count` is the number of steps absorbed; epoch k has absorbed k - 2.
template <std::floating_point Scalar>
struct SmootherState {
  Scalar c_hat = 1;
  std::size_t count = 0;
};

template <std::floating_point Scalar>
struct SmoothedStep {
  SmootherState<Scalar> state;
  Scalar step;
};

/// Absorbs the raw BB step of epoch k (k >= 2) and returns the smoothed step
/// C_hat_k / phi(k), where C_hat_k = prod_{j=2..k} [eta_j phi(j)]^{1/(k-1)}
/// is the log-domain least-squares fit of eta_j ~ C / phi(j). Updated by
///   C_hat_k = C_hat_{k-1}^{(k-2)/(k-1)} [eta_k phi(k)]^{1/(k-1)}.
template <std::floating_point Scalar>
SmoothedStep<Scalar> smooth_step(SmootherState<Scalar> state, Scalar eta_k, std::size_t k,
                                 DecayKind phi) {
  if (!(eta_k > 0) || !std::isfinite(eta_k))
    throw std::invalid_argument("smooth_step: step must be finite and > 0");
  if (k < 2) throw std::invalid_argument("smooth_step: smoothing starts at epoch 2");
  if (state.count != k - 2)
    throw std::invalid_argument("smooth_step: state has absorbed " + std::to_string(state.count) +
                                " steps, epoch " + std::to_string(k) + " expects " +
                                std::to_string(k - 2));
  const Scalar target = eta_k * decay<Scalar>(phi, k);
  if (state.count == 0) {
    state.c_hat = target;
  } else {
    const Scalar terms = Scalar(state.count + 1);
    state.c_hat = std::pow(state.c_hat, Scalar(state.count) / terms) *
                  std::pow(target, Scalar(1) / terms);
  }
  ++state.count;
  return {state, state.c_hat / decay<Scalar>(phi, k)};
}

}  // namespace bbsgd
