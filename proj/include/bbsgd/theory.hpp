#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>

#include "bbsgd/model.hpp"

namespace bbsgd {

// Linear-convergence constants for SVRG (option I and II) and SVRG-BB.
// All functions are pure and throw std::domain_error outside their domain.

namespace detail {

template <std::floating_point Scalar>
void check_mu_L(Scalar mu, Scalar L) {
  if (!(mu > 0) || !(L >= mu) || !std::isfinite(L))
    throw std::domain_error("curvature constants must satisfy 0 < mu <= L");
}

}  // namespace detail

/// Per-epoch contraction of E||x_tilde - x*||^2 for SVRG-I and SVRG-BB:
///   (1 - 2 eta mu (1 - eta L))^m + 4 eta L^2 / (mu (1 - eta L)),
/// valid for 0 < eta < 1/L.
template <std::floating_point Scalar>
Scalar alpha_svrg_i(Scalar eta, Scalar mu, Scalar L, std::uint64_t m) {
  detail::check_mu_L(mu, L);
  if (m < 1) throw std::domain_error("m must be >= 1");
  if (!(eta > 0) || !(eta * L < 1)) throw std::domain_error("alpha_svrg_i requires 0 < eta < 1/L");
  const Scalar shrink = Scalar(1) - eta * L;
  return std::pow(Scalar(1) - 2 * eta * mu * shrink, Scalar(m)) +
         4 * eta * L * L / (mu * shrink);
}

/// Contraction of E[F(x_tilde) - F*] for SVRG-II,
///   1 / (mu eta (1 - 2 L eta) m) + 2 L eta / (1 - 2 L eta),
/// valid for 0 < eta < 1/(2L).
template <std::floating_point Scalar>
Scalar alpha_svrg_ii(Scalar eta, Scalar mu, Scalar L, std::uint64_t m) {
  detail::check_mu_L(mu, L);
  if (m < 1) throw std::domain_error("m must be >= 1");
  if (!(eta > 0) || !(2 * L * eta < 1))
    throw std::domain_error("alpha_svrg_ii requires 0 < eta < 1/(2L)");
  const Scalar denom = Scalar(1) - 2 * L * eta;
  return (Scalar(1) / (Scalar(m) * mu * eta) + 2 * L * eta) / denom;
}

/// theta = (1 - exp(-2 mu / L)) / 2, always in (0, 1/2).
template <std::floating_point Scalar>
Scalar theta_rate(Scalar mu, Scalar L) {
  detail::check_mu_L(mu, L);
  return -std::expm1(-2 * mu / L) / 2;
}

/// Smallest integer m with
///   m > max{ 2 / (log(1 - 2 theta) + 2 mu/L),  4 L^2 / (theta mu^2) + L/mu }
/// where theta = theta_frac * theta_rate(mu, L). At theta_frac = 1 the first
/// denominator is exactly zero, so theta_frac must lie in (0, 1).
template <std::floating_point Scalar>
std::uint64_t min_epoch_length(Scalar mu, Scalar L, Scalar theta_frac = Scalar(0.9)) {
  detail::check_mu_L(mu, L);
  if (!(theta_frac > 0) || !(theta_frac < 1))
    throw std::domain_error("theta_frac must lie strictly inside (0, 1)");
  const Scalar theta = theta_frac * theta_rate(mu, L);
  const Scalar ratio = mu / L;
  const Scalar first = 2 / (std::log1p(-2 * theta) + 2 * ratio);
  const Scalar second = 4 / (theta * ratio * ratio) + 1 / ratio;
  const Scalar bound = std::max(first, second);
  if (!(bound < Scalar(std::numeric_limits<std::int64_t>::max())))
    throw std::overflow_error("minimum epoch length exceeds 2^63");
  return static_cast<std::uint64_t>(std::floor(bound)) + 1;
}

template <std::floating_point Scalar>
struct StepBounds {
  Scalar low;
  Scalar high;
};

/// Every SVRG-BB step computed from exact full gradients lies in
/// [1/(m L), 1/(m mu)].
template <std::floating_point Scalar>
StepBounds<Scalar> svrg_bb_step_bounds(Scalar mu, Scalar L, std::uint64_t m) {
  detail::check_mu_L(mu, L);
  if (m < 1) throw std::domain_error("m must be >= 1");
  return {Scalar(1) / (Scalar(m) * L), Scalar(1) / (Scalar(m) * mu)};
}

/// Bound on alpha_k over every step in svrg_bb_step_bounds:
///   exp(-2 mu/L + 2/m) + 4 L^2 / (m mu^2 - L mu).
/// Infinite when m <= L/mu, where the bound says nothing.
template <std::floating_point Scalar>
Scalar svrg_bb_alpha_bound(Scalar mu, Scalar L, std::uint64_t m) {
  detail::check_mu_L(mu, L);
  const Scalar mm = Scalar(m);
  const Scalar denom = mm * mu * mu - L * mu;
  if (!(denom > 0)) return std::numeric_limits<Scalar>::infinity();
  return std::exp(-2 * mu / L + 2 / mm) + 4 * L * L / denom;
}

template <std::floating_point Scalar>
struct TheoryConstants {
  Scalar mu;
  Scalar L;
  std::uint64_t m;
  Scalar theta;  ///< theta_frac * theta_rate(mu, L)
  Scalar alpha;  ///< svrg_bb_alpha_bound(mu, L, m)
};

template <std::floating_point Scalar>
TheoryConstants<Scalar> theory_constants(const CurvatureEstimates<Scalar>& curvature,
                                         std::uint64_t m, Scalar theta_frac = Scalar(0.9)) {
  if (!(theta_frac > 0) || !(theta_frac < 1))
    throw std::domain_error("theta_frac must lie strictly inside (0, 1)");
  return {curvature.mu, curvature.L, m, theta_frac * theta_rate(curvature.mu, curvature.L),
          svrg_bb_alpha_bound(curvature.mu, curvature.L, m)};
}

}  // namespace bbsgd
