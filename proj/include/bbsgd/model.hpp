#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <string_view>

#include "bbsgd/dataset.hpp"

namespace bbsgd {

enum class LossKind { Logistic, SquaredHinge };

inline std::string_view to_string(LossKind kind) {
  return kind == LossKind::Logistic ? "lr" : "svm";
}

inline LossKind parse_loss_kind(std::string_view name) {
  if (name == "lr" || name == "logistic") return LossKind::Logistic;
  if (name == "svm" || name == "squared-hinge") return LossKind::SquaredHinge;
  throw std::invalid_argument("unknown loss kind '" + std::string(name) + "' (expected lr|svm)");
}

/// An l2-regularized finite-sum objective
///   F(x) = 1/n sum_i loss(b_i a_i^T x) + lambda/2 ||x||^2.
template <std::floating_point Scalar>
struct Problem {
  LossKind kind = LossKind::Logistic;
  Scalar lambda = 0;

  Problem() = default;
  Problem(LossKind k, Scalar l) : kind(k), lambda(l) {
    if (!(lambda >= 0) || !std::isfinite(lambda))
      throw std::invalid_argument("lambda must be finite and >= 0");
  }
};

template <std::floating_point Scalar>
struct CurvatureEstimates {
  Scalar mu;  ///< strong convexity modulus of F
  Scalar L;   ///< Lipschitz bound on every component gradient
};

namespace detail {

template <typename Derived>
void check_dim(const Eigen::MatrixBase<Derived>& x, Index d) {
  if (x.size() != d)
    throw std::invalid_argument("dimension mismatch: x has " + std::to_string(x.size()) +
                                " entries, dataset has d = " + std::to_string(d));
}

}  // namespace detail

/// Scalar loss as a function of the margin z = b a^T x.
template <std::floating_point Scalar>
Scalar margin_loss(LossKind kind, Scalar z) {
  if (kind == LossKind::Logistic) {
    return z >= 0 ? std::log1p(std::exp(-z)) : -z + std::log1p(std::exp(z));
  }
  const Scalar h = std::max(Scalar(0), Scalar(1) - z);
  return h * h;
}

/// d/dz of margin_loss. The squared hinge is C^1, so the kink z = 1 gives 0.
template <std::floating_point Scalar>
Scalar margin_loss_derivative(LossKind kind, Scalar z) {
  if (kind == LossKind::Logistic) {
    // -sigma(-z) = -1 / (1 + e^z)
    if (z >= 0) {
      const Scalar e = std::exp(-z);
      return -e / (Scalar(1) + e);
    }
    return Scalar(-1) / (Scalar(1) + std::exp(z));
  }
  return Scalar(-2) * std::max(Scalar(0), Scalar(1) - z);
}

/// Coefficient c with grad f_i(x) = c a_i + lambda x. Hot path, no checks.
template <std::floating_point Scalar, typename Derived>
Scalar gradient_coefficient(const Problem<Scalar>& problem, const Dataset<Scalar>& data, Index i,
                            const Eigen::MatrixBase<Derived>& x) {
  const Scalar b = data.label(i);
  return b * margin_loss_derivative(problem.kind, b * data.dot(i, x));
}

template <std::floating_point Scalar, typename Derived>
Scalar component_loss(const Problem<Scalar>& problem, const Dataset<Scalar>& data, Index i,
                      const Eigen::MatrixBase<Derived>& x) {
  data.check_index(i);
  detail::check_dim(x, data.dim());
  const Scalar z = data.label(i) * data.dot(i, x);
  return margin_loss(problem.kind, z) + problem.lambda / 2 * x.squaredNorm();
}

/// Dense gradient of f_i at x.
template <std::floating_point Scalar, typename Derived>
Vector<Scalar> component_gradient(const Problem<Scalar>& problem, const Dataset<Scalar>& data,
                                  Index i, const Eigen::MatrixBase<Derived>& x) {
  data.check_index(i);
  detail::check_dim(x, data.dim());
  Vector<Scalar> g = problem.lambda * x;
  data.axpy(i, gradient_coefficient(problem, data, i, x), g);
  return g;
}

/// F(x): mean of the component losses, summed in ascending sample order.
template <std::floating_point Scalar, typename Derived>
Scalar full_objective(const Problem<Scalar>& problem, const Dataset<Scalar>& data,
                      const Eigen::MatrixBase<Derived>& x) {
  detail::check_dim(x, data.dim());
  Scalar acc(0);
  for (Index i = 0; i < data.size(); ++i)
    acc += margin_loss(problem.kind, data.label(i) * data.dot(i, x));
  return acc / Scalar(data.size()) + problem.lambda / 2 * x.squaredNorm();
}

/// grad F(x) = 1/n sum_i c_i a_i + lambda x, accumulated in ascending order.
template <std::floating_point Scalar, typename Derived>
Vector<Scalar> full_gradient(const Problem<Scalar>& problem, const Dataset<Scalar>& data,
                             const Eigen::MatrixBase<Derived>& x) {
  detail::check_dim(x, data.dim());
  Vector<Scalar> acc = Vector<Scalar>::Zero(data.dim());
  for (Index i = 0; i < data.size(); ++i)
    data.axpy(i, gradient_coefficient(problem, data, i, x), acc);
  acc /= Scalar(data.size());
  acc += problem.lambda * x;
  return acc;
}

/// mu = lambda; L from the closed-form smoothness of each loss:
/// logistic has loss'' <= 1/4, squared hinge has loss'' <= 2.
template <std::floating_point Scalar>
CurvatureEstimates<Scalar> estimate_curvature(const Problem<Scalar>& problem,
                                              const Dataset<Scalar>& data) {
  if (!(problem.lambda > 0))
    throw std::domain_error("lambda = 0: objective is not strongly convex, no mu estimate");
  Scalar max_sq(0);
  for (Index i = 0; i < data.size(); ++i) max_sq = std::max(max_sq, data.squared_norm(i));
  const Scalar scale = problem.kind == LossKind::Logistic ? Scalar(0.25) : Scalar(2);
  return {problem.lambda, scale * max_sq + problem.lambda};
}

}  // namespace bbsgd
