#pragma once

// Independent oracles and helpers shared by the unit and acceptance tests.

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <vector>

#include "bbsgd/model.hpp"

namespace bbsgd::testing {

/// Dense Hessian of F, built from scratch rather than through the library's
/// gradient code.
inline Eigen::MatrixXd dense_hessian(const Problem<double>& problem, const Dataset<double>& data,
                                     const Eigen::VectorXd& x) {
  const Eigen::MatrixXd A = Eigen::MatrixXd(data.features());
  Eigen::MatrixXd H = problem.lambda * Eigen::MatrixXd::Identity(x.size(), x.size());
  for (Index i = 0; i < data.size(); ++i) {
    const double z = data.label(i) * A.row(i).dot(x);
    double curvature;
    if (problem.kind == LossKind::Logistic) {
      const double s = 1.0 / (1.0 + std::exp(-z));
      curvature = s * (1 - s);
    } else {
      curvature = z < 1 ? 2.0 : 0.0;
    }
    H.noalias() += (curvature / double(data.size())) * A.row(i).transpose() * A.row(i);
  }
  return H;
}

inline Eigen::VectorXd dense_gradient(const Problem<double>& problem, const Dataset<double>& data,
                                      const Eigen::VectorXd& x) {
  const Eigen::MatrixXd A = Eigen::MatrixXd(data.features());
  Eigen::VectorXd g = problem.lambda * x;
  for (Index i = 0; i < data.size(); ++i) {
    const double b = data.label(i);
    const double z = b * A.row(i).dot(x);
    const double d = problem.kind == LossKind::Logistic ? -1.0 / (1.0 + std::exp(z))
                                                        : -2.0 * std::max(0.0, 1.0 - z);
    g += (b * d / double(data.size())) * A.row(i).transpose();
  }
  return g;
}

/// Newton's method on the full objective; converges to machine precision on
/// the small strongly convex problems used in the tests.
inline Eigen::VectorXd newton_optimum(const Problem<double>& problem, const Dataset<double>& data,
                                      int iterations = 50) {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(data.dim());
  for (int it = 0; it < iterations; ++it) {
    const Eigen::VectorXd g = dense_gradient(problem, data, x);
    if (g.norm() < 1e-15) break;
    x -= dense_hessian(problem, data, x).ldlt().solve(g);
  }
  return x;
}

/// Closed-form smoothed constant: the geometric mean of eta_j phi(j),
/// j = 2..k, evaluated in long double.
inline double closed_form_c_hat(const std::vector<double>& steps, bool harmonic) {
  long double log_sum = 0;
  for (std::size_t j = 0; j < steps.size(); ++j) {
    const long double phi = harmonic ? static_cast<long double>(j + 2) + 1 : 1;
    log_sum += std::log(static_cast<long double>(steps[j]) * phi);
  }
  return static_cast<double>(std::exp(log_sum / static_cast<long double>(steps.size())));
}

struct LinearFit {
  double slope = 0;
  double intercept = 0;
  double r2 = 0;
};

inline LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += x[i], my += y[i];
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r2 = syy > 0 ? sxy * sxy / (sxx * syy) : 1.0;
  return fit;
}

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : (v[h - 1] + v[h]) / 2;
}

/// Random sparse dataset with awkward values: tiny, huge, negative zero,
/// subnormal, and integers.
inline Dataset<double> random_sparse_dataset(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> rows(1, 12), cols(1, 40), pick(0, 7);
  std::uniform_real_distribution<double> unit(-1, 1);
  std::bernoulli_distribution coin(0.5), keep(0.3);
  const int n = rows(rng), d = cols(rng);
  std::vector<Eigen::Triplet<double, int>> triplets;
  Vector<double> labels(n);
  for (int i = 0; i < n; ++i) {
    labels[i] = coin(rng) ? 1.0 : -1.0;
    for (int j = 0; j < d; ++j) {
      if (!keep(rng)) continue;
      double v;
      switch (pick(rng)) {
        case 0: v = unit(rng) * 1e-300; break;
        case 1: v = unit(rng) * 1e300; break;
        case 2: v = 4.9406564584124654e-324; break;
        case 3: v = std::round(unit(rng) * 100); break;
        case 4: v = -unit(rng) * 1e-5; break;
        default: v = unit(rng); break;
      }
      triplets.emplace_back(i, j, v);
    }
  }
  SparseRows<double> A(n, d);
  A.setFromTriplets(triplets.begin(), triplets.end());
  return Dataset<double>(std::move(A), std::move(labels));
}

}  // namespace bbsgd::testing
