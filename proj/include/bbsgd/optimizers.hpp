#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "bbsgd/bb_step.hpp"
#include "bbsgd/model.hpp"

namespace bbsgd {

// Epoch-structured stochastic optimizers. Every runner is single-threaded over
// its own iterate state and reads Problem/Dataset only, so independent runs
// may share data across threads.
//
// Randomness: one mt19937_64 stream seeded with `seed` is consumed by index
// sampling and nothing else, so every algorithm with the same seed and m
// draws the same i_t sequence. SVRG option II draws its snapshot position
// from a second stream derived from the same seed.

/// Objective value above which a run is declared diverged.
inline constexpr double kDivergenceThreshold = 1e10;

/// Added to sqrt(G) in the AdaGrad denominator.
inline constexpr double kAdaGradEpsilon = 1e-8;

template <std::floating_point Scalar>
struct RunConfig {
  std::size_t epochs = 30;
  std::size_t m = 1;  ///< inner iterations per epoch
  Scalar eta0 = Scalar(0.1);
  Scalar eta1 = 0;  ///< 0 means "same as eta0"
  Scalar beta = Scalar(0.01);
  DecayKind phi = DecayKind::Harmonic;
  std::uint64_t seed = 0;
  std::size_t record_every = 1;
  /// When > 0, full-gradient methods stop once ||grad F(x_tilde)|| < grad_tol.
  Scalar grad_tol = 0;
  /// Keep every snapshot x_tilde_0 .. x_tilde_K in RunResult::iterates.
  bool keep_iterates = false;
  /// Starting point; empty means the origin.
  Vector<Scalar> x0;

  Scalar resolved_eta1() const { return eta1 > 0 ? eta1 : eta0; }
};

template <std::floating_point Scalar>
struct EpochRecord {
  std::size_t k = 0;       ///< epoch index, starting at 0
  Scalar eta_raw = 0;      ///< step produced by the step rule for epoch k
  Scalar eta_applied = 0;  ///< step used by the inner updates of epoch k
  Scalar objective = 0;    ///< F(x_tilde_{k+1}), i.e. after epoch k
  std::uint64_t grad_evals = 0;  ///< cumulative component-gradient evaluations
  double wall_seconds = 0;       ///< cumulative since the run started
  bool fallback_used = false;

  /// Equality over everything except wall time.
  bool same_values(const EpochRecord& o) const {
    return k == o.k && eta_raw == o.eta_raw && eta_applied == o.eta_applied &&
           objective == o.objective && grad_evals == o.grad_evals &&
           fallback_used == o.fallback_used;
  }
};

enum class RunStatus {
  Completed,  ///< ran every requested epoch
  Converged,  ///< stopped early on grad_tol
  Diverged,   ///< objective above threshold or non-finite iterate
};

inline std::string_view to_string(RunStatus status) {
  switch (status) {
    case RunStatus::Completed: return "completed";
    case RunStatus::Converged: return "converged";
    case RunStatus::Diverged: return "diverged";
  }
  return "unknown";
}

template <std::floating_point Scalar>
struct RunResult {
  std::vector<EpochRecord<Scalar>> records;
  Vector<Scalar> x_final;
  RunConfig<Scalar> config;
  RunStatus status = RunStatus::Completed;
  Scalar initial_objective = 0;
  std::size_t epochs_run = 0;
  std::size_t fallback_count = 0;
  std::vector<Vector<Scalar>> iterates;
};

enum class SnapshotOption {
  I,   ///< next snapshot is the last inner iterate
  II,  ///< next snapshot is a uniformly chosen inner iterate x_t, t in 1..m
};

enum class StepSchedule {
  Fixed,       ///< eta every epoch
  Diminishing  ///< eta / (k + 1) in epoch k
};

namespace detail {

inline std::uint64_t snapshot_seed(std::uint64_t seed) {
  // splitmix64 finalizer
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

class IndexSampler {
 public:
  IndexSampler(std::uint64_t seed, Index n) : rng_(seed), dist_(0, n - 1) {}
  Index operator()() { return dist_(rng_); }

 private:
  std::mt19937_64 rng_;
  std::uniform_int_distribution<Index> dist_;
};

template <std::floating_point Scalar>
void validate(const RunConfig<Scalar>& config, const Dataset<Scalar>& data) {
  if (config.epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (config.m < 1) throw std::invalid_argument("m must be >= 1");
  if (config.record_every < 1) throw std::invalid_argument("record_every must be >= 1");
  if (config.x0.size() != 0 && config.x0.size() != data.dim())
    throw std::invalid_argument("x0 has " + std::to_string(config.x0.size()) +
                                " entries, dataset has d = " + std::to_string(data.dim()));
  if (!(config.grad_tol >= 0)) throw std::invalid_argument("grad_tol must be >= 0");
}

template <std::floating_point Scalar>
void require_positive(Scalar value, const char* name) {
  if (!(value > 0) || !std::isfinite(value))
    throw std::invalid_argument(std::string(name) + " must be finite and > 0");
}

template <std::floating_point Scalar>
void require_beta(Scalar beta) {
  if (!(beta > 0 && beta < 1)) throw std::invalid_argument("beta must lie in (0, 1)");
}

/// Per-epoch bookkeeping shared by every runner: objective, divergence
/// check, record stride, snapshots and wall time.
template <std::floating_point Scalar>
class Recorder {
 public:
  Recorder(const Problem<Scalar>& problem, const Dataset<Scalar>& data,
           const RunConfig<Scalar>& config, const Vector<Scalar>& x0)
      : problem_(problem), data_(data), start_(std::chrono::steady_clock::now()) {
    result_.config = config;
    result_.initial_objective = full_objective(problem, data, x0);
    if (config.keep_iterates) result_.iterates.push_back(x0);
  }

  /// Returns false once the run has diverged.
  bool end_epoch(std::size_t k, Scalar eta_raw, Scalar eta_applied, bool fallback,
                 std::uint64_t grad_evals, const Vector<Scalar>& x_tilde) {
    const auto& config = result_.config;
    if (fallback) ++result_.fallback_count;
    const Scalar objective = x_tilde.allFinite()
                                 ? full_objective(problem_, data_, x_tilde)
                                 : std::numeric_limits<Scalar>::infinity();
    if (!(objective <= Scalar(kDivergenceThreshold))) {
      result_.status = RunStatus::Diverged;
      return false;
    }
    result_.epochs_run = k + 1;
    if (config.keep_iterates) result_.iterates.push_back(x_tilde);
    if (k % config.record_every == 0 || k + 1 == config.epochs) {
      const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start_;
      result_.records.push_back(
          {k, eta_raw, eta_applied, objective, grad_evals, elapsed.count(), fallback});
    }
    return true;
  }

  void mark_converged() { result_.status = RunStatus::Converged; }

  RunResult<Scalar> finish(Vector<Scalar> x_final) {
    result_.x_final = std::move(x_final);
    return std::move(result_);
  }

 private:
  const Problem<Scalar>& problem_;
  const Dataset<Scalar>& data_;
  std::chrono::steady_clock::time_point start_;
  RunResult<Scalar> result_;
};

template <std::floating_point Scalar>
Vector<Scalar> starting_point(const RunConfig<Scalar>& config, const Dataset<Scalar>& data) {
  return config.x0.size() == 0 ? Vector<Scalar>::Zero(data.dim()) : config.x0;
}

/// x <- x - eta grad f_i(x) where grad f_i(x) = c a_i + lambda x; c is
/// evaluated before the move and handed back through `coefficient`.
template <std::floating_point Scalar>
void sgd_update(const Problem<Scalar>& problem, const Dataset<Scalar>& data, Index i, Scalar eta,
                Vector<Scalar>& x, Scalar& coefficient) {
  coefficient = gradient_coefficient(problem, data, i, x);
  x *= Scalar(1) - eta * problem.lambda;
  data.axpy(i, -eta * coefficient, x);
}

enum class SvrgStepRule { Fixed, BarzilaiBorwein };

/// Shared body of SVRG (options I/II) and SVRG-BB.
template <std::floating_point Scalar>
RunResult<Scalar> svrg_family(const Problem<Scalar>& problem, const Dataset<Scalar>& data,
                              const RunConfig<Scalar>& config, SvrgStepRule rule,
                              Scalar fixed_eta, SnapshotOption option) {
  validate(config, data);
  const Index n = data.size();
  const std::size_t m = config.m;
  Vector<Scalar> x_tilde = starting_point(config, data);
  Recorder<Scalar> recorder(problem, data, config, x_tilde);
  IndexSampler sample(config.seed, n);
  std::mt19937_64 snapshot_rng(snapshot_seed(config.seed));
  std::uniform_int_distribution<std::size_t> snapshot_pick(1, m);

  Vector<Scalar> x_prev, g_prev, x, chosen;
  Scalar eta = fixed_eta;
  std::uint64_t evals = 0;
  for (std::size_t k = 0; k < config.epochs; ++k) {
    const Vector<Scalar> g = full_gradient(problem, data, x_tilde);
    evals += static_cast<std::uint64_t>(n);
    if (config.grad_tol > 0 && g.norm() < config.grad_tol) {
      recorder.mark_converged();
      break;
    }

    bool fallback = false;
    if (rule == SvrgStepRule::BarzilaiBorwein && k > 0) {
      const auto step = svrg_bb_step(x_tilde, x_prev, g, g_prev, m, eta);
      eta = step.step;
      fallback = step.fallback_used;
    }

    const std::size_t snapshot_at = option == SnapshotOption::II ? snapshot_pick(snapshot_rng) : m;
    const Scalar shrink = Scalar(1) - eta * problem.lambda;
    const Scalar pull = eta * problem.lambda;
    x = x_tilde;
    for (std::size_t t = 0; t < m; ++t) {
      const Index i = sample();
      const Scalar c_x = gradient_coefficient(problem, data, i, x);
      const Scalar c_snapshot = gradient_coefficient(problem, data, i, x_tilde);
      // v = (c_x - c_snapshot) a_i + lambda (x - x_tilde) + g
      x = shrink * x + pull * x_tilde - eta * g;
      data.axpy(i, -eta * (c_x - c_snapshot), x);
      if (t + 1 == snapshot_at && option == SnapshotOption::II) chosen = x;
    }
    evals += 2 * static_cast<std::uint64_t>(m);

    x_prev = std::move(x_tilde);
    g_prev = g;
    x_tilde = option == SnapshotOption::I ? x : chosen;
    if (!recorder.end_epoch(k, eta, eta, fallback, evals, x_tilde)) break;
  }
  return recorder.finish(std::move(x_tilde));
}

/// Inner loop of SAG: a table of per-sample loss-gradient coefficients and
/// the running sum of c_i a_i. The l2 term is applied exactly at the
/// current iterate, so only the data part of each gradient is stored.
template <std::floating_point Scalar>
class SagTable {
 public:
  explicit SagTable(const Dataset<Scalar>& data)
      : data_(data), coefficients_(Vector<Scalar>::Zero(data.size())),
        sum_(Vector<Scalar>::Zero(data.dim())) {}

  void refresh(Index i, Scalar coefficient) {
    data_.axpy(i, coefficient - coefficients_[i], sum_);
    coefficients_[i] = coefficient;
  }

  /// sum_i c_i a_i, maintained incrementally.
  const Vector<Scalar>& sum() const noexcept { return sum_; }

  Vector<Scalar> recomputed_sum() const {
    Vector<Scalar> acc = Vector<Scalar>::Zero(data_.dim());
    for (Index i = 0; i < data_.size(); ++i) data_.axpy(i, coefficients_[i], acc);
    return acc;
  }

 private:
  const Dataset<Scalar>& data_;
  Vector<Scalar> coefficients_;
  Vector<Scalar> sum_;
};

/// x <- x - eta (1/n sum_i y_i) after refreshing y_i at x.
template <std::floating_point Scalar>
void sag_update(const Problem<Scalar>& problem, const Dataset<Scalar>& data, SagTable<Scalar>& table,
                Index i, Scalar eta, Vector<Scalar>& x, Scalar& coefficient) {
  coefficient = gradient_coefficient(problem, data, i, x);
  table.refresh(i, coefficient);
  x = (Scalar(1) - eta * problem.lambda) * x - (eta / Scalar(data.size())) * table.sum();
}

enum class InnerMethod { Sgd, Sag };

/// Shared body of SGD-BB and SAG-BB. Epochs 0 and 1 use eta0 and eta1;
/// from epoch 2 on the raw step comes from the averaged gradients of the
/// two previous epochs and, with smoothing, is replaced by C_hat_k / phi(k).
template <std::floating_point Scalar>
RunResult<Scalar> bb_averaged_family(const Problem<Scalar>& problem, const Dataset<Scalar>& data,
                                     const RunConfig<Scalar>& config, InnerMethod method,
                                     bool smoothing, DecayKind phi) {
  validate(config, data);
  require_positive(config.eta0, "eta0");
  require_positive(config.resolved_eta1(), "eta1");
  require_beta(config.beta);
  const std::size_t m = config.m;
  const Scalar beta = config.beta;

  Vector<Scalar> x_tilde = starting_point(config, data);
  Recorder<Scalar> recorder(problem, data, config, x_tilde);
  IndexSampler sample(config.seed, data.size());
  SagTable<Scalar> table(data);
  SmootherState<Scalar> smoother;

  Vector<Scalar> x_prev, ghat_prev, ghat_cur, ghat_next, x;
  Scalar raw = config.eta0;
  std::uint64_t evals = 0;
  for (std::size_t k = 0; k < config.epochs; ++k) {
    Scalar applied;
    bool fallback = false;
    if (k == 0) {
      raw = applied = config.eta0;
    } else if (k == 1) {
      raw = applied = config.resolved_eta1();
    } else {
      const auto step = sgd_bb_step(x_tilde, x_prev, ghat_cur, ghat_prev, m, raw);
      raw = step.step;
      fallback = step.fallback_used;
      if (smoothing) {
        const auto smoothed = smooth_step(smoother, raw, k, phi);
        smoother = smoothed.state;
        applied = smoothed.step;
      } else {
        applied = raw;
      }
    }

    x = x_tilde;
    ghat_next = Vector<Scalar>::Zero(data.dim());
    for (std::size_t t = 0; t < m; ++t) {
      const Index i = sample();
      // ghat <- beta grad f_i(x_t) + (1 - beta) ghat, with x_t before the move
      ghat_next = (Scalar(1) - beta) * ghat_next + (beta * problem.lambda) * x;
      Scalar c;
      if (method == InnerMethod::Sgd) {
        sgd_update(problem, data, i, applied, x, c);
      } else {
        sag_update(problem, data, table, i, applied, x, c);
      }
      data.axpy(i, beta * c, ghat_next);
    }
    evals += static_cast<std::uint64_t>(m);

    x_prev = std::move(x_tilde);
    x_tilde = x;
    ghat_prev = std::move(ghat_cur);
    ghat_cur = ghat_next;
    if (!recorder.end_epoch(k, raw, applied, fallback, evals, x_tilde)) break;
  }
  return recorder.finish(std::move(x_tilde));
}

}  // namespace detail

/// Plain SGD, x_{t+1} = x_t - eta_k grad f_{i_t}(x_t), with a fixed or
/// eta/(k+1) schedule. eta = 0 is allowed (the iterate never moves).
template <std::floating_point Scalar>
RunResult<Scalar> run_sgd(const Problem<Scalar>& problem, const Dataset<Scalar>& data,
                          StepSchedule schedule, Scalar eta, const RunConfig<Scalar>& config) {
  detail::validate(config, data);
  if (!(eta >= 0) || !std::isfinite(eta)) throw std::invalid_argument("eta must be finite and >= 0");
  Vector<Scalar> x = detail::starting_point(config, data);
  detail::Recorder<Scalar> recorder(problem, data, config, x);
  detail::IndexSampler sample(config.seed, data.size());
  std::uint64_t evals = 0;
  for (std::size_t k = 0; k < config.epochs; ++k) {
    const Scalar eta_k = schedule == StepSchedule::Fixed ? eta : eta / Scalar(k + 1);
    Scalar c;
    for (std::size_t t = 0; t < config.m; ++t) detail::sgd_update(problem, data, sample(), eta_k, x, c);
    evals += config.m;
    if (!recorder.end_epoch(k, eta_k, eta_k, false, evals, x)) break;
  }
  return recorder.finish(std::move(x));
}

/// SVRG with a fixed step. Each epoch costs n + 2m gradient evaluations.
template <std::floating_point Scalar>
RunResult<Scalar> run_svrg(const Problem<Scalar>& problem, const Dataset<Scalar>& data, Scalar eta,
                           SnapshotOption option, const RunConfig<Scalar>& config) {
  detail::require_positive(eta, "eta");
  return detail::svrg_family(problem, data, config, detail::SvrgStepRule::Fixed, eta, option);
}

/// SVRG-BB: epoch 0 uses eta0, epoch k >= 1 uses
///   eta_k = (1/m) ||x_k - x_{k-1}||^2 / ((x_k - x_{k-1})^T (g_k - g_{k-1}))
/// on consecutive snapshots and full gradients, with option-I snapshots.
/// A non-positive denominator keeps the previous step and is recorded.
///
/// With `bypass_bb` every epoch uses eta0, which is SVRG-I.
template <std::floating_point Scalar>
RunResult<Scalar> run_svrg_bb(const Problem<Scalar>& problem, const Dataset<Scalar>& data,
                              const RunConfig<Scalar>& config, bool bypass_bb = false) {
  detail::require_positive(config.eta0, "eta0");
  return detail::svrg_family(problem, data, config,
                             bypass_bb ? detail::SvrgStepRule::Fixed
                                       : detail::SvrgStepRule::BarzilaiBorwein,
                             config.eta0, SnapshotOption::I);
}

/// SGD-BB. The averaged gradient of each epoch is the exponentially
/// weighted recursion ghat <- beta grad f_i(x_t) + (1 - beta) ghat from 0,
/// left unnormalized. With smoothing the applied step is C_hat_k / phi(k)
/// with phi = config.phi.
template <std::floating_point Scalar>
RunResult<Scalar> run_sgd_bb(const Problem<Scalar>& problem, const Dataset<Scalar>& data,
                             const RunConfig<Scalar>& config, bool smoothing = true) {
  return detail::bb_averaged_family(problem, data, config, detail::InnerMethod::Sgd, smoothing,
                                    config.phi);
}

/// SAG with a fixed step, gradient table initialized to zero.
template <std::floating_point Scalar>
RunResult<Scalar> run_sag(const Problem<Scalar>& problem, const Dataset<Scalar>& data, Scalar eta,
                          const RunConfig<Scalar>& config) {
  detail::validate(config, data);
  detail::require_positive(eta, "eta");
  Vector<Scalar> x = detail::starting_point(config, data);
  detail::Recorder<Scalar> recorder(problem, data, config, x);
  detail::IndexSampler sample(config.seed, data.size());
  detail::SagTable<Scalar> table(data);
  std::uint64_t evals = 0;
  for (std::size_t k = 0; k < config.epochs; ++k) {
    Scalar c;
    for (std::size_t t = 0; t < config.m; ++t)
      detail::sag_update(problem, data, table, sample(), eta, x, c);
    evals += config.m;
    if (!recorder.end_epoch(k, eta, eta, false, evals, x)) break;
  }
  return recorder.finish(std::move(x));
}

/// SAG-BB: SAG inner updates with the SGD-BB step rule; smoothing uses
/// phi = 1, i.e. the geometric mean of the BB steps so far.
template <std::floating_point Scalar>
RunResult<Scalar> run_sag_bb(const Problem<Scalar>& problem, const Dataset<Scalar>& data,
                             const RunConfig<Scalar>& config, bool smoothing = true) {
  return detail::bb_averaged_family(problem, data, config, detail::InnerMethod::Sag, smoothing,
                                    DecayKind::Constant);
}

/// Diagonal AdaGrad baseline: G += g*g, x -= eta g / (sqrt(G) + 1e-8).
template <std::floating_point Scalar>
RunResult<Scalar> run_adagrad(const Problem<Scalar>& problem, const Dataset<Scalar>& data,
                              Scalar eta, const RunConfig<Scalar>& config) {
  detail::validate(config, data);
  detail::require_positive(eta, "eta");
  Vector<Scalar> x = detail::starting_point(config, data);
  detail::Recorder<Scalar> recorder(problem, data, config, x);
  detail::IndexSampler sample(config.seed, data.size());
  Vector<Scalar> accumulated = Vector<Scalar>::Zero(data.dim());
  Vector<Scalar> g(data.dim());
  std::uint64_t evals = 0;
  for (std::size_t k = 0; k < config.epochs; ++k) {
    for (std::size_t t = 0; t < config.m; ++t) {
      const Index i = sample();
      g = problem.lambda * x;
      data.axpy(i, gradient_coefficient(problem, data, i, x), g);
      accumulated += g.cwiseAbs2();
      x.array() -= eta * g.array() / (accumulated.array().sqrt() + Scalar(kAdaGradEpsilon));
    }
    evals += config.m;
    if (!recorder.end_epoch(k, eta, eta, false, evals, x)) break;
  }
  return recorder.finish(std::move(x));
}

}  // namespace bbsgd
