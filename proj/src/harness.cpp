#include "bbsgd/harness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace bbsgd {

namespace {

struct AlgorithmName {
  Algorithm algorithm;
  std::string_view name;
};

constexpr AlgorithmName kAlgorithmNames[] = {
    {Algorithm::Sgd, "sgd"},        {Algorithm::SvrgI, "svrg-i"}, {Algorithm::SvrgII, "svrg-ii"},
    {Algorithm::SvrgBb, "svrg-bb"}, {Algorithm::SgdBb, "sgd-bb"}, {Algorithm::Sag, "sag"},
    {Algorithm::SagBb, "sag-bb"},   {Algorithm::AdaGrad, "adagrad"},
};

bool is_svrg(Algorithm a) {
  return a == Algorithm::SvrgI || a == Algorithm::SvrgII || a == Algorithm::SvrgBb;
}

}  // namespace

std::string_view to_string(Algorithm algorithm) {
  for (const auto& entry : kAlgorithmNames)
    if (entry.algorithm == algorithm) return entry.name;
  return "unknown";
}

Algorithm parse_algorithm(std::string_view name) {
  for (const auto& entry : kAlgorithmNames)
    if (entry.name == name) return entry.algorithm;
  throw std::invalid_argument("unknown algorithm '" + std::string(name) +
                              "' (expected sgd|svrg-i|svrg-ii|svrg-bb|sgd-bb|sag|sag-bb|adagrad)");
}

bool uses_fixed_step(Algorithm algorithm) {
  return algorithm != Algorithm::SvrgBb && algorithm != Algorithm::SgdBb &&
         algorithm != Algorithm::SagBb;
}

RunConfig<double> resolve_config(const ExperimentSpec& spec, Index n) {
  RunConfig<double> config;
  config.epochs = spec.epochs;
  config.m = spec.m.value_or(static_cast<std::size_t>(is_svrg(spec.algorithm) ? 2 * n : n));
  config.eta0 = spec.eta0;
  config.eta1 = spec.eta1.value_or(0.0);
  // beta = 10/m needs m > 10 to stay inside (0, 1)
  config.beta = spec.beta.value_or(config.m > 10 ? 10.0 / static_cast<double>(config.m) : 0.5);
  config.phi = spec.phi;
  config.seed = spec.seed;
  config.record_every = spec.record_every;
  return config;
}

RunResult<double> run_algorithm(Algorithm algorithm, const Problem<double>& problem,
                                const Dataset<double>& data, const RunConfig<double>& config,
                                double eta, bool smoothing, StepSchedule sgd_schedule) {
  switch (algorithm) {
    case Algorithm::Sgd: return run_sgd(problem, data, sgd_schedule, eta, config);
    case Algorithm::SvrgI: return run_svrg(problem, data, eta, SnapshotOption::I, config);
    case Algorithm::SvrgII: return run_svrg(problem, data, eta, SnapshotOption::II, config);
    case Algorithm::SvrgBb: return run_svrg_bb(problem, data, config);
    case Algorithm::SgdBb: return run_sgd_bb(problem, data, config, smoothing);
    case Algorithm::Sag: return run_sag(problem, data, eta, config);
    case Algorithm::SagBb: return run_sag_bb(problem, data, config, smoothing);
    case Algorithm::AdaGrad: return run_adagrad(problem, data, eta, config);
  }
  throw std::invalid_argument("unknown algorithm");
}

ReferenceSolution compute_reference(const Problem<double>& problem, const Dataset<double>& data,
                                    const ReferenceOptions& options) {
  if (!(options.tol > 0)) throw std::invalid_argument("reference tolerance must be > 0");
  if (options.max_epochs < 1) throw std::invalid_argument("reference epoch cap must be >= 1");
  const auto curvature = estimate_curvature(problem, data);

  RunConfig<double> config;
  config.epochs = options.max_epochs;
  config.m = static_cast<std::size_t>(2 * data.size());
  config.seed = options.seed;
  config.grad_tol = options.tol;
  config.record_every = options.max_epochs;

  // eta0 only drives the first epoch; shrink it if that epoch blows up.
  RunResult<double> run;
  for (const double scale : {0.1, 0.01, 0.001}) {
    config.eta0 = scale / curvature.L;
    run = run_svrg_bb(problem, data, config);
    if (run.status != RunStatus::Diverged) break;
  }
  if (run.status == RunStatus::Diverged)
    throw std::runtime_error("reference solver diverged for every initial step");

  ReferenceSolution solution;
  solution.x_star = std::move(run.x_final);
  solution.f_star = full_objective(problem, data, solution.x_star);
  solution.grad_norm = full_gradient(problem, data, solution.x_star).norm();
  solution.tol = options.tol;
  solution.converged = solution.grad_norm < options.tol;
  solution.provenance = {"svrg-bb", run.epochs_run, options.seed, config.m, config.eta0};
  return solution;
}

ReferenceSolution ReferenceCache::get(const Problem<double>& problem, const Dataset<double>& data,
                                      const ReferenceOptions& options) {
  const Key key{dataset_hash(data), static_cast<int>(problem.kind), problem.lambda, options.tol};
  std::lock_guard lock(mutex_);
  if (const auto it = entries_.find(key); it != entries_.end()) return it->second;
  auto solution = compute_reference(problem, data, options);
  ++computations_;
  return entries_.emplace(key, std::move(solution)).first->second;
}

std::size_t ReferenceCache::computations() const {
  std::lock_guard lock(mutex_);
  return computations_;
}

std::vector<double> default_step_grid() {
  std::vector<double> grid;
  for (int exponent = -4; exponent <= 1; ++exponent)
    for (const double mantissa : {1.0, 2.0, 5.0}) grid.push_back(mantissa * std::pow(10.0, exponent));
  return grid;
}

TuneResult tune_fixed_step(const Problem<double>& problem, const Dataset<double>& data,
                           Algorithm algorithm, std::vector<double> grid,
                           std::size_t budget_epochs, const RunConfig<double>& base,
                           double f_star) {
  if (!uses_fixed_step(algorithm))
    throw std::invalid_argument("tune_fixed_step: " + std::string(to_string(algorithm)) +
                                " does not take a fixed step");
  if (grid.empty()) throw std::invalid_argument("tune_fixed_step: empty grid");
  for (const double eta : grid)
    if (!(eta > 0) || !std::isfinite(eta))
      throw std::invalid_argument("tune_fixed_step: grid steps must be finite and > 0");
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  RunConfig<double> config = base;
  config.epochs = budget_epochs;
  config.record_every = 1;

  TuneResult result;
  double best = std::numeric_limits<double>::infinity();
  bool any = false;
  for (const double eta : grid) {
    const auto run = run_algorithm(algorithm, problem, data, config, eta);
    TunePoint point{eta, std::numeric_limits<double>::infinity(), run.status};
    if (run.status != RunStatus::Diverged) {
      const double last = run.records.empty() ? run.initial_objective : run.records.back().objective;
      point.final_subopt = std::max(last - f_star, kSuboptFloor);
      if (!any || point.final_subopt < best) {
        best = point.final_subopt;
        result.best_eta = eta;
        any = true;
      }
    }
    result.points.push_back(point);
  }
  if (!any) {
    std::ostringstream message;
    message << "tune_fixed_step: every grid step diverged (";
    for (std::size_t k = 0; k < result.points.size(); ++k)
      message << (k ? ", " : "") << "eta=" << result.points[k].eta << ": "
              << to_string(result.points[k].status);
    message << ')';
    throw std::runtime_error(message.str());
  }
  return result;
}

TheoryReport check_theory(const Problem<double>& problem, const Dataset<double>& data,
                          std::uint64_t m, double theta_frac) {
  if (m < 1) throw std::invalid_argument("m must be >= 1");
  TheoryReport report;
  report.curvature = estimate_curvature(problem, data);
  const double mu = report.curvature.mu;
  const double L = report.curvature.L;
  report.m = m;
  report.theta_rate = theta_rate(mu, L);
  report.theta_frac = theta_frac;
  report.theta = theta_frac * report.theta_rate;
  try {
    report.min_m = min_epoch_length(mu, L, theta_frac);
  } catch (const std::overflow_error&) {
    report.min_m.reset();
  }
  report.bounds = svrg_bb_step_bounds(mu, L, m);
  report.alpha_bound = svrg_bb_alpha_bound(mu, L, m);
  report.condition_met = report.min_m && m >= *report.min_m;
  return report;
}

std::string format(const TheoryReport& r) {
  std::ostringstream out;
  out.precision(10);
  out << "mu                = " << r.curvature.mu << '\n'
      << "L                 = " << r.curvature.L << '\n'
      << "L/mu              = " << r.curvature.L / r.curvature.mu << '\n'
      << "theta_rate        = " << r.theta_rate << '\n'
      << "theta             = " << r.theta << " (" << r.theta_frac << " x theta_rate)\n"
      << "min epoch length  = ";
  if (r.min_m) {
    out << *r.min_m << '\n';
  } else {
    out << "> 2^63\n";
  }
  out << "m                 = " << r.m << '\n'
      << "svrg-bb step in   = [" << r.bounds.low << ", " << r.bounds.high << "]";
  if (r.bounds.low == r.bounds.high) out << " (degenerate: mu == L)";
  out << '\n' << "alpha bound       = " << r.alpha_bound << '\n'
      << "verdict           = " << (r.condition_met ? "condition met" : "condition not met")
      << '\n';
  return out.str();
}

}  // namespace bbsgd
