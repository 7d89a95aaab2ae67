#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>
#include <variant>
#include <vector>

#include "bbsgd/data_io.hpp"
#include "bbsgd/model.hpp"
#include "bbsgd/optimizers.hpp"
#include "bbsgd/theory.hpp"

namespace bbsgd {

// Experiment orchestration: reference optima, step-size tuning, metric files
// and theory reports. Everything here works in double precision.

enum class Algorithm { Sgd, SvrgI, SvrgII, SvrgBb, SgdBb, Sag, SagBb, AdaGrad };

std::string_view to_string(Algorithm algorithm);
Algorithm parse_algorithm(std::string_view name);

/// True for algorithms driven by a user-supplied step (sgd, svrg-i/ii, sag, adagrad).
bool uses_fixed_step(Algorithm algorithm);

struct SyntheticSource {
  std::uint64_t seed = 1;
  Index n = 1000;
  Index d = 20;
  double noise = 0.05;
};

struct FileSource {
  std::filesystem::path path;
  ParseOptions options;
};

using DataSource = std::variant<SyntheticSource, FileSource>;

Dataset<double> load_dataset(const DataSource& source);
std::string describe(const DataSource& source);

struct ExperimentSpec {
  DataSource source = SyntheticSource{};
  LossKind kind = LossKind::Logistic;
  double lambda = 1e-2;
  Algorithm algorithm = Algorithm::SvrgBb;
  std::size_t epochs = 30;
  std::optional<std::size_t> m;  ///< default 2n for SVRG variants, n otherwise
  double eta = 0.1;              ///< fixed-step algorithms
  double eta0 = 0.1;             ///< BB algorithms
  std::optional<double> eta1;    ///< default eta0
  std::optional<double> beta;    ///< default 10/m
  DecayKind phi = DecayKind::Harmonic;
  bool smoothing = true;
  StepSchedule sgd_schedule = StepSchedule::Diminishing;
  std::uint64_t seed = 0;
  std::size_t record_every = 1;
  std::string label;
  std::filesystem::path output;  ///< metrics CSV; the JSON sidecar sits next to it
  double reference_tol = 1e-10;
  std::size_t reference_epochs = 200;
};

/// Flat `key = value` configuration. Lines starting with '#' are comments.
using KeyValues = std::map<std::string, std::string, std::less<>>;

KeyValues parse_key_values(std::string_view text);
KeyValues load_key_values(const std::filesystem::path& path);
/// Later maps override earlier ones key by key.
KeyValues merge(KeyValues base, const KeyValues& overrides);

/// Throws std::invalid_argument on unknown keys or malformed values.
ExperimentSpec spec_from_key_values(const KeyValues& values);
KeyValues to_key_values(const ExperimentSpec& spec);

/// RunConfig for `spec` on a dataset with n samples, filling the
/// per-algorithm defaults (m = 2n for SVRG, m = n otherwise, beta = 10/m).
RunConfig<double> resolve_config(const ExperimentSpec& spec, Index n);

RunResult<double> run_algorithm(Algorithm algorithm, const Problem<double>& problem,
                                const Dataset<double>& data, const RunConfig<double>& config,
                                double eta, bool smoothing = true,
                                StepSchedule sgd_schedule = StepSchedule::Diminishing);

// ---------------------------------------------------------------------------
// Reference optimum

struct ReferenceOptions {
  double tol = 1e-10;  ///< target ||grad F(x*)||
  std::size_t max_epochs = 200;
  std::uint64_t seed = 0;
};

struct ReferenceProvenance {
  std::string algorithm;
  std::size_t epochs = 0;
  std::uint64_t seed = 0;
  std::size_t m = 0;
  double eta0 = 0;
};

struct ReferenceSolution {
  Vector<double> x_star;
  double f_star = 0;
  double grad_norm = 0;
  double tol = 0;
  bool converged = false;
  ReferenceProvenance provenance;
};

/// Runs self-tuning SVRG-BB (m = 2n) until ||grad F|| < tol or the epoch cap.
/// A capped run returns its last iterate with converged = false.
ReferenceSolution compute_reference(const Problem<double>& problem, const Dataset<double>& data,
                                    const ReferenceOptions& options = {});

/// Thread-safe memo of reference solutions keyed by (dataset hash, loss, lambda, tol).
class ReferenceCache {
 public:
  ReferenceSolution get(const Problem<double>& problem, const Dataset<double>& data,
                        const ReferenceOptions& options = {});
  std::size_t computations() const;

 private:
  using Key = std::tuple<std::uint64_t, int, double, double>;
  mutable std::mutex mutex_;
  std::map<Key, ReferenceSolution> entries_;
  std::size_t computations_ = 0;
};

// ---------------------------------------------------------------------------
// Metrics

/// Sub-optimality values are floored here for log-scale plotting.
inline constexpr double kSuboptFloor = 1e-16;

struct MetricsRow {
  std::size_t epoch = 0;
  double eta_raw = 0;
  double eta_applied = 0;
  double objective = 0;
  double subopt = 0;
  std::uint64_t grad_evals = 0;
  double wall_seconds = 0;
  bool fallback = false;
};

inline constexpr std::string_view kMetricsHeader =
    "epoch,eta_raw,eta_applied,objective,subopt,grad_evals,wall_seconds,fallback";

std::vector<MetricsRow> metrics_rows(const RunResult<double>& run, double f_star);
void write_metrics_csv(std::ostream& out, const std::vector<MetricsRow>& rows);
/// Throws std::invalid_argument on a malformed file.
std::vector<MetricsRow> read_metrics_csv(std::istream& in);

/// 17 significant digits, enough to read every double back exactly.
std::string format_real(double value);

// ---------------------------------------------------------------------------
// Tuning

struct TunePoint {
  double eta = 0;
  double final_subopt = 0;
  RunStatus status = RunStatus::Completed;
};

struct TuneResult {
  double best_eta = 0;
  std::vector<TunePoint> points;
};

/// {1, 2, 5} x 10^k for k = -4..1.
std::vector<double> default_step_grid();

/// Runs a fixed-step algorithm for `budget_epochs` at every grid step and
/// returns the one with the lowest final sub-optimality; ties go to the
/// smaller step. Throws std::runtime_error when every grid point diverges.
TuneResult tune_fixed_step(const Problem<double>& problem, const Dataset<double>& data,
                           Algorithm algorithm, std::vector<double> grid,
                           std::size_t budget_epochs, const RunConfig<double>& base,
                           double f_star);

// ---------------------------------------------------------------------------
// Experiments

struct ExperimentOutcome {
  RunResult<double> run;
  ReferenceSolution reference;
  std::vector<MetricsRow> rows;
  std::filesystem::path csv_path;
  std::filesystem::path json_path;
};

/// Loads data, computes (or reuses) the reference optimum, runs the
/// algorithm and, when spec.output is set, writes the metrics CSV and a
/// JSON sidecar with the configuration and reference provenance.
ExperimentOutcome run_experiment(const ExperimentSpec& spec, ReferenceCache& cache);

struct CompareOutcome {
  std::vector<std::string> series;
  std::vector<std::size_t> rows_per_series;
  std::vector<RunStatus> statuses;
  double f_star = 0;
};

/// Runs >= 2 specs over one (dataset, loss, lambda) against a single
/// reference and writes long-format `series,epoch,subopt,eta_applied`.
CompareOutcome compare(const std::vector<ExperimentSpec>& specs, std::ostream& out,
                       ReferenceCache& cache);

// ---------------------------------------------------------------------------
// Theory report

struct TheoryReport {
  CurvatureEstimates<double> curvature;
  std::uint64_t m = 0;
  double theta_rate = 0;
  double theta_frac = 0.9;
  double theta = 0;
  std::optional<std::uint64_t> min_m;  ///< empty when the bound exceeds 2^63
  StepBounds<double> bounds;
  double alpha_bound = 0;
  bool condition_met = false;
};

TheoryReport check_theory(const Problem<double>& problem, const Dataset<double>& data,
                          std::uint64_t m, double theta_frac = 0.9);
std::string format(const TheoryReport& report);

}  // namespace bbsgd
