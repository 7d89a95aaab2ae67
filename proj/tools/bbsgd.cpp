// bbsgd: command-line front end for the experiment harness.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "bbsgd/errors.hpp"
#include "bbsgd/harness.hpp"

namespace {

using namespace bbsgd;

enum ExitCode { kOk = 0, kUsage = 1, kNotConverged = 2, kIo = 3 };

const std::vector<std::pair<std::string, std::string>> kSpecFlags = {
    {"data", "LIBSVM file (.gz accepted); synthetic data when absent"},
    {"dim", "explicit feature dimension"},
    {"zero-one-labels", "map label 0 to -1 (on/off)"},
    {"synthetic-n", "synthetic sample count"},
    {"synthetic-d", "synthetic dimension"},
    {"synthetic-noise", "synthetic label flip probability"},
    {"synthetic-seed", "synthetic data seed"},
    {"loss", "lr | svm"},
    {"lambda", "l2 regularization weight"},
    {"algo", "sgd | svrg-i | svrg-ii | svrg-bb | sgd-bb | sag | sag-bb | adagrad"},
    {"epochs", "outer iterations"},
    {"m", "inner iterations per epoch (default 2n for svrg-*, n otherwise)"},
    {"eta", "step size of fixed-step algorithms"},
    {"eta0", "first-epoch step of BB algorithms"},
    {"eta1", "second-epoch step of sgd-bb / sag-bb"},
    {"beta", "averaging weight of sgd-bb / sag-bb (default 10/m)"},
    {"phi", "harmonic | constant"},
    {"smoothing", "on | off"},
    {"schedule", "sgd schedule: fixed | diminishing"},
    {"seed", "sampling seed"},
    {"record-every", "record one epoch in this many"},
    {"label", "series label"},
    {"out", "metrics CSV path"},
    {"reference-tol", "gradient-norm tolerance of the reference solver"},
    {"reference-epochs", "epoch cap of the reference solver"},
};

/// Spec flags shared by subcommands: `--spec FILE` plus one flag per key.
struct SpecOptions {
  std::string spec_file;
  std::map<std::string, std::string> values;

  void attach(CLI::App* command, const std::set<std::string>& skip = {}) {
    command->add_option("--spec", spec_file, "key = value spec file; flags override it");
    for (const auto& [key, help] : kSpecFlags)
      if (!skip.count(key)) command->add_option("--" + key, values[key], help);
    app = command;
  }

  ExperimentSpec resolve() const {
    KeyValues kv;
    if (!spec_file.empty()) kv = load_key_values(spec_file);
    for (const auto& [key, value] : values)
      if (app->count("--" + key) > 0) kv[key] = value;
    return spec_from_key_values(kv);
  }

  CLI::App* app = nullptr;
};

void print_records(const std::vector<MetricsRow>& rows) {
  std::printf("%6s %14s %14s %14s %12s\n", "epoch", "eta", "objective", "subopt", "grad_evals");
  for (const auto& r : rows)
    std::printf("%6zu %14.6g %14.10g %14.6g %12llu%s\n", r.epoch, r.eta_applied, r.objective,
                r.subopt, static_cast<unsigned long long>(r.grad_evals), r.fallback ? " *" : "");
}

int cmd_run(const SpecOptions& options) {
  ReferenceCache cache;
  const auto spec = options.resolve();
  const auto outcome = run_experiment(spec, cache);
  print_records(outcome.rows);
  std::printf("status: %s, f* = %.17g%s\n", std::string(to_string(outcome.run.status)).c_str(),
              outcome.reference.f_star, outcome.reference.converged ? "" : " (reference not converged)");
  if (!outcome.csv_path.empty())
    std::printf("wrote %s and %s\n", outcome.csv_path.c_str(), outcome.json_path.c_str());
  return outcome.run.status == RunStatus::Diverged ? kNotConverged : kOk;
}

int cmd_tune(const SpecOptions& options, const std::vector<double>& grid, std::size_t budget) {
  const auto spec = options.resolve();
  const auto data = load_dataset(spec.source);
  const Problem<double> problem(spec.kind, spec.lambda);
  const auto reference = compute_reference(problem, data, {spec.reference_tol, spec.reference_epochs, 0});
  const auto config = resolve_config(spec, data.size());
  const auto result = tune_fixed_step(problem, data, spec.algorithm,
                                      grid.empty() ? default_step_grid() : grid, budget, config,
                                      reference.f_star);
  std::printf("%14s %14s %10s\n", "eta", "final_subopt", "status");
  for (const auto& p : result.points)
    std::printf("%14.6g %14.6g %10s\n", p.eta, p.final_subopt, std::string(to_string(p.status)).c_str());
  std::printf("best eta: %s\n", format_real(result.best_eta).c_str());
  return kOk;
}

int cmd_reference(const SpecOptions& options) {
  const auto spec = options.resolve();
  const auto data = load_dataset(spec.source);
  const Problem<double> problem(spec.kind, spec.lambda);
  const auto ref = compute_reference(problem, data, {spec.reference_tol, spec.reference_epochs, 0});
  std::printf("f_star     = %.17g\ngrad_norm  = %.6g\ntolerance  = %.6g\nconverged  = %s\n"
              "solver     = %s, %zu epochs, m = %zu, eta0 = %.6g, seed = %llu\n",
              ref.f_star, ref.grad_norm, ref.tol, ref.converged ? "yes" : "no",
              ref.provenance.algorithm.c_str(), ref.provenance.epochs, ref.provenance.m,
              ref.provenance.eta0, static_cast<unsigned long long>(ref.provenance.seed));
  return ref.converged ? kOk : kNotConverged;
}

int cmd_compare(const std::vector<std::string>& spec_files, const SpecOptions& overrides,
                const std::string& out_path) {
  std::vector<ExperimentSpec> specs;
  for (const auto& file : spec_files) {
    SpecOptions one = overrides;
    one.spec_file = file;
    specs.push_back(one.resolve());
  }
  ReferenceCache cache;
  CompareOutcome outcome;
  if (out_path.empty() || out_path == "-") {
    outcome = compare(specs, std::cout, cache);
  } else {
    std::ofstream out(out_path);
    if (!out) throw IoError("cannot write " + out_path);
    outcome = compare(specs, out, cache);
  }
  bool diverged = false;
  for (std::size_t s = 0; s < outcome.series.size(); ++s) {
    std::fprintf(stderr, "%s: %zu rows, %s\n", outcome.series[s].c_str(), outcome.rows_per_series[s],
                 std::string(to_string(outcome.statuses[s])).c_str());
    diverged = diverged || outcome.statuses[s] == RunStatus::Diverged;
  }
  std::fprintf(stderr, "f_star = %.17g\n", outcome.f_star);
  return diverged ? kNotConverged : kOk;
}

int cmd_check_theory(const SpecOptions& options, std::uint64_t m, double theta_frac) {
  const auto spec = options.resolve();
  const auto data = load_dataset(spec.source);
  const Problem<double> problem(spec.kind, spec.lambda);
  if (m == 0) m = static_cast<std::uint64_t>(2 * data.size());
  std::fputs(format(check_theory(problem, data, m, theta_frac)).c_str(), stdout);
  return kOk;
}

int cmd_parse_check(const std::string& path, const ParseOptions& options) {
  const auto parsed = load_libsvm(path, options);
  std::printf("samples          = %zu\ninferred d       = %zu\ndimension        = %lld\n"
              "nonzeros         = %lld\nskipped comments = %zu\n",
              parsed.report.n_samples, parsed.report.inferred_d,
              static_cast<long long>(parsed.data.dim()), static_cast<long long>(parsed.data.nonzeros()),
              parsed.report.n_skipped_comments);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Barzilai-Borwein step sizes for SGD, SVRG and SAG"};
  app.require_subcommand(1);

  SpecOptions run_options;
  auto* run = app.add_subcommand("run", "run one experiment and write its metrics");
  run_options.attach(run);

  SpecOptions tune_options;
  std::vector<double> grid;
  std::size_t budget = 10;
  auto* tune = app.add_subcommand("tune", "grid-search the step of a fixed-step algorithm");
  tune_options.attach(tune, {"out"});
  tune->add_option("--grid", grid, "candidate steps (default {1,2,5} x 10^-4..10^1)")->delimiter(',');
  tune->add_option("--budget", budget, "epochs per grid point")->check(CLI::PositiveNumber);

  SpecOptions reference_options;
  auto* reference = app.add_subcommand("reference", "compute the reference optimum");
  reference_options.attach(reference, {"out"});

  SpecOptions compare_options;
  std::vector<std::string> compare_specs;
  std::string compare_out;
  auto* cmp = app.add_subcommand("compare", "run several specs against one reference");
  cmp->add_option("specs", compare_specs, "spec files, one per series")->required();
  cmp->add_option("-o,--output", compare_out, "long-format CSV (default stdout)");
  for (const auto& key : {"epochs", "seed", "reference-tol", "reference-epochs"})
    cmp->add_option(std::string("--") + key, compare_options.values[key], "override for every series");
  compare_options.app = cmp;

  SpecOptions theory_options;
  std::uint64_t theory_m = 0;
  double theta_frac = 0.9;
  auto* theory = app.add_subcommand("check-theory", "report curvature and convergence constants");
  theory_options.attach(theory, {"out", "m"});
  theory->add_option("--m", theory_m, "epoch length to check (default 2n)");
  theory->add_option("--theta-frac", theta_frac, "fraction of the limiting rate, in (0, 1)");

  std::string parse_path;
  ParseOptions parse_options;
  Index parse_dim = 0;
  auto* parse = app.add_subcommand("parse-check", "parse a LIBSVM file and report its shape");
  parse->add_option("file", parse_path, "LIBSVM file")->required();
  parse->add_option("--dim", parse_dim, "explicit feature dimension");
  parse->add_flag("--zero-one-labels", parse_options.zero_one_labels, "map label 0 to -1");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*run) return cmd_run(run_options);
    if (*tune) return cmd_tune(tune_options, grid, budget);
    if (*reference) return cmd_reference(reference_options);
    if (*cmp) return cmd_compare(compare_specs, compare_options, compare_out);
    if (*theory) return cmd_check_theory(theory_options, theory_m, theta_frac);
    if (*parse) {
      if (parse_dim > 0) parse_options.dim = parse_dim;
      return cmd_parse_check(parse_path, parse_options);
    }
  } catch (const ParseError& e) {
    std::fprintf(stderr, "parse error: %s\n", e.what());
    return kIo;
  } catch (const IoError& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return kIo;
  } catch (const std::filesystem::filesystem_error& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return kIo;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  } catch (const std::domain_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  } catch (const std::runtime_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kNotConverged;
  }
  return kUsage;
}
