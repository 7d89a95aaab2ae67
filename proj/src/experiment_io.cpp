#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "bbsgd/errors.hpp"
#include "bbsgd/harness.hpp"
#include "json.hpp"

namespace bbsgd {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

template <typename T>
T parse_number(std::string_view key, std::string_view text) {
  T value{};
  const auto* first = text.data();
  const auto* last = text.data() + text.size();
  if (!text.empty() && text.front() == '+') ++first;
  const auto [end, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || end != last || first == last)
    throw std::invalid_argument("'" + std::string(key) + "': cannot parse '" + std::string(text) + "'");
  return value;
}

bool parse_bool(std::string_view key, std::string_view text) {
  if (text == "on" || text == "true" || text == "yes" || text == "1") return true;
  if (text == "off" || text == "false" || text == "no" || text == "0") return false;
  throw std::invalid_argument("'" + std::string(key) + "': expected on/off, got '" + std::string(text) + "'");
}

StepSchedule parse_schedule(std::string_view text) {
  if (text == "fixed") return StepSchedule::Fixed;
  if (text == "diminishing") return StepSchedule::Diminishing;
  throw std::invalid_argument("'schedule': expected fixed|diminishing, got '" + std::string(text) + "'");
}

std::string shortest(double value) {
  char buffer[32];
  const auto result = std::to_chars(buffer, buffer + sizeof buffer, value);
  return std::string(buffer, result.ptr);
}

std::string default_label(const ExperimentSpec& spec) {
  std::string label(to_string(spec.algorithm));
  label += uses_fixed_step(spec.algorithm) ? " eta=" + shortest(spec.eta) : " eta0=" + shortest(spec.eta0);
  return label;
}

double subopt(double objective, double f_star) { return std::max(objective - f_star, kSuboptFloor); }

}  // namespace

KeyValues parse_key_values(std::string_view text) {
  KeyValues values;
  std::size_t line_no = 0;
  std::size_t begin = 0;
  while (begin <= text.size()) {
    std::size_t end = text.find('\n', begin);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = trim(text.substr(begin, end - begin));
    begin = end + 1;
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos)
      throw std::invalid_argument("spec line " + std::to_string(line_no) + ": expected key = value");
    const std::string_view key = trim(line.substr(0, eq));
    const std::string_view value = trim(line.substr(eq + 1));
    if (key.empty()) throw std::invalid_argument("spec line " + std::to_string(line_no) + ": empty key");
    values[std::string(key)] = std::string(value);
  }
  return values;
}

KeyValues load_key_values(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open spec file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_key_values(text.str());
}

KeyValues merge(KeyValues base, const KeyValues& overrides) {
  for (const auto& [key, value] : overrides) base[key] = value;
  return base;
}

ExperimentSpec spec_from_key_values(const KeyValues& values) {
  ExperimentSpec spec;
  SyntheticSource synthetic;
  std::optional<FileSource> file;
  ParseOptions parse_options;

  for (const auto& [key, value] : values) {
    if (key == "data") {
      file = FileSource{value, {}};
    } else if (key == "dim") {
      parse_options.dim = parse_number<Index>(key, value);
    } else if (key == "zero-one-labels") {
      parse_options.zero_one_labels = parse_bool(key, value);
    } else if (key == "synthetic-n") {
      synthetic.n = parse_number<Index>(key, value);
    } else if (key == "synthetic-d") {
      synthetic.d = parse_number<Index>(key, value);
    } else if (key == "synthetic-noise") {
      synthetic.noise = parse_number<double>(key, value);
    } else if (key == "synthetic-seed") {
      synthetic.seed = parse_number<std::uint64_t>(key, value);
    } else if (key == "loss") {
      spec.kind = parse_loss_kind(value);
    } else if (key == "lambda") {
      spec.lambda = parse_number<double>(key, value);
    } else if (key == "algo") {
      spec.algorithm = parse_algorithm(value);
    } else if (key == "epochs") {
      spec.epochs = parse_number<std::size_t>(key, value);
    } else if (key == "m") {
      spec.m = parse_number<std::size_t>(key, value);
    } else if (key == "eta") {
      spec.eta = parse_number<double>(key, value);
    } else if (key == "eta0") {
      spec.eta0 = parse_number<double>(key, value);
    } else if (key == "eta1") {
      spec.eta1 = parse_number<double>(key, value);
    } else if (key == "beta") {
      spec.beta = parse_number<double>(key, value);
    } else if (key == "phi") {
      spec.phi = parse_decay_kind(value);
    } else if (key == "smoothing") {
      spec.smoothing = parse_bool(key, value);
    } else if (key == "schedule") {
      spec.sgd_schedule = parse_schedule(value);
    } else if (key == "seed") {
      spec.seed = parse_number<std::uint64_t>(key, value);
    } else if (key == "record-every") {
      spec.record_every = parse_number<std::size_t>(key, value);
    } else if (key == "label") {
      spec.label = value;
    } else if (key == "out") {
      spec.output = value;
    } else if (key == "reference-tol") {
      spec.reference_tol = parse_number<double>(key, value);
    } else if (key == "reference-epochs") {
      spec.reference_epochs = parse_number<std::size_t>(key, value);
    } else {
      throw std::invalid_argument("unknown spec key '" + key + "'");
    }
  }
  if (file) {
    file->options = parse_options;
    spec.source = *file;
  } else {
    spec.source = synthetic;
  }
  Problem<double>(spec.kind, spec.lambda);  // validates lambda
  return spec;
}

KeyValues to_key_values(const ExperimentSpec& spec) {
  KeyValues kv;
  if (const auto* file = std::get_if<FileSource>(&spec.source)) {
    kv["data"] = file->path.string();
    if (file->options.dim) kv["dim"] = std::to_string(*file->options.dim);
    kv["zero-one-labels"] = file->options.zero_one_labels ? "on" : "off";
  } else {
    const auto& s = std::get<SyntheticSource>(spec.source);
    kv["synthetic-n"] = std::to_string(s.n);
    kv["synthetic-d"] = std::to_string(s.d);
    kv["synthetic-noise"] = format_real(s.noise);
    kv["synthetic-seed"] = std::to_string(s.seed);
  }
  kv["loss"] = to_string(spec.kind);
  kv["lambda"] = format_real(spec.lambda);
  kv["algo"] = to_string(spec.algorithm);
  kv["epochs"] = std::to_string(spec.epochs);
  if (spec.m) kv["m"] = std::to_string(*spec.m);
  kv["eta"] = format_real(spec.eta);
  kv["eta0"] = format_real(spec.eta0);
  if (spec.eta1) kv["eta1"] = format_real(*spec.eta1);
  if (spec.beta) kv["beta"] = format_real(*spec.beta);
  kv["phi"] = to_string(spec.phi);
  kv["smoothing"] = spec.smoothing ? "on" : "off";
  kv["schedule"] = spec.sgd_schedule == StepSchedule::Fixed ? "fixed" : "diminishing";
  kv["seed"] = std::to_string(spec.seed);
  kv["record-every"] = std::to_string(spec.record_every);
  if (!spec.label.empty()) kv["label"] = spec.label;
  if (!spec.output.empty()) kv["out"] = spec.output.string();
  kv["reference-tol"] = format_real(spec.reference_tol);
  kv["reference-epochs"] = std::to_string(spec.reference_epochs);
  return kv;
}

Dataset<double> load_dataset(const DataSource& source) {
  if (const auto* file = std::get_if<FileSource>(&source)) return load_libsvm(file->path, file->options).data;
  const auto& s = std::get<SyntheticSource>(source);
  return synthesize_dataset(s.seed, s.n, s.d, s.noise);
}

std::string describe(const DataSource& source) {
  if (const auto* file = std::get_if<FileSource>(&source)) {
    std::string text = "file:" + file->path.string();
    if (file->options.dim) text += ";dim=" + std::to_string(*file->options.dim);
    if (file->options.zero_one_labels) text += ";zero-one-labels";
    return text;
  }
  const auto& s = std::get<SyntheticSource>(source);
  return "synthetic:n=" + std::to_string(s.n) + ";d=" + std::to_string(s.d) +
         ";noise=" + format_real(s.noise) + ";seed=" + std::to_string(s.seed);
}

std::string format_real(double value) {
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "%.17g", value);
  return buffer;
}

std::vector<MetricsRow> metrics_rows(const RunResult<double>& run, double f_star) {
  std::vector<MetricsRow> rows;
  rows.reserve(run.records.size());
  for (const auto& r : run.records)
    rows.push_back({r.k, r.eta_raw, r.eta_applied, r.objective, subopt(r.objective, f_star),
                    r.grad_evals, r.wall_seconds, r.fallback_used});
  return rows;
}

void write_metrics_csv(std::ostream& out, const std::vector<MetricsRow>& rows) {
  out << kMetricsHeader << '\n';
  for (const auto& r : rows)
    out << r.epoch << ',' << format_real(r.eta_raw) << ',' << format_real(r.eta_applied) << ','
        << format_real(r.objective) << ',' << format_real(r.subopt) << ',' << r.grad_evals << ','
        << format_real(r.wall_seconds) << ',' << (r.fallback ? 1 : 0) << '\n';
}

std::vector<MetricsRow> read_metrics_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || trim(line) != kMetricsHeader)
    throw std::invalid_argument("metrics CSV: missing or unexpected header");
  std::vector<MetricsRow> rows;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    std::vector<std::string_view> fields;
    std::string_view rest = trim(line);
    for (std::size_t comma; (comma = rest.find(',')) != std::string_view::npos;) {
      fields.push_back(rest.substr(0, comma));
      rest.remove_prefix(comma + 1);
    }
    fields.push_back(rest);
    if (fields.size() != 8)
      throw std::invalid_argument("metrics CSV: expected 8 fields, got " + std::to_string(fields.size()));
    MetricsRow r;
    r.epoch = parse_number<std::size_t>("epoch", fields[0]);
    r.eta_raw = parse_number<double>("eta_raw", fields[1]);
    r.eta_applied = parse_number<double>("eta_applied", fields[2]);
    r.objective = parse_number<double>("objective", fields[3]);
    r.subopt = parse_number<double>("subopt", fields[4]);
    r.grad_evals = parse_number<std::uint64_t>("grad_evals", fields[5]);
    r.wall_seconds = parse_number<double>("wall_seconds", fields[6]);
    r.fallback = parse_bool("fallback", fields[7]);
    rows.push_back(r);
  }
  return rows;
}

namespace {

nlohmann::json reference_json(const ReferenceSolution& ref) {
  return {{"f_star", ref.f_star},
          {"grad_norm", ref.grad_norm},
          {"tol", ref.tol},
          {"converged", ref.converged},
          {"algorithm", ref.provenance.algorithm},
          {"epochs", ref.provenance.epochs},
          {"seed", ref.provenance.seed},
          {"m", ref.provenance.m},
          {"eta0", ref.provenance.eta0}};
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace

ExperimentOutcome run_experiment(const ExperimentSpec& spec, ReferenceCache& cache) {
  const Dataset<double> data = load_dataset(spec.source);
  const Problem<double> problem(spec.kind, spec.lambda);
  ExperimentOutcome outcome;
  outcome.reference = cache.get(problem, data, {spec.reference_tol, spec.reference_epochs, 0});
  const auto config = resolve_config(spec, data.size());
  outcome.run = run_algorithm(spec.algorithm, problem, data, config, spec.eta, spec.smoothing,
                              spec.sgd_schedule);
  outcome.rows = metrics_rows(outcome.run, outcome.reference.f_star);
  if (spec.output.empty()) return outcome;

  outcome.csv_path = spec.output;
  outcome.json_path = std::filesystem::path(spec.output).replace_extension(".json");
  std::ostringstream csv;
  write_metrics_csv(csv, outcome.rows);
  write_text(outcome.csv_path, csv.str());

  nlohmann::json sidecar;
  sidecar["spec"] = to_key_values(spec);
  sidecar["resolved"] = {{"m", config.m},
                         {"beta", config.beta},
                         {"eta", spec.eta},
                         {"eta0", config.eta0},
                         {"eta1", config.resolved_eta1()},
                         {"phi", to_string(config.phi)},
                         {"epochs", config.epochs},
                         {"seed", config.seed}};
  sidecar["dataset"] = {{"source", describe(spec.source)},
                        {"n", data.size()},
                        {"d", data.dim()},
                        {"nnz", data.nonzeros()},
                        {"hash", dataset_hash(data)}};
  sidecar["status"] = to_string(outcome.run.status);
  sidecar["epochs_run"] = outcome.run.epochs_run;
  sidecar["fallback_count"] = outcome.run.fallback_count;
  sidecar["initial_objective"] = outcome.run.initial_objective;
  sidecar["reference"] = reference_json(outcome.reference);
  write_text(outcome.json_path, sidecar.dump(2) + "\n");
  return outcome;
}

CompareOutcome compare(const std::vector<ExperimentSpec>& specs, std::ostream& out,
                       ReferenceCache& cache) {
  if (specs.size() < 2) throw std::invalid_argument("compare needs at least two specs");
  const auto& first = specs.front();
  for (const auto& spec : specs) {
    if (describe(spec.source) != describe(first.source) || spec.kind != first.kind ||
        spec.lambda != first.lambda)
      throw std::invalid_argument("compare: specs describe different problems (" +
                                  describe(spec.source) + " vs " + describe(first.source) + ")");
  }

  const Dataset<double> data = load_dataset(first.source);
  const Problem<double> problem(first.kind, first.lambda);
  CompareOutcome outcome;
  outcome.f_star = cache.get(problem, data, {first.reference_tol, first.reference_epochs, 0}).f_star;

  std::vector<std::future<RunResult<double>>> runs;
  for (const auto& spec : specs) {
    runs.push_back(std::async(std::launch::async, [&data, &problem, &spec] {
      return run_algorithm(spec.algorithm, problem, data, resolve_config(spec, data.size()),
                           spec.eta, spec.smoothing, spec.sgd_schedule);
    }));
  }

  std::set<std::string> used;
  out << "series,epoch,subopt,eta_applied\n";
  for (std::size_t s = 0; s < specs.size(); ++s) {
    const auto run = runs[s].get();
    std::string label = specs[s].label.empty() ? default_label(specs[s]) : specs[s].label;
    if (used.count(label)) label += " #" + std::to_string(s + 1);
    used.insert(label);
    // labels are quoted when they contain a comma or a quote
    std::string field = label;
    if (field.find_first_of(",\"") != std::string::npos) {
      std::string quoted = "\"";
      for (const char c : field) quoted += c == '"' ? std::string("\"\"") : std::string(1, c);
      field = quoted + "\"";
    }
    for (const auto& r : run.records)
      out << field << ',' << r.k << ',' << format_real(subopt(r.objective, outcome.f_star)) << ','
          << format_real(r.eta_applied) << '\n';
    outcome.series.push_back(label);
    outcome.rows_per_series.push_back(run.records.size());
    outcome.statuses.push_back(run.status);
  }
  if (!out) throw IoError("write failed for comparison output");
  return outcome;
}

}  // namespace bbsgd
