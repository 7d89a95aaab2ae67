#include <cmath>
#include <random>
#include <vector>

#include "bbsgd/data_io.hpp"
#include "bbsgd/optimizers.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace bbsgd;

namespace {

const Dataset<double>& small() {
  static const Dataset<double> data = synthesize_dataset(5, 200, 8, 0.05);
  return data;
}

const Problem<double> kLr(LossKind::Logistic, 0.05);

RunConfig<double> config_with(std::size_t m, std::size_t epochs, std::uint64_t seed = 0) {
  RunConfig<double> c;
  c.m = m;
  c.epochs = epochs;
  c.seed = seed;
  c.beta = m > 10 ? 10.0 / double(m) : 0.5;
  return c;
}

bool same_records(const RunResult<double>& a, const RunResult<double>& b) {
  if (a.records.size() != b.records.size() || a.x_final != b.x_final) return false;
  for (std::size_t k = 0; k < a.records.size(); ++k)
    if (!a.records[k].same_values(b.records[k])) return false;
  return true;
}

double f_star() {
  static const double f = full_objective(kLr, small(), testing::newton_optimum(kLr, small()));
  return f;
}

}  // namespace

TEST_CASE("runs are deterministic per seed") {
  const auto c0 = config_with(400, 5, 1);
  CHECK(same_records(run_svrg_bb(kLr, small(), c0), run_svrg_bb(kLr, small(), c0)));
  CHECK(same_records(run_sgd_bb(kLr, small(), c0), run_sgd_bb(kLr, small(), c0)));
  CHECK(same_records(run_sag_bb(kLr, small(), c0), run_sag_bb(kLr, small(), c0)));
  const auto c1 = config_with(400, 5, 2);
  CHECK_FALSE(same_records(run_svrg_bb(kLr, small(), c0), run_svrg_bb(kLr, small(), c1)));
}

TEST_CASE("svrg option II with m = 1 matches option I") {
  const auto c = config_with(1, 20, 3);
  CHECK(same_records(run_svrg(kLr, small(), 0.1, SnapshotOption::I, c),
                     run_svrg(kLr, small(), 0.1, SnapshotOption::II, c)));
}

TEST_CASE("bypassed svrg-bb is svrg-i") {
  auto c = config_with(400, 8, 4);
  c.eta0 = 0.05;
  CHECK(same_records(run_svrg_bb(kLr, small(), c, true),
                     run_svrg(kLr, small(), 0.05, SnapshotOption::I, c)));
}

TEST_CASE("variance-reduced methods converge linearly") {
  const auto c = config_with(400, 25, 0);
  const auto svrg = run_svrg(kLr, small(), 0.05, SnapshotOption::I, c);
  const auto svrg2 = run_svrg(kLr, small(), 0.05, SnapshotOption::II, c);
  auto cb = c;
  cb.eta0 = 0.05;
  const auto bb = run_svrg_bb(kLr, small(), cb);
  for (const auto* run : {&svrg, &svrg2, &bb}) {
    CHECK(run->status == RunStatus::Completed);
    CHECK(run->records.back().objective - f_star() < 1e-10);
    CHECK(run->records.back().objective - f_star() >= -1e-12);
  }
  const auto sag = run_sag(kLr, small(), 0.05, config_with(200, 60, 0));
  CHECK(sag.records.back().objective - f_star() < 1e-8);
}

TEST_CASE("svrg-bb steps stay inside the curvature interval") {
  const auto curvature = estimate_curvature(kLr, small());
  auto c = config_with(400, 20, 0);
  c.eta0 = 0.1 / curvature.L;
  const auto run = run_svrg_bb(kLr, small(), c);
  for (const auto& r : run.records) {
    if (r.k == 0) continue;
    CHECK(r.eta_applied >= 1 / (400 * curvature.L));
    CHECK(r.eta_applied <= 1 / (400 * curvature.mu));
  }
  CHECK(run.records[0].eta_applied == c.eta0);
}

TEST_CASE("sgd-bb step schedule") {
  auto c = config_with(200, 12, 0);
  c.eta0 = 0.3;
  c.eta1 = 0.2;
  SUBCASE("warm-up steps and raw steps without smoothing") {
    const auto run = run_sgd_bb(kLr, small(), c, false);
    CHECK(run.records[0].eta_applied == 0.3);
    CHECK(run.records[1].eta_applied == 0.2);
    for (const auto& r : run.records) CHECK(r.eta_applied == r.eta_raw);
  }
  SUBCASE("eta1 defaults to eta0") {
    c.eta1 = 0;
    const auto run = run_sgd_bb(kLr, small(), c);
    CHECK(run.records[1].eta_applied == 0.3);
  }
  SUBCASE("smoothed steps are the closed form over the raw steps") {
    const auto run = run_sgd_bb(kLr, small(), c, true);
    std::vector<double> raw;
    for (std::size_t k = 2; k < run.records.size(); ++k) {
      raw.push_back(run.records[k].eta_raw);
      const double expected = testing::closed_form_c_hat(raw, true) / double(k + 1);
      CHECK(run.records[k].eta_applied == doctest::Approx(expected).epsilon(1e-12));
    }
  }
  SUBCASE("sag-bb smooths with the geometric mean") {
    const auto run = run_sag_bb(kLr, small(), c, true);
    std::vector<double> raw;
    for (std::size_t k = 2; k < run.records.size(); ++k) {
      raw.push_back(run.records[k].eta_raw);
      CHECK(run.records[k].eta_applied ==
            doctest::Approx(testing::closed_form_c_hat(raw, false)).epsilon(1e-12));
    }
  }
}

TEST_CASE("sgd-bb makes progress from the origin") {
  auto c = config_with(200, 15, 0);
  c.eta0 = 0.1;
  const auto run = run_sgd_bb(kLr, small(), c);
  CHECK(run.status == RunStatus::Completed);
  CHECK(run.records.back().objective < run.initial_objective);
  CHECK(run.records.back().objective - f_star() < 1e-2);
}

TEST_CASE("sgd schedules") {
  const auto c = config_with(200, 4, 0);
  const auto dim = run_sgd(kLr, small(), StepSchedule::Diminishing, 0.5, c);
  for (const auto& r : dim.records) CHECK(r.eta_applied == 0.5 / double(r.k + 1));
  const auto fixed = run_sgd(kLr, small(), StepSchedule::Fixed, 0.5, c);
  for (const auto& r : fixed.records) CHECK(r.eta_applied == 0.5);
  const auto still = run_sgd(kLr, small(), StepSchedule::Fixed, 0.0, c);
  for (const auto& r : still.records) CHECK(r.objective == still.initial_objective);
  CHECK_THROWS_AS(run_sgd(kLr, small(), StepSchedule::Fixed, -1.0, c), std::invalid_argument);
}

TEST_CASE("adagrad decreases the objective") {
  const auto run = run_adagrad(kLr, small(), 0.1, config_with(200, 10, 0));
  CHECK(run.records.back().objective < run.initial_objective);
  CHECK(run.records.back().grad_evals == 2000);
}

TEST_CASE("sag table keeps its running sum in sync") {
  const auto& data = small();
  detail::SagTable<double> table(data);
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<Index> pick(0, data.size() - 1);
  std::normal_distribution<double> normal;
  for (int t = 0; t < 5000; ++t) table.refresh(pick(rng), normal(rng));
  CHECK((table.sum() - table.recomputed_sum()).norm() <= 1e-10 * table.sum().norm());
}

TEST_CASE("divergence truncates the series") {
  const auto c = config_with(400, 10, 0);
  const auto run = run_svrg(kLr, small(), 50.0, SnapshotOption::I, c);
  CHECK(run.status == RunStatus::Diverged);
  CHECK(run.records.size() < 10);
  CHECK(run.epochs_run == run.records.size());
  for (const auto& r : run.records) CHECK(r.objective <= kDivergenceThreshold);
}

TEST_CASE("gradient tolerance stops full-gradient methods") {
  auto c = config_with(400, 200, 0);
  c.grad_tol = 1e-8;
  c.eta0 = 0.05;
  const auto run = run_svrg_bb(kLr, small(), c);
  CHECK(run.status == RunStatus::Converged);
  CHECK(run.epochs_run < 200);
  CHECK(full_gradient(kLr, small(), run.x_final).norm() < 1e-8);
}

TEST_CASE("recording stride, iterates and starting point") {
  auto c = config_with(200, 10, 0);
  c.record_every = 4;
  c.keep_iterates = true;
  const auto run = run_sag(kLr, small(), 0.05, c);
  std::vector<std::size_t> ks;
  for (const auto& r : run.records) ks.push_back(r.k);
  CHECK(ks == std::vector<std::size_t>{0, 4, 8, 9});
  CHECK(run.iterates.size() == 11);
  CHECK(run.iterates.front().isZero());
  CHECK(run.iterates.back() == run.x_final);

  c.x0 = Vector<double>::Constant(8, 0.25);
  const auto started = run_sgd(kLr, small(), StepSchedule::Fixed, 0.0, c);
  CHECK(started.x_final == c.x0);
  CHECK(started.initial_objective == full_objective(kLr, small(), c.x0));
}

TEST_CASE("wall time is cumulative") {
  const auto run = run_svrg(kLr, small(), 0.05, SnapshotOption::I, config_with(400, 5, 0));
  for (std::size_t k = 1; k < run.records.size(); ++k)
    CHECK(run.records[k].wall_seconds >= run.records[k - 1].wall_seconds);
}

TEST_CASE("gradient evaluation counts") {
  const std::uint64_t n = 200;
  auto c = config_with(150, 3, 0);
  const auto svrg = run_svrg(kLr, small(), 0.05, SnapshotOption::II, c);
  for (const auto& r : svrg.records) CHECK(r.grad_evals == (r.k + 1) * (n + 300));
  for (const auto& run : {run_sag(kLr, small(), 0.05, c), run_sag_bb(kLr, small(), c),
                          run_sgd_bb(kLr, small(), c), run_adagrad(kLr, small(), 0.1, c)})
    for (const auto& r : run.records) CHECK(r.grad_evals == (r.k + 1) * 150);
}

TEST_CASE("configuration validation") {
  auto c = config_with(10, 2, 0);
  c.m = 0;
  CHECK_THROWS_AS(run_svrg_bb(kLr, small(), c), std::invalid_argument);
  c = config_with(10, 0, 0);
  CHECK_THROWS_AS(run_sag(kLr, small(), 0.1, c), std::invalid_argument);
  c = config_with(10, 2, 0);
  c.beta = 1.0;
  CHECK_THROWS_AS(run_sgd_bb(kLr, small(), c), std::invalid_argument);
  c = config_with(10, 2, 0);
  c.eta0 = 0;
  CHECK_THROWS_AS(run_svrg_bb(kLr, small(), c), std::invalid_argument);
  CHECK_THROWS_AS(run_sag_bb(kLr, small(), c), std::invalid_argument);
  c = config_with(10, 2, 0);
  c.x0 = Vector<double>::Zero(3);
  CHECK_THROWS_AS(run_adagrad(kLr, small(), 0.1, c), std::invalid_argument);
  c = config_with(10, 2, 0);
  CHECK_THROWS_AS(run_svrg(kLr, small(), 0.0, SnapshotOption::I, c), std::invalid_argument);
  c.record_every = 0;
  CHECK_THROWS_AS(run_sag(kLr, small(), 0.1, c), std::invalid_argument);
}

TEST_CASE("squared hinge problems run end to end") {
  const Problem<double> svm(LossKind::SquaredHinge, 0.05);
  auto c = config_with(400, 20, 0);
  c.eta0 = 0.01;
  const auto run = run_svrg_bb(svm, small(), c);
  CHECK(run.status == RunStatus::Completed);
  CHECK(full_gradient(svm, small(), run.x_final).norm() < 1e-6);
}

TEST_CASE("single precision runners") {
  SparseRows<float> A = small().features().cast<float>();
  const Dataset<float> data(A, small().labels().cast<float>());
  const Problem<float> problem(LossKind::Logistic, 0.05f);
  RunConfig<float> c;
  c.m = 400;
  c.epochs = 5;
  c.eta0 = 0.05f;
  const auto run = run_svrg_bb(problem, data, c);
  CHECK(run.records.back().objective < run.initial_objective);
}

TEST_CASE("option II snapshot lies on the option I inner trajectory") {
  const std::size_t m = 20;
  const auto two = run_svrg(kLr, small(), 0.05, SnapshotOption::II, config_with(m, 1, 6));
  int matches = 0;
  for (std::size_t t = 1; t <= m; ++t) {
    const auto one = run_svrg(kLr, small(), 0.05, SnapshotOption::I, config_with(t, 1, 6));
    matches += one.x_final == two.x_final;
  }
  CHECK(matches == 1);
}

TEST_CASE("svrg started at the optimum stays there") {
  auto c = config_with(400, 1, 0);
  c.x0 = testing::newton_optimum(kLr, small());
  const auto run = run_svrg(kLr, small(), 0.05, SnapshotOption::I, c);
  CHECK((run.x_final - c.x0).norm() < 1e-12);
}

TEST_CASE("variance-reduced gradient is unbiased") {
  const auto& data = small();
  std::mt19937_64 rng(4);
  std::normal_distribution<double> normal;
  Vector<double> x(8), x_tilde(8);
  for (Index j = 0; j < 8; ++j) x[j] = normal(rng), x_tilde[j] = normal(rng);
  const Vector<double> g = full_gradient(kLr, data, x_tilde);
  Vector<double> avg = Vector<double>::Zero(8);
  for (Index i = 0; i < data.size(); ++i)
    avg += component_gradient(kLr, data, i, x) - component_gradient(kLr, data, i, x_tilde) + g;
  avg /= double(data.size());
  const Vector<double> exact = full_gradient(kLr, data, x);
  CHECK((avg - exact).norm() <= 1e-13 * exact.norm());
}

TEST_CASE("sag on one sample is gradient descent") {
  SparseRows<double> A(1, 3);
  A.insert(0, 0) = 0.5;
  A.insert(0, 2) = -1.5;
  const Dataset<double> one(A, Vector<double>::Ones(1));
  const Problem<double> problem(LossKind::Logistic, 0.2);
  const auto run = run_sag(problem, one, 0.3, config_with(7, 1, 0));
  Vector<double> x = Vector<double>::Zero(3);
  for (int t = 0; t < 7; ++t) x -= 0.3 * full_gradient(problem, one, x);
  CHECK((run.x_final - x).norm() <= 1e-15);
}

TEST_CASE("sgd on a singleton with heavy regularization decreases monotonically") {
  SparseRows<double> A(1, 2);
  A.insert(0, 1) = 1.0;
  const Dataset<double> one(A, -Vector<double>::Ones(1));
  const Problem<double> problem(LossKind::Logistic, 5.0);
  auto c = config_with(5, 10, 0);
  c.x0 = Vector<double>::Constant(2, 3.0);
  const auto run = run_sgd(problem, one, StepSchedule::Fixed, 0.01, c);
  double previous = run.initial_objective;
  for (const auto& r : run.records) {
    CHECK(r.objective < previous);
    previous = r.objective;
  }
}

TEST_CASE("adagrad first step and idle coordinates") {
  SparseRows<double> A(1, 3);
  A.insert(0, 0) = 2.0;
  A.insert(0, 1) = -0.5;
  const Dataset<double> one(A, Vector<double>::Ones(1));
  const Problem<double> problem(LossKind::Logistic, 0.1);
  const auto run = run_adagrad(problem, one, 0.01, config_with(1, 1, 0));
  CHECK(std::abs(run.x_final[0]) == doctest::Approx(0.01).epsilon(1e-6));
  CHECK(std::abs(run.x_final[1]) == doctest::Approx(0.01).epsilon(1e-6));
  CHECK(run.x_final[2] == 0.0);
}

TEST_CASE("sgd-bb with beta near one stays well defined") {
  auto c = config_with(200, 8, 0);
  c.beta = 1 - 1e-9;
  c.eta0 = 0.05;
  const auto run = run_sgd_bb(kLr, small(), c);
  CHECK(run.status != RunStatus::Diverged);
  for (const auto& r : run.records) CHECK((std::isfinite(r.eta_applied) && r.eta_applied > 0));
}

TEST_CASE("sag-bb is robust to the initial step") {
  // Single runs spread over about three decades at a fixed eta0, so each
  // eta0 is summarized by the geometric mean over seeds.
  const auto& data = synthesize_dataset(1, 1000, 20, 0.05);
  const Problem<double> problem(LossKind::Logistic, 1e-2);
  const double f = full_objective(problem, data, testing::newton_optimum(problem, data));
  const double L = estimate_curvature(problem, data).L;
  double lo = INFINITY, hi = 0;
  for (const double eta0 : {0.01 / L, 0.1 / L, 1.0 / L}) {
    double log_sum = 0;
    const int seeds = 21;
    for (int seed = 0; seed < seeds; ++seed) {
      auto c = config_with(1000, 30, seed);
      c.eta0 = eta0;
      const auto run = run_sag_bb(problem, data, c);
      REQUIRE(run.status == RunStatus::Completed);
      log_sum += std::log10(std::max(run.records.back().objective - f, 1e-16));
    }
    const double typical = std::pow(10.0, log_sum / seeds);
    lo = std::min(lo, typical);
    hi = std::max(hi, typical);
  }
  CHECK(hi <= 10 * lo);
}

TEST_CASE("record invariants across algorithms") {
  auto c = config_with(200, 6, 2);
  c.eta0 = 0.05;
  for (const auto& run :
       {run_sgd(kLr, small(), StepSchedule::Diminishing, 0.5, c),
        run_svrg(kLr, small(), 0.05, SnapshotOption::II, c), run_svrg_bb(kLr, small(), c),
        run_sgd_bb(kLr, small(), c), run_sag(kLr, small(), 0.05, c), run_sag_bb(kLr, small(), c),
        run_adagrad(kLr, small(), 0.1, c)}) {
    CHECK(run.records.size() == 6);
    for (std::size_t k = 0; k < run.records.size(); ++k) {
      CHECK(run.records[k].k == k);
      CHECK(run.records[k].eta_applied > 0);
      if (k > 0) CHECK(run.records[k].grad_evals > run.records[k - 1].grad_evals);
    }
  }
}
