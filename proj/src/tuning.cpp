#include "mutare/tuning.hpp"

#include "mutare/errors.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <numeric>
#include <ostream>

namespace mutare {

CvPlan CvPlan::make(int m, int k) {
  if (k < 0 || m <= k) throw ArgumentError("CV plan needs 0 <= k < m");
  CvPlan plan;
  plan.m = m;
  plan.k = k;
  plan.h = (m - k) / 4;
  plan.n_c = static_cast<int>(std::floor(std::sqrt(static_cast<double>(m))));
  plan.n_v = m - k - plan.n_c - 2 * plan.h;
  if (plan.n_v < 1)
    throw ArgumentError("h-block CV is infeasible: m = " + std::to_string(m) +
                        ", k = " + std::to_string(k) + ", h = " + std::to_string(plan.h) +
                        ", n_c = " + std::to_string(plan.n_c) + " leave no validation rows");
  for (int off = 0; off + plan.n_v <= m - k; off += plan.n_v) plan.offsets.push_back(off);
  return plan;
}

std::vector<int> CvPlan::validation_times(int fold) const {
  std::vector<int> t(n_v);
  std::iota(t.begin(), t.end(), k + offsets.at(fold));
  return t;
}

std::vector<int> CvPlan::training_times(int fold) const {
  const int lo = offsets.at(fold) - h;
  const int hi = offsets.at(fold) + n_v + h;
  std::vector<int> t;
  for (int r = 0; r < m - k; ++r)
    if (r < lo || r >= hi) t.push_back(k + r);
  return t;
}

namespace {

struct ScoreSum {
  double sse = 0.0;
  long count = 0;
};

/// Predicts `target` rows with a BLUP intercept estimated from `source` rows
/// of the same subjects.
ScoreSum prediction_error(const FitResult& fit, const LaggedDesign& source,
                          const LaggedDesign& target) {
  const auto& p = fit.params;
  const int per = source.rows_per_subject();
  const double shrink = p.sigma2_alpha > 0.0
                            ? per * p.sigma2_alpha / (p.sigma2_eps + per * p.sigma2_alpha)
                            : 0.0;
  std::vector<double> alpha(source.n_subjects(), 0.0);
  for (int row = 0; row < source.n_rows(); ++row)
    alpha[source.subject(row)] +=
        source.response(row) - source.regressor(row, p.tau).dot(p.beta);
  for (double& a : alpha) a *= shrink / per;

  ScoreSum s;
  for (int row = 0; row < target.n_rows(); ++row) {
    const double pred = alpha[target.subject(row)] + target.regressor(row, p.tau).dot(p.beta);
    const double e = target.response(row) - pred;
    s.sse += e * e;
    ++s.count;
  }
  return s;
}

struct Fold {
  LaggedDesign train;
  LaggedDesign valid;
  PilotFit pilot;
};

std::vector<Fold> prepare_folds(const PanelSeries& panel, int k, const CvPlan& plan,
                                const FitOptions& options) {
  if (plan.m != panel.series_length() || plan.k != k)
    throw ArgumentError("CV plan was built for different (m, k)");
  std::vector<Fold> folds;
  for (int f = 0; f < plan.folds(); ++f) {
    LaggedDesign train(panel, k, plan.training_times(f));
    LaggedDesign valid(panel, k, plan.validation_times(f));
    const Eigen::VectorXd y = train.responses();
    const auto candidates =
        candidate_thresholds(std::span<const double>(y.data(), y.size()), options.trim);
    PilotFit pilot = fit_pilot(train, candidates, options);
    folds.push_back({std::move(train), std::move(valid), std::move(pilot)});
  }
  return folds;
}

double cv_score(const std::vector<Fold>& folds, const PenaltyConfig& cfg,
                const FitOptions& options) {
  ScoreSum total;
  for (const auto& fold : folds) {
    const FitResult fit = fit_from_pilot(fold.train, fold.pilot, cfg, options);
    const ScoreSum s = prediction_error(fit, fold.train, fold.valid);
    total.sse += s.sse;
    total.count += s.count;
  }
  return total.sse / static_cast<double>(total.count);
}

struct TestSetup {
  LaggedDesign train;
  LaggedDesign test;
  PilotFit pilot;
};

TestSetup prepare_test(const PanelSeries& train, const PanelSeries& test, int k,
                       const FitOptions& options) {
  if (test.series_length() < k + 1) throw ArgumentError("test panel is shorter than k + 1");
  LaggedDesign train_design(train, k);
  LaggedDesign test_design(test, k);
  PilotFit pilot = fit_pilot(train_design, candidate_thresholds(train, options.trim), options);
  return {std::move(train_design), std::move(test_design), std::move(pilot)};
}

double test_score(const TestSetup& setup, const PenaltyConfig& cfg, const FitOptions& options) {
  const FitResult fit = fit_from_pilot(setup.train, setup.pilot, cfg, options);
  // The test subjects are new: their intercepts come from their own residuals.
  const ScoreSum s = prediction_error(fit, setup.test, setup.test);
  return s.sse / static_cast<double>(s.count);
}

}  // namespace

double hblock_cv_score(const PanelSeries& panel, int k, const PenaltyConfig& cfg,
                       const CvPlan& plan, const FitOptions& options) {
  cfg.validate();
  return cv_score(prepare_folds(panel, k, plan, options), cfg, options);
}

double test_panel_score(const PanelSeries& train, const PanelSeries& test, int k,
                        const PenaltyConfig& cfg, const FitOptions& options) {
  cfg.validate();
  return test_score(prepare_test(train, test, k, options), cfg, options);
}

TuningGrid TuningGrid::defaults() {
  return {{0.1, 0.5, 1.0, 2.0, 5.0, 10.0}, {0.5, 1.0, 2.0, 5.0, 10.0, 20.0}, {0.5, 1.0, 2.0}};
}

void TuningGrid::validate() const {
  if (lambda1.empty() || lambda2.empty() || rho.empty())
    throw ArgumentError("tuning grids must be nonempty");
  for (double v : lambda1)
    if (!(v >= 0.0)) throw ArgumentError("lambda1 grid values must be nonnegative");
  for (double v : lambda2)
    if (!(v >= 0.0)) throw ArgumentError("lambda2 grid values must be nonnegative");
  for (double v : rho)
    if (!(v > 0.0)) throw ArgumentError("rho grid values must be positive");
}

TuningResult tune(const PanelSeries& panel, int k, const TuningGrid& grid, TuningMethod method,
                  const std::optional<PanelSeries>& test, const FitOptions& options,
                  double big_m) {
  grid.validate();
  if ((method == TuningMethod::test_panel) != test.has_value())
    throw ArgumentError("a test panel is required exactly for test-panel tuning");

  std::vector<PenaltyConfig> configs;
  for (double rho : grid.rho)
    for (double l2 : grid.lambda2)
      for (double l1 : grid.lambda1) {
        PenaltyConfig c;
        c.lambda1 = l1;
        c.lambda2 = l2;
        c.rho = rho;
        c.big_m = big_m;
        c.validate();
        configs.push_back(c);
      }

  std::vector<Fold> folds;
  std::optional<TestSetup> setup;
  if (method == TuningMethod::hblock)
    folds = prepare_folds(panel, k, CvPlan::make(panel.series_length(), k), options);
  else
    setup.emplace(prepare_test(panel, *test, k, options));

  const int n = static_cast<int>(configs.size());
  std::vector<double> scores(n, std::numeric_limits<double>::infinity());
  std::vector<std::exception_ptr> fatal(n);
#pragma omp parallel for schedule(dynamic, 1)
  for (int g = 0; g < n; ++g) {
    try {
      scores[g] = method == TuningMethod::hblock ? cv_score(folds, configs[g], options)
                                                 : test_score(*setup, configs[g], options);
    } catch (const Error&) {
      // A failed fit disqualifies this grid point only.
    } catch (...) {
      fatal[g] = std::current_exception();
    }
  }
  for (const auto& e : fatal)
    if (e) std::rethrow_exception(e);

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (scores[a] != scores[b]) return scores[a] < scores[b];
    if (configs[a].lambda2 != configs[b].lambda2) return configs[a].lambda2 > configs[b].lambda2;
    if (configs[a].lambda1 != configs[b].lambda1) return configs[a].lambda1 > configs[b].lambda1;
    return a < b;
  });
  if (!std::isfinite(scores[order[0]]))
    throw NumericError("tuning failed: no grid point produced a finite score");

  TuningResult result;
  result.best = configs[order[0]];
  result.rows.resize(n);
  for (int g = 0; g < n; ++g)
    result.rows[g] = {configs[g].lambda1, configs[g].lambda2, configs[g].rho, scores[g], 0};
  for (int r = 0; r < n; ++r) result.rows[order[r]].rank = r + 1;
  return result;
}

void write_tuning_report(std::ostream& out, const TuningResult& result) {
  out << "lambda1,lambda2,rho,score,rank\n";
  for (const auto& r : result.rows)
    out << format_number(r.lambda1) << ',' << format_number(r.lambda2) << ','
        << format_number(r.rho) << ',' << (std::isfinite(r.score) ? format_number(r.score) : "inf")
        << ',' << r.rank << '\n';
}

void write_tuning_report(const std::filesystem::path& path, const TuningResult& result) {
  std::ofstream out(path);
  if (!out) throw ArgumentError("cannot open " + path.string() + " for writing");
  write_tuning_report(out, result);
}

}  // namespace mutare
