#pragma once

#include "mutare/model.hpp"
#include "mutare/penalty.hpp"
#include "mutare/selection.hpp"
#include "mutare/tuning.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace mutare {

/// Share of failed replicates above which a run is abandoned.
inline constexpr double kMaxFailureRate = 0.05;

struct ParameterSummary {
  std::string name;
  double truth = 0.0;
  double mean = 0.0;
  double sd = 0.0;
  double mean_se = 0.0;  // Monte Carlo standard error of the mean
  std::optional<double> coverage;  // empirical 90% CI coverage, fixed effects only
  std::optional<double> coverage_se;
};

struct EstimatorSummary {
  int m = 0;
  int n = 0;
  int replicates = 0;
  int failures = 0;
  PenaltyConfig cfg;
  std::vector<ParameterSummary> params;        // tau, beta0, beta1, beta2, sigma2_alpha
  std::vector<std::vector<double>> estimates;  // per parameter, successful replicates in order
  std::vector<double> order_freq;              // estimated order 0..k_max
};

MutareParams example1_params();

struct Example1Options {
  std::vector<std::pair<int, int>> sizes{{30, 10}, {40, 15}, {60, 25}};  // (m, n)
  int replicates = 200;
  std::uint64_t seed = 1;
  TuningGrid grid = TuningGrid::defaults();
  std::optional<PenaltyConfig> fixed_cfg;  // skip tuning
  FitOptions fit;
};

/// Simulate, fit with k_max = 2 and summarize. The penalty is tuned once per
/// size on a fresh training panel scored on a fresh test panel, then frozen.
std::vector<EstimatorSummary> run_example1(const Example1Options& options);
std::vector<EstimatorSummary> run_example1(const std::vector<std::pair<int, int>>& sizes,
                                           int replicates, std::uint64_t seed);

enum class SelectionMethod { aic, bic, dp };
std::string method_name(SelectionMethod method);

struct SelectionTable {
  SelectionMethod method = SelectionMethod::dp;
  int model = 0;
  int true_order = 0;
  int k_max = 0;
  int replicates = 0;
  int failures = 0;
  std::vector<double> freq;     // index = estimated order 0..k_max, over all replicates
  std::vector<double> freq_se;  // binomial standard errors

  int modal_order() const;  // ties go to the smaller order
};

struct Example2Model {
  int id = 0;
  MutareParams params;
  int true_order = 0;
};

/// Single series, m = 200, tau = 0.01, sigma2_eps = 0.1, beta0 = 0.
std::vector<Example2Model> example2_models();

struct Example2Options {
  int replicates = 200;
  std::uint64_t seed = 1;
  int m = 200;
  int k_max = 5;
  TuningGrid grid = TuningGrid::defaults();
  std::optional<PenaltyConfig> fixed_cfg;
  FitOptions fit;
  IcOptions ic;
  std::vector<int> models{1, 2, 3};
};

struct Example2Result {
  std::vector<SelectionTable> tables;  // per model: AIC, BIC, DP
  std::vector<PenaltyConfig> tuned;    // per model
};

Example2Result run_example2(const Example2Options& options);
std::vector<SelectionTable> run_example2(int replicates, std::uint64_t seed);

struct QqPoint {
  double theoretical = 0.0;
  double sample = 0.0;
};

struct QqData {
  std::vector<QqPoint> points;
  bool degenerate = false;  // zero spread: sample quantiles are all 0
};

/// Standardized order statistics against normal quantiles at (i - 1/2) / n.
QqData qq_data(const std::vector<double>& estimates);

struct RatePoint {
  int m = 0;
  int n = 0;
  long total = 0;  // N = n (m - k)
  double median_abs_error = 0.0;
  int failures = 0;
};

struct RateOptions {
  MutareParams params = example1_params();
  double trim = kDefaultTrim;
};

struct RateResult {
  std::vector<RatePoint> points;
  std::vector<std::string> warnings;

  /// median error at step d+1 over step d.
  std::vector<double> ratios() const;
};

/// Pilot threshold error at (m, n), (m, 2n), (m, 4n), ...
RateResult rate_check(std::pair<int, int> base_size, int doublings, int replicates,
                      std::uint64_t seed, const RateOptions& options = {});

}  // namespace mutare
