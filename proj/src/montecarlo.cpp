#include "mutare/montecarlo.hpp"

#include "mutare/errors.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <exception>
#include <numeric>

namespace mutare {

namespace {

// Seed streams; each experiment draws from its own.
constexpr std::uint64_t kStreamExample1 = 1000;
constexpr std::uint64_t kStreamExample1Tune = 2000;
constexpr std::uint64_t kStreamExample2 = 3000;
constexpr std::uint64_t kStreamExample2Tune = 4000;
constexpr std::uint64_t kStreamRate = 5000;

const double kZ90 = boost::math::quantile(boost::math::normal(), 0.95);

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sd_of(const std::vector<double>& v, double mean) {
  if (v.size() < 2) return 0.0;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double binomial_se(double p, int n) { return n > 0 ? std::sqrt(p * (1.0 - p) / n) : 0.0; }

void check_failures(int failures, int replicates, const std::string& what) {
  if (failures > kMaxFailureRate * replicates)
    throw NumericError(what + ": " + std::to_string(failures) + " of " +
                       std::to_string(replicates) + " replicates failed");
}

/// Runs body(r) for r in [0, count) in parallel and rethrows the first
/// non-library exception in index order.
template <class F>
void parallel_replicates(int count, F&& body) {
  std::vector<std::exception_ptr> fatal(count);
#pragma omp parallel for schedule(dynamic, 1)
  for (int r = 0; r < count; ++r) {
    try {
      body(r);
    } catch (...) {
      fatal[r] = std::current_exception();
    }
  }
  for (const auto& e : fatal)
    if (e) std::rethrow_exception(e);
}

struct Example1Replicate {
  bool ok = false;
  double values[5] = {};
  bool covered[3] = {};
  int order = 0;
};

}  // namespace

MutareParams example1_params() {
  MutareParams p;
  p.beta = Eigen::Vector3d(0.0, 0.5, 0.4);
  p.tau = 0.1;
  p.sigma2_alpha = 0.5;
  p.sigma2_eps = 0.5;
  return p;
}

std::vector<EstimatorSummary> run_example1(const Example1Options& options) {
  if (options.replicates < 1) throw ArgumentError("replicates must be at least 1");
  const MutareParams truth = example1_params();
  const int k_max = 2;
  const char* names[5] = {"tau", "beta0", "beta1", "beta2", "sigma2_alpha"};
  const double truths[5] = {truth.tau, truth.beta(0), truth.beta(1), truth.beta(2),
                            truth.sigma2_alpha};

  std::vector<EstimatorSummary> out;
  for (std::size_t s = 0; s < options.sizes.size(); ++s) {
    const auto [m, n] = options.sizes[s];
    PenaltyConfig cfg;
    if (options.fixed_cfg) {
      cfg = *options.fixed_cfg;
    } else {
      const PanelSeries train =
          simulate_panel(truth, n, m, kDefaultBurnIn, derive_seed(options.seed, kStreamExample1Tune + s, 0));
      const PanelSeries test =
          simulate_panel(truth, n, m, kDefaultBurnIn, derive_seed(options.seed, kStreamExample1Tune + s, 1));
      cfg = tune(train, k_max, options.grid, TuningMethod::test_panel, test, options.fit).best;
    }

    std::vector<Example1Replicate> reps(options.replicates);
    parallel_replicates(options.replicates, [&](int r) {
      const PanelSeries panel = simulate_panel(truth, n, m, kDefaultBurnIn,
                                               derive_seed(options.seed, kStreamExample1 + s, r));
      try {
        const FitResult fit = fit_mutare(panel, k_max, cfg, options.fit);
        auto& rep = reps[r];
        rep.values[0] = fit.params.tau;
        for (int j = 0; j <= 2; ++j) {
          rep.values[1 + j] = fit.params.beta(j);
          const double se = fit.cov_beta.standard_error(j);
          rep.covered[j] = std::isfinite(se) && std::abs(fit.params.beta(j) - truth.beta(j)) <= kZ90 * se;
        }
        rep.values[4] = fit.params.sigma2_alpha;
        rep.order = fit.order;
        rep.ok = true;
      } catch (const Error&) {
      }
    });

    EstimatorSummary summary;
    summary.m = m;
    summary.n = n;
    summary.replicates = options.replicates;
    summary.cfg = cfg;
    summary.estimates.assign(5, {});
    summary.order_freq.assign(k_max + 1, 0.0);
    int covered[3] = {0, 0, 0};
    for (const auto& rep : reps) {
      if (!rep.ok) {
        ++summary.failures;
        continue;
      }
      for (int p = 0; p < 5; ++p) summary.estimates[p].push_back(rep.values[p]);
      for (int j = 0; j < 3; ++j) covered[j] += rep.covered[j];
      summary.order_freq[rep.order] += 1.0 / options.replicates;
    }
    check_failures(summary.failures, options.replicates,
                   "example 1 at m = " + std::to_string(m) + ", n = " + std::to_string(n));
    const int ok = options.replicates - summary.failures;
    for (int p = 0; p < 5; ++p) {
      ParameterSummary ps;
      ps.name = names[p];
      ps.truth = truths[p];
      ps.mean = mean_of(summary.estimates[p]);
      ps.sd = sd_of(summary.estimates[p], ps.mean);
      ps.mean_se = ps.sd / std::sqrt(static_cast<double>(ok));
      if (p >= 1 && p <= 3) {
        ps.coverage = static_cast<double>(covered[p - 1]) / ok;
        ps.coverage_se = binomial_se(*ps.coverage, ok);
      }
      summary.params.push_back(ps);
    }
    out.push_back(std::move(summary));
  }
  return out;
}

std::vector<EstimatorSummary> run_example1(const std::vector<std::pair<int, int>>& sizes,
                                           int replicates, std::uint64_t seed) {
  Example1Options options;
  options.sizes = sizes;
  options.replicates = replicates;
  options.seed = seed;
  return run_example1(options);
}

std::string method_name(SelectionMethod method) {
  switch (method) {
    case SelectionMethod::aic: return "AIC";
    case SelectionMethod::bic: return "BIC";
    case SelectionMethod::dp: return "DP";
  }
  return "?";
}

int SelectionTable::modal_order() const {
  return static_cast<int>(std::max_element(freq.begin(), freq.end()) - freq.begin());
}

std::vector<Example2Model> example2_models() {
  const double betas[3][5] = {
      {0.4, 0.4, 0.0, 0.0, 0.0}, {0.5, 0.3, 0.1, 0.0, 0.0}, {0.3, 0.2, 0.1, 0.05, 0.0}};
  const int orders[3] = {2, 3, 4};
  std::vector<Example2Model> models;
  for (int i = 0; i < 3; ++i) {
    Example2Model mod;
    mod.id = i + 1;
    mod.true_order = orders[i];
    mod.params.beta = Eigen::VectorXd::Zero(6);
    for (int j = 0; j < 5; ++j) mod.params.beta(j + 1) = betas[i][j];
    mod.params.tau = 0.01;
    mod.params.sigma2_alpha = 0.0;
    mod.params.sigma2_eps = 0.1;
    models.push_back(mod);
  }
  return models;
}

Example2Result run_example2(const Example2Options& options) {
  if (options.replicates < 1) throw ArgumentError("replicates must be at least 1");
  const auto models = example2_models();
  Example2Result result;
  for (int id : options.models) {
    if (id < 1 || id > 3) throw ArgumentError("example 2 models are numbered 1..3");
    const Example2Model& model = models[id - 1];
    const std::uint64_t stream = static_cast<std::uint64_t>(id);

    PenaltyConfig cfg;
    if (options.fixed_cfg) {
      cfg = *options.fixed_cfg;
    } else {
      const PanelSeries train = simulate_panel(model.params, 1, options.m, kDefaultBurnIn,
                                               derive_seed(options.seed, kStreamExample2Tune + stream, 0));
      const PanelSeries test = simulate_panel(model.params, 1, options.m, kDefaultBurnIn,
                                              derive_seed(options.seed, kStreamExample2Tune + stream, 1));
      cfg = tune(train, options.k_max, options.grid, TuningMethod::test_panel, test, options.fit).best;
    }
    result.tuned.push_back(cfg);

    // -1 marks a failed fit.
    std::vector<std::array<int, 3>> picks(options.replicates, {-1, -1, -1});
    parallel_replicates(options.replicates, [&](int r) {
      const PanelSeries series = simulate_panel(model.params, 1, options.m, kDefaultBurnIn,
                                                derive_seed(options.seed, kStreamExample2 + stream, r));
      try {
        const IcTable ic = information_criteria(series, options.k_max, options.ic);
        picks[r][0] = ic.aic_order;
        picks[r][1] = ic.bic_order;
      } catch (const Error&) {
      }
      try {
        picks[r][2] = fit_mutare(series, options.k_max, cfg, options.fit).order;
      } catch (const Error&) {
      }
    });

    for (int mi = 0; mi < 3; ++mi) {
      SelectionTable t;
      t.method = static_cast<SelectionMethod>(mi);
      t.model = id;
      t.true_order = model.true_order;
      t.k_max = options.k_max;
      t.replicates = options.replicates;
      t.freq.assign(options.k_max + 1, 0.0);
      for (const auto& p : picks) {
        if (p[mi] < 0)
          ++t.failures;
        else
          t.freq[p[mi]] += 1.0;
      }
      for (double& f : t.freq) f /= options.replicates;
      for (double f : t.freq) t.freq_se.push_back(binomial_se(f, options.replicates));
      check_failures(t.failures, options.replicates,
                     "example 2 model " + std::to_string(id) + " " + method_name(t.method));
      result.tables.push_back(std::move(t));
    }
  }
  return result;
}

std::vector<SelectionTable> run_example2(int replicates, std::uint64_t seed) {
  Example2Options options;
  options.replicates = replicates;
  options.seed = seed;
  return run_example2(options).tables;
}

QqData qq_data(const std::vector<double>& estimates) {
  const std::size_t n = estimates.size();
  if (n < 20) throw ArgumentError("Q-Q data needs at least 20 replicates");
  std::vector<double> sorted = estimates;
  std::sort(sorted.begin(), sorted.end());
  const double mean = mean_of(sorted);
  const double sd = sd_of(sorted, mean);

  QqData out;
  out.degenerate = !(sd > 1e-12 * std::max(1.0, std::abs(mean)));
  const boost::math::normal normal;
  for (std::size_t i = 0; i < n; ++i) {
    const double p = (static_cast<double>(i) + 0.5) / static_cast<double>(n);
    const double sample = out.degenerate ? 0.0 : (sorted[i] - mean) / sd;
    out.points.push_back({boost::math::quantile(normal, p), sample});
  }
  return out;
}

std::vector<double> RateResult::ratios() const {
  std::vector<double> r;
  for (std::size_t i = 1; i < points.size(); ++i)
    r.push_back(points[i].median_abs_error / points[i - 1].median_abs_error);
  return r;
}

RateResult rate_check(std::pair<int, int> base_size, int doublings, int replicates,
                      std::uint64_t seed, const RateOptions& options) {
  if (replicates < 1) throw ArgumentError("replicates must be at least 1");
  if (doublings < 0) throw ArgumentError("doublings must be nonnegative");
  const MutareParams& truth = options.params;
  truth.validate();
  const int k = truth.k();

  RateResult result;
  for (int d = 0; d <= doublings; ++d) {
    const int m = base_size.first;
    const int n = base_size.second << d;
    std::vector<double> errors(replicates, std::nan(""));
    std::vector<char> outside(replicates, 0);
    parallel_replicates(replicates, [&](int r) {
      const PanelSeries panel = simulate_panel(truth, n, m, kDefaultBurnIn,
                                               derive_seed(seed, kStreamRate + d, r));
      outside[r] = truth.tau < panel.values().minCoeff() || truth.tau > panel.values().maxCoeff();
      try {
        errors[r] = std::abs(profile_tau(panel, k, options.trim).tau_hat - truth.tau);
      } catch (const Error&) {
      }
    });

    RatePoint point;
    point.m = m;
    point.n = n;
    point.total = static_cast<long>(n) * (m - k);
    std::vector<double> ok;
    for (double e : errors) {
      if (std::isnan(e))
        ++point.failures;
      else
        ok.push_back(e);
    }
    check_failures(point.failures, replicates, "rate check at n = " + std::to_string(n));
    point.median_abs_error = median_of(ok);
    if (std::count(outside.begin(), outside.end(), 1) > 0)
      result.warnings.push_back("true threshold lies outside the observed range at n = " +
                                std::to_string(n) + "; it is not identified");
    result.points.push_back(point);
  }
  return result;
}

}  // namespace mutare
