#include "mutare/model.hpp"

#include "mutare/errors.hpp"

#include <boost/random/mersenne_twister.hpp>
#include <boost/random/normal_distribution.hpp>

#include <cmath>

namespace mutare {

void MutareParams::validate() const {
  if (beta.size() < 1) throw ArgumentError("beta must contain at least the intercept");
  if (!beta.allFinite() || !std::isfinite(tau))
    throw ArgumentError("parameters must be finite");
  if (!(sigma2_alpha >= 0.0) || !std::isfinite(sigma2_alpha))
    throw ArgumentError("sigma2_alpha must be nonnegative");
  if (!(sigma2_eps > 0.0) || !std::isfinite(sigma2_eps))
    throw ArgumentError("sigma2_eps must be positive");
}

double MutareParams::lag_mass() const {
  return beta.size() > 1 ? beta.tail(beta.size() - 1).cwiseAbs().sum() : 0.0;
}

int active_lag_count(std::span<const double> history, double tau, int k) {
  if (k < 0) throw ArgumentError("k must be nonnegative");
  if (static_cast<int>(history.size()) < k)
    throw ArgumentError("history has " + std::to_string(history.size()) +
                        " values, need at least k = " + std::to_string(k));
  int a = 0;
  while (a < k && history[a] > tau) ++a;
  return a;
}

RegressorRow build_regressor_row(std::span<const double> history, double tau, int k) {
  const int a = active_lag_count(history, tau, k);
  RegressorRow row = RegressorRow::Zero(k + 1);
  row(0) = 1.0;
  for (int j = 1; j <= a; ++j) row(j) = history[j - 1];
  return row;
}

double conditional_mean(const MutareParams& params, double alpha_i,
                        std::span<const double> history) {
  const int k = params.k();
  const int a = active_lag_count(history, params.tau, k);
  double mean = alpha_i + params.beta(0);
  for (int j = 1; j <= a; ++j) mean += params.beta(j) * history[j - 1];
  return mean;
}

SimulatedPanel simulate_panel_detailed(const MutareParams& params, int n, int m,
                                       int burn_in, std::uint64_t seed) {
  params.validate();
  if (n < 1) throw ArgumentError("n must be at least 1");
  if (m < 1) throw ArgumentError("m must be at least 1");
  if (burn_in < 0) throw ArgumentError("burn_in must be nonnegative");

  const int k = params.k();
  boost::random::mt19937_64 engine(seed);
  boost::random::normal_distribution<double> std_normal(0.0, 1.0);
  const double sd_alpha = std::sqrt(params.sigma2_alpha);
  const double sd_eps = std::sqrt(params.sigma2_eps);

  Eigen::MatrixXd values(n, m);
  Eigen::MatrixXd noise(n, m);
  Eigen::VectorXd alpha(n);
  // history[0] is the most recent value.
  std::vector<double> history(k);
  for (int i = 0; i < n; ++i) {
    alpha(i) = sd_alpha * std_normal(engine);
    std::fill(history.begin(), history.end(), params.beta(0));
    for (int step = 0; step < burn_in + m; ++step) {
      const double eps = sd_eps * std_normal(engine);
      const double y = conditional_mean(params, alpha(i), history) + eps;
      if (k > 0) {
        std::copy_backward(history.begin(), history.end() - 1, history.end());
        history[0] = y;
      }
      if (step >= burn_in) {
        values(i, step - burn_in) = y;
        noise(i, step - burn_in) = eps;
      }
    }
  }

  SimulatedPanel out{PanelSeries(std::move(values)), std::move(alpha), std::move(noise), {}};
  if (params.lag_mass() >= 1.0)
    out.warnings.push_back("sum of |beta_j| over lags is " + std::to_string(params.lag_mass()) +
                           " >= 1; the process may not be stationary");
  return out;
}

PanelSeries simulate_panel(const MutareParams& params, int n, int m, int burn_in,
                           std::uint64_t seed) {
  return simulate_panel_detailed(params, n, m, burn_in, seed).panel;
}

namespace {
std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}
}  // namespace

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index) {
  return splitmix64(splitmix64(splitmix64(base) ^ stream) ^ index);
}

}  // namespace mutare
