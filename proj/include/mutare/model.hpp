#pragma once

#include "mutare/panel.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace mutare {

/// Fixed effects beta_0..beta_k, common threshold, random-intercept variance
/// and error variance.
struct MutareParams {
  Eigen::VectorXd beta;
  double tau = 0.0;
  double sigma2_alpha = 0.0;
  double sigma2_eps = 1.0;

  int k() const { return static_cast<int>(beta.size()) - 1; }

  /// Throws ArgumentError on an empty beta, negative sigma2_alpha or
  /// non-positive sigma2_eps.
  void validate() const;

  /// Sum of |beta_j| over the lags; the process is treated as stationary
  /// when this is below one.
  double lag_mass() const;
};

/// (1, y_{t-1} I_1, ..., y_{t-k} I_k) where I_j = [y_{t-1} > tau, ..., y_{t-j} > tau].
using RegressorRow = Eigen::VectorXd;

/// `history[0]` is y_{t-1}, `history[1]` is y_{t-2}, and so on.
RegressorRow build_regressor_row(std::span<const double> history, double tau, int k);

/// Number of leading lags whose indicator product is one.
int active_lag_count(std::span<const double> history, double tau, int k);

double conditional_mean(const MutareParams& params, double alpha_i,
                        std::span<const double> history);

struct SimulatedPanel {
  PanelSeries panel;
  Eigen::VectorXd alpha;     // per-subject random intercepts
  Eigen::MatrixXd noise;     // recorded errors, aligned with the panel
  std::vector<std::string> warnings;
};

inline constexpr int kDefaultBurnIn = 200;

/// Simulates n subjects of length m. Pre-sample lags start at beta_0; the first
/// `burn_in` steps are discarded. The same seed always yields the same panel.
SimulatedPanel simulate_panel_detailed(const MutareParams& params, int n, int m,
                                       int burn_in, std::uint64_t seed);

PanelSeries simulate_panel(const MutareParams& params, int n, int m,
                           int burn_in = kDefaultBurnIn, std::uint64_t seed = 1);

/// Stream-splitting for replicated experiments: a well-mixed 64-bit seed for
/// (base, stream, index).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index);

}  // namespace mutare
