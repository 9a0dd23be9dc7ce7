#pragma once

#include <Eigen/Dense>

namespace mutare {

inline constexpr double kZeroTol = 1e-8;
inline constexpr double kZeroPilotWeight = 1e10;
inline constexpr double kDefaultBigM = 50.0;

/// Tuning constants of the double penalty. `weights` holds nu_1..nu_k; an
/// empty vector means unit weights.
struct PenaltyConfig {
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double rho = 1.0;
  Eigen::VectorXd weights;
  double big_m = kDefaultBigM;

  void validate() const;

  /// nu_j for lag j >= 1.
  double weight(int j) const { return weights.size() == 0 ? 1.0 : weights(j - 1); }
};

/// Largest lag j >= 1 with |beta_j| > tol, or 0. The intercept never counts.
int order_of(const Eigen::VectorXd& beta, double tol = kZeroTol);

/// 2 loglik - lambda1 sum_j nu_j |beta_j| - lambda2 order_of(beta).
double double_penalized_objective(double loglik, const Eigen::VectorXd& beta,
                                  const PenaltyConfig& cfg);

/// Order penalty written as an L0 count plus a count of zeros that sit below
/// a later nonzero coefficient.
double penalty_prop1(const Eigen::VectorXd& beta, double lambda2, double tol = kZeroTol);

/// Order penalty written as lambda2 sum_j (1 - I(beta_j = ... = beta_k = 0)).
double penalty_prop2(const Eigen::VectorXd& beta, double lambda2, double tol = kZeroTol);

/// nu_j = |pilot_j|^-rho for j = 1..k; numerically zero pilots get kZeroPilotWeight.
Eigen::VectorXd adaptive_weights(const Eigen::VectorXd& pilot_beta, double rho);

}  // namespace mutare
