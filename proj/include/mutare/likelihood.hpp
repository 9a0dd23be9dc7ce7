#pragma once

#include "mutare/design.hpp"
#include "mutare/model.hpp"
#include "mutare/panel.hpp"

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <vector>

namespace mutare {

/// Per-subject covariance W_i = sigma2_eps I + sigma2_alpha 1 1'.
struct CovarianceSpec {
  double sigma2_alpha = 0.0;
  double sigma2_eps = 1.0;

  void validate() const;
  double ratio() const { return sigma2_alpha / sigma2_eps; }
};

/// Lag indices j >= 1 whose coefficient is free; the intercept is always free.
using Support = std::vector<int>;

Support full_support(int k);

/// {0} followed by the support, i.e. the design columns in use.
std::vector<int> design_columns(const Support& support);

struct VarianceOptions {
  std::optional<double> fix_eps;  // hold sigma2_eps at this value
  bool pin_alpha_zero = false;    // sigma2_alpha = 0 (single-series model)
};

struct VarianceFit {
  double sigma2_alpha = 0.0;
  double sigma2_eps = 1.0;
  double loglik = 0.0;
  Eigen::VectorXd beta;  // length k+1, zero off the support
};

struct ProfiledFit {
  Eigen::VectorXd beta_hat;
  double tau_hat = 0.0;
  double sigma2_alpha_hat = 0.0;
  double sigma2_eps_hat = 1.0;
  double loglik = 0.0;  // log L, not 2 log L
  Support support;
  std::size_t grid_size = 0;
  std::size_t skipped = 0;  // candidates whose design was rank-deficient
};

struct SupportCovariance {
  std::vector<int> columns;  // coefficient index of each row/column
  Eigen::MatrixXd cov;

  /// Standard error of beta_j, or NaN when j is outside the support.
  double standard_error(int j) const;
};

/// Conditional Gaussian log likelihood of the rows t = k..m-1 (the first k
/// observations of each subject are history), using the rank-one inverse and
/// determinant of each W_i.
double log_likelihood(const PanelSeries& panel, const MutareParams& params);
double log_likelihood(const LaggedDesign& design, const MutareParams& params);

/// The same quantity from sufficient statistics.
double log_likelihood(const DesignStats& stats, const Eigen::VectorXd& beta,
                      const CovarianceSpec& cov);

/// GLS solution restricted to {0} and the support; zeros elsewhere.
/// Throws SingularityError naming the dependent columns.
Eigen::VectorXd gls_beta(const DesignStats& stats, const CovarianceSpec& cov,
                         const Support& support);
Eigen::VectorXd gls_beta(const LaggedDesign& design, double tau, const CovarianceSpec& cov,
                         const Support& support);
Eigen::VectorXd gls_beta(const PanelSeries& panel, int k, double tau,
                         const CovarianceSpec& cov, const Support& support);

/// Unique observed values between the `trim` and `1 - trim` sample quantiles.
std::vector<double> candidate_thresholds(std::span<const double> values, double trim);
std::vector<double> candidate_thresholds(const PanelSeries& panel, double trim);

inline constexpr double kDefaultTrim = 0.10;
inline constexpr double kMinSigma2Eps = 1e-8;

/// Maximizes the likelihood over the variance components with beta profiled
/// out by GLS at every evaluation.
VarianceFit fit_variance_components(const DesignStats& stats, const Support& support,
                                    const VarianceOptions& options, double response_variance);

std::pair<double, double> estimate_variance_components(const PanelSeries& panel, double tau,
                                                       int k,
                                                       std::optional<double> fix_eps = {});

/// Threshold profile: for every candidate, maximize over beta and the variance
/// components and keep the best. Ties go to the smaller threshold. Candidates
/// are processed in fixed-size chunks (parallel across chunks), so the result
/// does not depend on the number of threads.
ProfiledFit profile_tau(const LaggedDesign& design, std::span<const double> candidates,
                        const Support& support, const VarianceOptions& options);
ProfiledFit profile_tau(const PanelSeries& panel, int k, double trim = kDefaultTrim);

/// Serial reference: rebuilds the statistics from scratch at every candidate.
ProfiledFit profile_tau_reference(const LaggedDesign& design, std::span<const double> candidates,
                                  const Support& support, const VarianceOptions& options);

/// Inverse GLS information (H_S' W^-1 H_S)^-1 over {0} and the support.
SupportCovariance asymptotic_covariance(const DesignStats& stats, const CovarianceSpec& cov,
                                        const Support& support);
SupportCovariance asymptotic_covariance(const LaggedDesign& design, const ProfiledFit& fit);
SupportCovariance asymptotic_covariance(const PanelSeries& panel, const ProfiledFit& fit);

}  // namespace mutare
