#include "mutare/penalty.hpp"

#include "mutare/errors.hpp"

#include <cmath>

namespace mutare {

namespace {
constexpr double kZeroPilot = 1e-10;

bool is_zero(double v, double tol) { return !(std::abs(v) > tol); }
}  // namespace

void PenaltyConfig::validate() const {
  if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0)) throw ArgumentError("lambdas must be nonnegative");
  if (!(rho > 0.0)) throw ArgumentError("rho must be positive");
  if (!(big_m > 0.0)) throw ArgumentError("big-M must be positive");
  for (Eigen::Index j = 0; j < weights.size(); ++j)
    if (!(weights(j) >= 0.0)) throw ArgumentError("penalty weights must be nonnegative");
}

int order_of(const Eigen::VectorXd& beta, double tol) {
  for (Eigen::Index j = beta.size() - 1; j >= 1; --j)
    if (!is_zero(beta(j), tol)) return static_cast<int>(j);
  return 0;
}

double double_penalized_objective(double loglik, const Eigen::VectorXd& beta,
                                  const PenaltyConfig& cfg) {
  const int k = static_cast<int>(beta.size()) - 1;
  if (cfg.weights.size() != 0 && cfg.weights.size() != k)
    throw ArgumentError("weight vector length does not match the number of lags");
  double l1 = 0.0;
  for (int j = 1; j <= k; ++j)
    if (beta(j) != 0.0) l1 += cfg.weight(j) * std::abs(beta(j));
  return 2.0 * loglik - cfg.lambda1 * l1 - cfg.lambda2 * order_of(beta);
}

double penalty_prop1(const Eigen::VectorXd& beta, double lambda2, double tol) {
  const int k = static_cast<int>(beta.size()) - 1;
  int nonzero = 0;
  int covered_zero = 0;
  for (int j = 1; j <= k; ++j) {
    if (!is_zero(beta(j), tol)) {
      ++nonzero;
      continue;
    }
    for (int p = 1; j + p <= k; ++p) {
      if (!is_zero(beta(j + p), tol)) {
        ++covered_zero;
        break;
      }
    }
  }
  return lambda2 * (nonzero + covered_zero);
}

double penalty_prop2(const Eigen::VectorXd& beta, double lambda2, double tol) {
  const int k = static_cast<int>(beta.size()) - 1;
  double total = 0.0;
  for (int j = 1; j <= k; ++j) {
    bool tail_zero = true;
    for (int p = j; p <= k && tail_zero; ++p) tail_zero = is_zero(beta(p), tol);
    total += tail_zero ? 0.0 : 1.0;
  }
  return lambda2 * total;
}

Eigen::VectorXd adaptive_weights(const Eigen::VectorXd& pilot_beta, double rho) {
  if (!(rho > 0.0)) throw ArgumentError("rho must be positive");
  const Eigen::Index k = pilot_beta.size() - 1;
  Eigen::VectorXd nu(std::max<Eigen::Index>(k, 0));
  for (Eigen::Index j = 1; j <= k; ++j) {
    const double a = std::abs(pilot_beta(j));
    nu(j - 1) = a < kZeroPilot ? kZeroPilotWeight : std::pow(a, -rho);
  }
  return nu;
}

}  // namespace mutare
