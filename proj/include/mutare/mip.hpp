#pragma once

#include "mutare/design.hpp"
#include "mutare/errors.hpp"
#include "mutare/likelihood.hpp"
#include "mutare/penalty.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace mutare {

/// Design and response premultiplied by W^{-1/2} at fixed (tau, sigma2_alpha,
/// sigma2_eps), so that 2 log L(beta) = -(N log 2 pi + log|W| + ||Y~ - X~ beta||^2).
struct WhitenedProblem {
  Eigen::MatrixXd design;    // N x (k+1), column 0 is the whitened intercept
  Eigen::VectorXd response;  // N
  double tau = 0.0;
  double sigma2_alpha = 0.0;
  double sigma2_eps = 1.0;
  double log_det_w = 0.0;

  int k() const { return static_cast<int>(design.cols()) - 1; }
  int n_obs() const { return static_cast<int>(design.rows()); }
  double residual_norm2(const Eigen::VectorXd& beta) const;
  double two_loglik(const Eigen::VectorXd& beta) const;
};

WhitenedProblem whiten(const LaggedDesign& design, double tau, const CovarianceSpec& cov);

/// A problem given directly in whitened form (W = I).
WhitenedProblem make_whitened_problem(Eigen::MatrixXd design, Eigen::VectorXd response);

/// Cyclic coordinate descent for
///   max 2 log L(beta) - lambda1 sum_{j in active} nu_j |beta_j|,
/// with the intercept free and beta_j = 0 outside the active set. Once the
/// sign pattern settles, the active system is solved exactly.
class WeightedLasso {
 public:
  static constexpr double kKktTol = 1e-8;
  static constexpr int kMaxSweeps = 10000;

  explicit WeightedLasso(const WhitenedProblem& problem);

  /// `active` holds lag indices in 1..k, in any order.
  Eigen::VectorXd solve(const PenaltyConfig& cfg, std::span<const int> active) const;

  /// Largest violation of the optimality conditions at beta.
  double kkt_violation(const Eigen::VectorXd& beta, const PenaltyConfig& cfg,
                       std::span<const int> active) const;

 private:
  const WhitenedProblem& problem_;
  Eigen::MatrixXd gram_;
  Eigen::VectorXd cross_;
};

Eigen::VectorXd lasso_subproblem(const WhitenedProblem& problem, const PenaltyConfig& cfg,
                                 std::span<const int> active);

struct MipSolution {
  Eigen::VectorXd beta;
  int order = 0;
  double objective = 0.0;  // double-penalized objective at beta
  std::size_t node_count = 0;
  bool optimal = true;
  bool big_m_binding = false;
};

struct SolverOptions {
  std::size_t node_budget = 100000;
  std::optional<double> time_limit_seconds;
  std::ostream* trace = nullptr;
};

class NodeBudgetError : public Error {
 public:
  NodeBudgetError(const std::string& message, MipSolution incumbent)
      : Error(ErrorKind::budget, message), incumbent_(std::move(incumbent)) {}
  const MipSolution& incumbent() const noexcept { return incumbent_; }

 private:
  MipSolution incumbent_;
};

/// Exact maximizer by enumerating the order bound q = 0..k; ties go to the
/// smaller realized order.
MipSolution solve_order_enumeration(const WhitenedProblem& problem, const PenaltyConfig& cfg,
                                    int k);

/// Best-first branch and bound over the indicators z_1..z_k of the nested
/// big-M formulation. Fixing z_j = 0 zeroes beta_j..beta_k; the node
/// relaxation drops lambda2 z_j for unfixed j and is a weighted lasso.
MipSolution solve_branch_and_bound(const WhitenedProblem& problem, const PenaltyConfig& cfg,
                                   int k, const SolverOptions& options = {});

}  // namespace mutare
