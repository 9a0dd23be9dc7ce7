#include "mutare/selection.hpp"

#include "mutare/errors.hpp"

#include <cmath>
#include <limits>

namespace mutare {

namespace {

VarianceOptions variance_options(const LaggedDesign& design, const FitOptions& options) {
  VarianceOptions v;
  v.fix_eps = options.fix_eps;
  v.pin_alpha_zero = design.n_subjects() == 1;
  return v;
}

Support support_of(const Eigen::VectorXd& beta) {
  Support s;
  for (Eigen::Index j = 1; j < beta.size(); ++j)
    if (std::abs(beta(j)) > kZeroTol) s.push_back(static_cast<int>(j));
  return s;
}

template <class F>
auto staged(const char* stage, F&& body) {
  try {
    return body();
  } catch (Error& e) {
    e.add_stage(stage);
    throw;
  }
}

void absorb(FitDiagnostics& d, const MipSolution& sol) {
  d.node_count += sol.node_count;
  d.solver_optimal = d.solver_optimal && sol.optimal;
  d.big_m_binding = sol.big_m_binding;
}

}  // namespace

PilotFit fit_pilot(const LaggedDesign& design, std::span<const double> candidates,
                   const FitOptions& options) {
  return staged("pilot", [&] {
    PilotFit pilot;
    pilot.candidates.assign(candidates.begin(), candidates.end());
    pilot.variance = variance_options(design, options);
    pilot.profile = profile_tau(design, candidates, full_support(design.k()), pilot.variance);
    return pilot;
  });
}

FitResult fit_from_pilot(const LaggedDesign& design, const PilotFit& pilot,
                         const PenaltyConfig& cfg, const FitOptions& options) {
  const int k = design.k();
  FitResult out;
  out.pilot_beta = pilot.profile.beta_hat;
  out.diagnostics.grid_size = pilot.profile.grid_size;
  out.diagnostics.skipped_candidates = pilot.profile.skipped;
  out.diagnostics.alpha_pinned = pilot.variance.pin_alpha_zero;

  out.cfg = staged("weights", [&] {
    PenaltyConfig used = cfg;
    used.validate();
    used.weights = adaptive_weights(pilot.profile.beta_hat, cfg.rho);
    return used;
  });

  const MipSolution first = staged("solve", [&] {
    const CovarianceSpec cov{pilot.profile.sigma2_alpha_hat, pilot.profile.sigma2_eps_hat};
    return solve_branch_and_bound(whiten(design, pilot.profile.tau_hat, cov), out.cfg, k,
                                  options.solver);
  });
  absorb(out.diagnostics, first);

  // Refinement: threshold and variances given the selected support. With no
  // lag left the threshold is unidentified and the pilot value is kept.
  const Support selected = support_of(first.beta);
  double tau = pilot.profile.tau_hat;
  CovarianceSpec cov{pilot.profile.sigma2_alpha_hat, pilot.profile.sigma2_eps_hat};
  MipSolution final_solution = first;
  staged("refine", [&] {
    if (!selected.empty()) {
      const ProfiledFit refit = profile_tau(design, pilot.candidates, selected, pilot.variance);
      tau = refit.tau_hat;
      cov = {refit.sigma2_alpha_hat, refit.sigma2_eps_hat};
      out.diagnostics.skipped_candidates += refit.skipped;
    } else {
      const VarianceFit vf = fit_variance_components(design.stats(tau), selected, pilot.variance,
                                                     design.response_variance());
      cov = {vf.sigma2_alpha, vf.sigma2_eps};
    }
    final_solution = solve_branch_and_bound(whiten(design, tau, cov), out.cfg, k, options.solver);
    return 0;
  });
  absorb(out.diagnostics, final_solution);
  if (out.diagnostics.big_m_binding)
    out.diagnostics.warnings.push_back("big-M constraint is binding; consider a larger --big-m");
  if (!out.diagnostics.solver_optimal)
    out.diagnostics.warnings.push_back("solver stopped at the time limit; solution may be suboptimal");

  out.params.beta = final_solution.beta;
  out.params.tau = tau;
  out.params.sigma2_alpha = cov.sigma2_alpha;
  out.params.sigma2_eps = cov.sigma2_eps;
  out.order = order_of(out.params.beta);
  out.support = support_of(out.params.beta);
  staged("covariance", [&] {
    const DesignStats stats = design.stats(tau);
    out.loglik = log_likelihood(stats, out.params.beta, cov);
    out.penalized_objective = double_penalized_objective(out.loglik, out.params.beta, out.cfg);
    out.cov_beta = asymptotic_covariance(stats, cov, out.support);
    return 0;
  });
  return out;
}

FitResult fit_mutare(const LaggedDesign& design, std::span<const double> candidates,
                     const PenaltyConfig& cfg, const FitOptions& options) {
  const PilotFit pilot = fit_pilot(design, candidates, options);
  return fit_from_pilot(design, pilot, cfg, options);
}

FitResult fit_mutare(const PanelSeries& panel, int k_max, const PenaltyConfig& cfg,
                     const FitOptions& options) {
  if (k_max < 0) throw ArgumentError("k_max must be nonnegative");
  if (panel.series_length() < k_max + 2)
    throw ArgumentError("series length " + std::to_string(panel.series_length()) +
                        " is too short for k_max = " + std::to_string(k_max));
  cfg.validate();
  const LaggedDesign design(panel, k_max);
  const auto candidates = candidate_thresholds(panel, options.trim);
  return fit_mutare(design, candidates, cfg, options);
}

std::vector<double> IcTable::values(Criterion c) const {
  std::vector<double> v;
  for (const auto& r : rows) v.push_back(c == Criterion::aic ? r.aic : r.bic);
  return v;
}

IcTable information_criteria(const PanelSeries& panel, int k_max, const IcOptions& options) {
  if (k_max < 0) throw ArgumentError("k_max must be nonnegative");
  if (panel.series_length() < k_max + 2)
    throw ArgumentError("series length " + std::to_string(panel.series_length()) +
                        " is too short for k_max = " + std::to_string(k_max));
  const auto candidates = candidate_thresholds(panel, options.trim);
  VarianceOptions variance;
  variance.fix_eps = options.fix_eps;
  variance.pin_alpha_zero = panel.n_subjects() == 1;

  IcTable table;
  double best_aic = std::numeric_limits<double>::infinity();
  double best_bic = best_aic;
  for (int q = 0; q <= k_max; ++q) {
    const ProfiledFit fit = staged(("order " + std::to_string(q)).c_str(), [&] {
      const LaggedDesign design(panel, q);
      return profile_tau(design, candidates, full_support(q), variance);
    });
    IcRow row;
    row.order = q;
    row.loglik = fit.loglik;
    row.n_params = (q + 1) + 2 + (options.count_threshold ? 1 : 0);
    row.n_eff = panel.n_subjects() * (panel.series_length() - q);
    row.aic = -2.0 * fit.loglik + 2.0 * row.n_params;
    row.bic = -2.0 * fit.loglik + std::log(static_cast<double>(row.n_eff)) * row.n_params;
    row.tau = fit.tau_hat;
    // Strict comparison: ties keep the smaller order.
    if (row.aic < best_aic) {
      best_aic = row.aic;
      table.aic_order = q;
    }
    if (row.bic < best_bic) {
      best_bic = row.bic;
      table.bic_order = q;
    }
    table.rows.push_back(row);
  }
  return table;
}

std::pair<int, std::vector<double>> select_order_ic(const PanelSeries& panel, int k_max,
                                                    Criterion criterion,
                                                    const IcOptions& options) {
  const IcTable table = information_criteria(panel, k_max, options);
  return {table.selected(criterion), table.values(criterion)};
}

}  // namespace mutare
