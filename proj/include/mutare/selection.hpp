#pragma once

#include "mutare/likelihood.hpp"
#include "mutare/mip.hpp"
#include "mutare/model.hpp"
#include "mutare/panel.hpp"
#include "mutare/penalty.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mutare {

struct FitOptions {
  double trim = kDefaultTrim;
  std::optional<double> fix_eps;
  SolverOptions solver;
};

struct FitDiagnostics {
  std::size_t node_count = 0;       // both solver passes
  std::size_t grid_size = 0;        // threshold candidates
  std::size_t skipped_candidates = 0;
  bool solver_optimal = true;
  bool big_m_binding = false;
  bool alpha_pinned = false;        // single series, sigma2_alpha held at 0
  std::vector<std::string> warnings;
};

/// Unpenalized full-support fit; the first stage of the pipeline.
struct PilotFit {
  ProfiledFit profile;
  std::vector<double> candidates;
  VarianceOptions variance;
};

struct FitResult {
  MutareParams params;
  int order = 0;
  double loglik = 0.0;
  double penalized_objective = 0.0;
  SupportCovariance cov_beta;
  Eigen::VectorXd pilot_beta;
  PenaltyConfig cfg;  // with the adaptive weights that were used
  Support support;
  FitDiagnostics diagnostics;
};

PilotFit fit_pilot(const LaggedDesign& design, std::span<const double> candidates,
                   const FitOptions& options = {});

/// Stages 2-5 of the pipeline given a pilot on the same design.
FitResult fit_from_pilot(const LaggedDesign& design, const PilotFit& pilot,
                         const PenaltyConfig& cfg, const FitOptions& options = {});

FitResult fit_mutare(const LaggedDesign& design, std::span<const double> candidates,
                     const PenaltyConfig& cfg, const FitOptions& options = {});

/// Pilot MLE, adaptive weights, branch and bound at the pilot threshold and
/// variances, then one refinement pass on the selected support.
FitResult fit_mutare(const PanelSeries& panel, int k_max, const PenaltyConfig& cfg,
                     const FitOptions& options = {});

enum class Criterion { aic, bic };

struct IcOptions {
  double trim = kDefaultTrim;
  bool count_threshold = true;
  std::optional<double> fix_eps;
};

struct IcRow {
  int order = 0;
  double loglik = 0.0;
  int n_params = 0;
  int n_eff = 0;
  double aic = 0.0;
  double bic = 0.0;
  double tau = 0.0;
};

struct IcTable {
  std::vector<IcRow> rows;
  int aic_order = 0;
  int bic_order = 0;

  int selected(Criterion c) const { return c == Criterion::aic ? aic_order : bic_order; }
  std::vector<double> values(Criterion c) const;
};

/// Unpenalized fits of every order 0..k_max, each conditioning on its own
/// first q observations.
IcTable information_criteria(const PanelSeries& panel, int k_max, const IcOptions& options = {});

std::pair<int, std::vector<double>> select_order_ic(const PanelSeries& panel, int k_max,
                                                    Criterion criterion,
                                                    const IcOptions& options = {});

}  // namespace mutare
