#pragma once

#include "mutare/panel.hpp"
#include "mutare/penalty.hpp"
#include "mutare/selection.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

namespace mutare {

/// h-block cross-validation layout over the effective rows t = k..m-1
/// (0-based row index r corresponds to time k + r).
struct CvPlan {
  int m = 0;
  int k = 0;
  int h = 0;
  int n_c = 0;
  int n_v = 0;
  std::vector<int> offsets;  // first row index of each validation block

  /// Throws ArgumentError when the validation block would be empty.
  static CvPlan make(int m, int k);

  int folds() const { return static_cast<int>(offsets.size()); }
  std::vector<int> validation_times(int fold) const;
  std::vector<int> training_times(int fold) const;
};

/// Mean squared one-step prediction error over all folds, subjects and
/// validation rows.
double hblock_cv_score(const PanelSeries& panel, int k, const PenaltyConfig& cfg,
                       const CvPlan& plan, const FitOptions& options = {});

/// Fit on `train`, predict the rows t = k..m-1 of `test`.
double test_panel_score(const PanelSeries& train, const PanelSeries& test, int k,
                        const PenaltyConfig& cfg, const FitOptions& options = {});

struct TuningGrid {
  std::vector<double> lambda1;
  std::vector<double> lambda2;
  std::vector<double> rho;

  static TuningGrid defaults();
  void validate() const;
  std::size_t size() const { return lambda1.size() * lambda2.size() * rho.size(); }
};

enum class TuningMethod { hblock, test_panel };

struct TuningRow {
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double rho = 1.0;
  double score = 0.0;  // infinite when every fit at this point failed
  int rank = 0;        // 1 = selected
};

struct TuningResult {
  PenaltyConfig best;
  std::vector<TuningRow> rows;  // grid order: rho outermost, lambda1 innermost
};

/// Exhaustive grid search; ties prefer larger lambda2, then larger lambda1.
TuningResult tune(const PanelSeries& panel, int k, const TuningGrid& grid, TuningMethod method,
                  const std::optional<PanelSeries>& test = std::nullopt,
                  const FitOptions& options = {}, double big_m = kDefaultBigM);

void write_tuning_report(std::ostream& out, const TuningResult& result);
void write_tuning_report(const std::filesystem::path& path, const TuningResult& result);

}  // namespace mutare
