#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace mutare {

/// Balanced panel of responses: one row per subject, one column per time point.
class PanelSeries {
 public:
  PanelSeries() = default;
  explicit PanelSeries(Eigen::MatrixXd values);
  PanelSeries(Eigen::MatrixXd values, std::vector<std::string> subject_ids);

  int n_subjects() const { return static_cast<int>(values_.rows()); }
  int series_length() const { return static_cast<int>(values_.cols()); }
  int total_size() const { return n_subjects() * series_length(); }

  double operator()(int subject, int time) const { return values_(subject, time); }
  const Eigen::MatrixXd& values() const { return values_; }
  const std::vector<std::string>& subject_ids() const { return ids_; }

  /// Sample variance of all observations pooled across subjects.
  double pooled_variance() const;

  /// Panel restricted to the given subjects, in the given order.
  PanelSeries select_subjects(const std::vector<int>& subjects) const;

 private:
  Eigen::MatrixXd values_;
  std::vector<std::string> ids_;
};

/// Reads the `subject,time,y` CSV format. Rows must be sorted by (subject, time),
/// times run 1..m per subject, and all subjects share the same m.
PanelSeries read_panel_csv(std::istream& in);
PanelSeries read_panel_csv(const std::filesystem::path& path);

void write_panel_csv(std::ostream& out, const PanelSeries& panel);
void write_panel_csv(const std::filesystem::path& path, const PanelSeries& panel);

/// Decimal text with 12 significant digits; used for every numeric output.
std::string format_number(double value);

/// Rounds to the value `format_number` would print.
double round_significant(double value);

}  // namespace mutare
