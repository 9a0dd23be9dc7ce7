#pragma once

#include "mutare/model.hpp"
#include "mutare/panel.hpp"

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace mutare {

/// Sufficient statistics of the stacked design at one threshold. With a
/// random intercept and a balanced row set, every GLS quantity is a function
/// of these matrices and the variance ratio only:
///   H'V^-1 H = gram - c * subject_outer,   H'V^-1 Y = cross - c * subject_cross,
///   Y'V^-1 Y = yy - c * subject_yy,        c = gamma / (1 + m_e gamma).
struct DesignStats {
  Eigen::MatrixXd gram;           // sum over rows of h h'
  Eigen::MatrixXd subject_outer;  // sum over subjects of s_i s_i', s_i = sum_t h_it
  Eigen::VectorXd cross;          // sum over rows of h y
  Eigen::VectorXd subject_cross;  // sum over subjects of s_i Y_i, Y_i = sum_t y_it
  double yy = 0.0;
  double subject_yy = 0.0;
  int n_subjects = 0;
  int rows_per_subject = 0;

  int n_obs() const { return n_subjects * rows_per_subject; }
};

/// Panel rows (subject, t) with their lag histories, for a fixed maximum lag k.
/// Rows are stored subject-major; every subject uses the same set of times.
class LaggedDesign {
 public:
  /// `times` are 0-based time indices, each >= k. Empty means all of k..m-1.
  LaggedDesign(const PanelSeries& panel, int k, std::vector<int> times = {});

  int k() const { return k_; }
  int n_subjects() const { return n_subjects_; }
  int rows_per_subject() const { return static_cast<int>(times_.size()); }
  int n_rows() const { return n_subjects_ * rows_per_subject(); }
  const std::vector<int>& times() const { return times_; }

  int subject(int row) const { return row / rows_per_subject(); }
  int time(int row) const { return times_[row % rows_per_subject()]; }
  double response(int row) const { return y_[row]; }

  /// y_{t-1}, ..., y_{t-k} for this row.
  std::span<const double> history(int row) const {
    return {lags_.data() + static_cast<std::size_t>(row) * k_, static_cast<std::size_t>(k_)};
  }

  /// min(y_{t-1}, ..., y_{t-j}); lag j is active exactly when tau is below it.
  double lag_min(int row, int j) const { return mins_[static_cast<std::size_t>(row) * k_ + j - 1]; }

  int active_lags(int row, double tau) const;
  RegressorRow regressor(int row, double tau) const;

  /// Stacked N_e x (k+1) regressor matrix.
  Eigen::MatrixXd matrix(double tau) const;
  Eigen::VectorXd responses() const;

  /// Direct accumulation of the sufficient statistics.
  DesignStats stats(double tau) const;

  /// Sample variance of the responses in the row set.
  double response_variance() const { return response_variance_; }

 private:
  int k_;
  int n_subjects_;
  std::vector<int> times_;
  std::vector<double> y_;
  std::vector<double> lags_;
  std::vector<double> mins_;
  std::vector<double> subject_totals_;
  double response_variance_ = 0.0;

  friend class StatsSweep;
};

/// Threshold crossings of a design, sorted ascending: once tau reaches
/// `at[e]`, row `row[e]` loses lag `lag[e]` and every later one.
struct ThresholdEvents {
  std::vector<double> at;
  std::vector<int> row;
  std::vector<int> lag;

  explicit ThresholdEvents(const LaggedDesign& design);
};

/// Keeps DesignStats current while tau increases, touching only rows whose
/// indicator pattern changes. Each row changes at most k times over a sweep.
class StatsSweep {
 public:
  StatsSweep(const LaggedDesign& design, const ThresholdEvents& events, double tau);

  /// Requires tau >= the current threshold.
  void advance_to(double tau);

  double tau() const { return tau_; }
  const DesignStats& stats() const { return stats_; }

 private:
  void update_row(int row, int new_active);

  const LaggedDesign& design_;
  const ThresholdEvents& events_;
  double tau_;
  std::size_t next_event_;
  std::vector<int> active_;
  Eigen::MatrixXd subject_sums_;  // (k+1) x n
  DesignStats stats_;
};

}  // namespace mutare
