#include "mutare/design.hpp"

#include "mutare/errors.hpp"

#include <algorithm>
#include <numeric>

namespace mutare {

LaggedDesign::LaggedDesign(const PanelSeries& panel, int k, std::vector<int> times)
    : k_(k), n_subjects_(panel.n_subjects()), times_(std::move(times)) {
  const int m = panel.series_length();
  if (k < 0) throw ArgumentError("k must be nonnegative");
  if (times_.empty()) {
    if (m <= k)
      throw DataError("series length " + std::to_string(m) + " leaves no rows for k = " +
                      std::to_string(k));
    times_.resize(m - k);
    std::iota(times_.begin(), times_.end(), k);
  }
  for (int t : times_)
    if (t < k || t >= m)
      throw ArgumentError("design time " + std::to_string(t) + " outside [k, m)");

  const std::size_t rows = static_cast<std::size_t>(n_subjects_) * times_.size();
  y_.resize(rows);
  lags_.resize(rows * k_);
  mins_.resize(rows * k_);
  subject_totals_.assign(n_subjects_, 0.0);
  std::size_t r = 0;
  for (int i = 0; i < n_subjects_; ++i) {
    for (int t : times_) {
      y_[r] = panel(i, t);
      subject_totals_[i] += y_[r];
      double running = 0.0;
      for (int j = 1; j <= k_; ++j) {
        const double v = panel(i, t - j);
        lags_[r * k_ + j - 1] = v;
        running = (j == 1) ? v : std::min(running, v);
        mins_[r * k_ + j - 1] = running;
      }
      ++r;
    }
  }
  if (rows > 1) {
    const double mean = std::accumulate(y_.begin(), y_.end(), 0.0) / rows;
    double ss = 0.0;
    for (double v : y_) ss += (v - mean) * (v - mean);
    response_variance_ = ss / (rows - 1);
  }
}

int LaggedDesign::active_lags(int row, double tau) const {
  int a = 0;
  while (a < k_ && mins_[static_cast<std::size_t>(row) * k_ + a] > tau) ++a;
  return a;
}

RegressorRow LaggedDesign::regressor(int row, double tau) const {
  RegressorRow h = RegressorRow::Zero(k_ + 1);
  h(0) = 1.0;
  const int a = active_lags(row, tau);
  const auto hist = history(row);
  for (int j = 1; j <= a; ++j) h(j) = hist[j - 1];
  return h;
}

Eigen::MatrixXd LaggedDesign::matrix(double tau) const {
  Eigen::MatrixXd h(n_rows(), k_ + 1);
  for (int r = 0; r < n_rows(); ++r) h.row(r) = regressor(r, tau).transpose();
  return h;
}

Eigen::VectorXd LaggedDesign::responses() const {
  return Eigen::Map<const Eigen::VectorXd>(y_.data(), static_cast<Eigen::Index>(y_.size()));
}

DesignStats LaggedDesign::stats(double tau) const {
  const int p = k_ + 1;
  DesignStats s;
  s.gram = Eigen::MatrixXd::Zero(p, p);
  s.subject_outer = Eigen::MatrixXd::Zero(p, p);
  s.cross = Eigen::VectorXd::Zero(p);
  s.subject_cross = Eigen::VectorXd::Zero(p);
  s.n_subjects = n_subjects_;
  s.rows_per_subject = rows_per_subject();
  const int per = rows_per_subject();
  for (int i = 0; i < n_subjects_; ++i) {
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(p);
    for (int r = i * per; r < (i + 1) * per; ++r) {
      const RegressorRow h = regressor(r, tau);
      s.gram.selfadjointView<Eigen::Lower>().rankUpdate(h);
      s.cross += h * y_[r];
      s.yy += y_[r] * y_[r];
      sum += h;
    }
    s.subject_outer.selfadjointView<Eigen::Lower>().rankUpdate(sum);
    s.subject_cross += sum * subject_totals_[i];
    s.subject_yy += subject_totals_[i] * subject_totals_[i];
  }
  s.gram = s.gram.selfadjointView<Eigen::Lower>();
  s.subject_outer = s.subject_outer.selfadjointView<Eigen::Lower>();
  return s;
}

ThresholdEvents::ThresholdEvents(const LaggedDesign& design) {
  const int k = design.k();
  const std::size_t count = static_cast<std::size_t>(design.n_rows()) * k;
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> mins(count);
  for (int r = 0; r < design.n_rows(); ++r)
    for (int j = 1; j <= k; ++j) mins[static_cast<std::size_t>(r) * k + j - 1] = design.lag_min(r, j);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return mins[a] < mins[b]; });
  at.reserve(count);
  row.reserve(count);
  lag.reserve(count);
  for (std::size_t e : order) {
    at.push_back(mins[e]);
    row.push_back(static_cast<int>(e / k));
    lag.push_back(static_cast<int>(e % k) + 1);
  }
}

StatsSweep::StatsSweep(const LaggedDesign& design, const ThresholdEvents& events, double tau)
    : design_(design), events_(events), tau_(tau) {
  stats_ = design.stats(tau);
  const int p = design.k() + 1;
  const int per = design.rows_per_subject();
  active_.resize(design.n_rows());
  subject_sums_ = Eigen::MatrixXd::Zero(p, design.n_subjects());
  for (int r = 0; r < design.n_rows(); ++r) {
    active_[r] = design.active_lags(r, tau);
    subject_sums_.col(r / per) += design.regressor(r, tau);
  }
  next_event_ = static_cast<std::size_t>(
      std::upper_bound(events.at.begin(), events.at.end(), tau) - events.at.begin());
}

void StatsSweep::advance_to(double tau) {
  if (tau < tau_) throw ArgumentError("StatsSweep can only move to larger thresholds");
  while (next_event_ < events_.at.size() && events_.at[next_event_] <= tau) {
    const int r = events_.row[next_event_];
    const int new_active = std::min(active_[r], events_.lag[next_event_] - 1);
    if (new_active != active_[r]) update_row(r, new_active);
    ++next_event_;
  }
  tau_ = tau;
}

void StatsSweep::update_row(int row, int new_active) {
  const int p = design_.k() + 1;
  const auto hist = design_.history(row);
  // Only lags new_active+1 .. old_active change, from y_{t-j} to zero.
  Eigen::VectorXd h_old = Eigen::VectorXd::Zero(p);
  h_old(0) = 1.0;
  for (int j = 1; j <= active_[row]; ++j) h_old(j) = hist[j - 1];
  Eigen::VectorXd h_new = h_old;
  for (int j = new_active + 1; j <= active_[row]; ++j) h_new(j) = 0.0;
  const Eigen::VectorXd delta = h_new - h_old;

  const int i = design_.subject(row);
  const double y = design_.response(row);
  stats_.gram += h_new * h_new.transpose() - h_old * h_old.transpose();
  stats_.cross += delta * y;
  const Eigen::VectorXd s_old = subject_sums_.col(i);
  const Eigen::VectorXd s_new = s_old + delta;
  stats_.subject_outer += s_new * s_new.transpose() - s_old * s_old.transpose();
  stats_.subject_cross += delta * design_.subject_totals_[i];
  subject_sums_.col(i) = s_new;
  active_[row] = new_active;
}

}  // namespace mutare
