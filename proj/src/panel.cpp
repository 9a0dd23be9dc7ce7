#include "mutare/panel.hpp"

#include "mutare/errors.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace mutare {

namespace {

std::vector<std::string> default_ids(int n) {
  std::vector<std::string> ids;
  ids.reserve(n);
  for (int i = 0; i < n; ++i) ids.push_back(std::to_string(i + 1));
  return ids;
}

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(trim(field));
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

}  // namespace

PanelSeries::PanelSeries(Eigen::MatrixXd values)
    : PanelSeries(values, default_ids(static_cast<int>(values.rows()))) {}

PanelSeries::PanelSeries(Eigen::MatrixXd values, std::vector<std::string> subject_ids)
    : values_(std::move(values)), ids_(std::move(subject_ids)) {
  if (values_.rows() < 1 || values_.cols() < 1)
    throw DataError("panel must have at least one subject and one time point");
  if (static_cast<Eigen::Index>(ids_.size()) != values_.rows())
    throw DataError("number of subject ids does not match number of rows");
  if (!values_.allFinite()) throw DataError("panel contains non-finite values");
}

double PanelSeries::pooled_variance() const {
  const double n = static_cast<double>(values_.size());
  if (n < 2) return 0.0;
  const double mean = values_.mean();
  return (values_.array() - mean).square().sum() / (n - 1.0);
}

PanelSeries PanelSeries::select_subjects(const std::vector<int>& subjects) const {
  Eigen::MatrixXd v(subjects.size(), values_.cols());
  std::vector<std::string> ids;
  for (std::size_t r = 0; r < subjects.size(); ++r) {
    v.row(r) = values_.row(subjects[r]);
    ids.push_back(ids_.at(subjects[r]));
  }
  return PanelSeries(std::move(v), std::move(ids));
}

PanelSeries read_panel_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty panel file");
  const auto header = split_fields(line);
  if (header.size() != 3 || header[0] != "subject" || header[1] != "time" || header[2] != "y")
    throw DataError("panel header must be 'subject,time,y', got '" + trim(line) + "'");

  std::vector<std::string> ids;
  std::vector<std::vector<double>> rows;
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto f = split_fields(line);
    const std::string where = "line " + std::to_string(line_no) + ": ";
    if (f.size() != 3) throw DataError(where + "expected 3 fields");
    long time = 0;
    {
      const auto& s = f[1];
      auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), time);
      if (ec != std::errc() || p != s.data() + s.size())
        throw DataError(where + "time '" + s + "' is not an integer");
    }
    double y = 0.0;
    try {
      std::size_t used = 0;
      y = std::stod(f[2], &used);
      if (used != f[2].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw DataError(where + "value '" + f[2] + "' is not a number");
    }
    if (!std::isfinite(y)) throw DataError(where + "value is not finite");

    if (ids.empty() || ids.back() != f[0]) {
      for (const auto& seen : ids)
        if (seen == f[0]) throw DataError(where + "rows for subject '" + f[0] + "' are not contiguous");
      ids.push_back(f[0]);
      rows.emplace_back();
    }
    auto& r = rows.back();
    if (time != static_cast<long>(r.size()) + 1)
      throw DataError(where + "times for subject '" + f[0] + "' must be consecutive starting at 1");
    r.push_back(y);
  }
  if (ids.empty()) throw DataError("panel file has no data rows");

  const std::size_t m = rows.front().size();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != m)
      throw DataError("unbalanced panel: subject '" + ids[i] + "' has " +
                      std::to_string(rows[i].size()) + " time points, expected " +
                      std::to_string(m) + "; truncate all subjects to a common length");
  }
  Eigen::MatrixXd values(rows.size(), m);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t t = 0; t < m; ++t) values(i, t) = rows[i][t];
  return PanelSeries(std::move(values), std::move(ids));
}

PanelSeries read_panel_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open panel file '" + path.string() + "'");
  return read_panel_csv(in);
}

void write_panel_csv(std::ostream& out, const PanelSeries& panel) {
  out << "subject,time,y\n";
  for (int i = 0; i < panel.n_subjects(); ++i)
    for (int t = 0; t < panel.series_length(); ++t)
      out << panel.subject_ids()[i] << ',' << (t + 1) << ',' << format_number(panel(i, t)) << '\n';
}

void write_panel_csv(const std::filesystem::path& path, const PanelSeries& panel) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  write_panel_csv(out, panel);
}

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", value);
  if (std::string(buf) == "-0") return "0";
  return buf;
}

double round_significant(double value) {
  if (!std::isfinite(value)) return value;
  return std::strtod(format_number(value).c_str(), nullptr);
}

}  // namespace mutare
