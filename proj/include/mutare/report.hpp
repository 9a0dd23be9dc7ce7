#pragma once

#include "mutare/montecarlo.hpp"
#include "mutare/selection.hpp"
#include "mutare/tuning.hpp"

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace mutare {

inline constexpr const char* kFitSchema = "mutare-fit/1";

/// Rounded to 12 significant digits; non-finite values become null.
nlohmann::json json_number(double value);
nlohmann::json json_vector(const Eigen::VectorXd& v);

nlohmann::json params_to_json(const MutareParams& params);
MutareParams params_from_json(const nlohmann::json& j);

nlohmann::json penalty_to_json(const PenaltyConfig& cfg);
nlohmann::json ic_to_json(const IcTable& table);

struct FitDocument {
  int n_subjects = 0;
  int series_length = 0;
  int k_max = 0;
  double trim = kDefaultTrim;
  FitResult fit;
  std::optional<IcTable> criteria;
  std::optional<TuningResult> tuning;
};

nlohmann::json fit_to_json(const FitDocument& doc);

/// Two-space indented JSON with a trailing newline.
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

void write_table1_csv(std::ostream& out, const std::vector<EstimatorSummary>& rows);
void write_table3_csv(std::ostream& out, const std::vector<SelectionTable>& tables);
void write_qq_csv(std::ostream& out, const QqData& qq);
void write_rate_csv(std::ostream& out, const RateResult& rate);

nlohmann::json bench_summary_json(const std::vector<EstimatorSummary>& example1,
                                  const std::optional<Example2Result>& example2,
                                  const std::optional<RateResult>& rate);

}  // namespace mutare
