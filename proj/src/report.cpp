#include "mutare/report.hpp"

#include "mutare/errors.hpp"

#include <cmath>
#include <fstream>
#include <ostream>

namespace mutare {

using nlohmann::json;

json json_number(double value) {
  if (!std::isfinite(value)) return nullptr;
  return round_significant(value);
}

json json_vector(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(json_number(v(i)));
  return a;
}

json params_to_json(const MutareParams& params) {
  return {{"beta", json_vector(params.beta)},
          {"tau", json_number(params.tau)},
          {"sigma2_alpha", json_number(params.sigma2_alpha)},
          {"sigma2_eps", json_number(params.sigma2_eps)}};
}

MutareParams params_from_json(const json& j) {
  try {
    MutareParams p;
    const auto beta = j.at("beta").get<std::vector<double>>();
    p.beta = Eigen::Map<const Eigen::VectorXd>(beta.data(), static_cast<Eigen::Index>(beta.size()));
    p.tau = j.at("tau").get<double>();
    p.sigma2_alpha = j.at("sigma2_alpha").get<double>();
    p.sigma2_eps = j.at("sigma2_eps").get<double>();
    p.validate();
    return p;
  } catch (const json::exception& e) {
    throw ArgumentError(std::string("bad parameter document: ") + e.what());
  }
}

json penalty_to_json(const PenaltyConfig& cfg) {
  return {{"lambda1", json_number(cfg.lambda1)},
          {"lambda2", json_number(cfg.lambda2)},
          {"rho", json_number(cfg.rho)},
          {"big_m", json_number(cfg.big_m)},
          {"weights", json_vector(cfg.weights)}};
}

json ic_to_json(const IcTable& table) {
  json rows = json::array();
  for (const auto& r : table.rows)
    rows.push_back({{"order", r.order},
                    {"loglik", json_number(r.loglik)},
                    {"n_params", r.n_params},
                    {"n_eff", r.n_eff},
                    {"aic", json_number(r.aic)},
                    {"bic", json_number(r.bic)},
                    {"tau", json_number(r.tau)}});
  return {{"rows", rows}, {"aic_order", table.aic_order}, {"bic_order", table.bic_order}};
}

json fit_to_json(const FitDocument& doc) {
  const FitResult& f = doc.fit;
  json se = json::array();
  for (Eigen::Index j = 0; j < f.params.beta.size(); ++j)
    se.push_back(json_number(f.cov_beta.standard_error(static_cast<int>(j))));
  json cov = json::array();
  for (Eigen::Index r = 0; r < f.cov_beta.cov.rows(); ++r)
    cov.push_back(json_vector(f.cov_beta.cov.row(r).transpose()));

  const auto& d = f.diagnostics;
  json out = {
      {"schema", kFitSchema},
      {"data", {{"n_subjects", doc.n_subjects}, {"series_length", doc.series_length}}},
      {"k_max", doc.k_max},
      {"trim", json_number(doc.trim)},
      {"penalty", penalty_to_json(f.cfg)},
      {"estimates", params_to_json(f.params)},
      {"order", f.order},
      {"support", f.support},
      {"loglik", json_number(f.loglik)},
      {"penalized_objective", json_number(f.penalized_objective)},
      {"standard_errors", se},
      {"covariance", {{"columns", f.cov_beta.columns}, {"matrix", cov}}},
      {"pilot_beta", json_vector(f.pilot_beta)},
      {"diagnostics",
       {{"node_count", d.node_count},
        {"grid_size", d.grid_size},
        {"skipped_candidates", d.skipped_candidates},
        {"solver_optimal", d.solver_optimal},
        {"big_m_binding", d.big_m_binding},
        {"alpha_pinned", d.alpha_pinned},
        {"warnings", d.warnings}}}};
  if (doc.criteria) out["criteria"] = ic_to_json(*doc.criteria);
  if (doc.tuning) {
    json rows = json::array();
    for (const auto& r : doc.tuning->rows)
      rows.push_back({{"lambda1", json_number(r.lambda1)},
                      {"lambda2", json_number(r.lambda2)},
                      {"rho", json_number(r.rho)},
                      {"score", json_number(r.score)},
                      {"rank", r.rank}});
    out["tuning"] = rows;
  }
  return out;
}

void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw ArgumentError("cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
}

namespace {

std::string num(double v) { return std::isfinite(v) ? format_number(v) : "NA"; }
std::string num(const std::optional<double>& v) { return v ? num(*v) : "NA"; }

}  // namespace

void write_table1_csv(std::ostream& out, const std::vector<EstimatorSummary>& rows) {
  out << "m,n,parameter,truth,mean,sd,mean_se,coverage90,coverage_se,replicates,failures\n";
  for (const auto& s : rows)
    for (const auto& p : s.params)
      out << s.m << ',' << s.n << ',' << p.name << ',' << num(p.truth) << ',' << num(p.mean) << ','
          << num(p.sd) << ',' << num(p.mean_se) << ',' << num(p.coverage) << ','
          << num(p.coverage_se) << ',' << s.replicates << ',' << s.failures << '\n';
}

void write_table3_csv(std::ostream& out, const std::vector<SelectionTable>& tables) {
  int k_max = 0;
  for (const auto& t : tables) k_max = std::max(k_max, t.k_max);
  out << "model,method,true_order";
  for (int q = 0; q <= k_max; ++q) out << ",freq_" << q;
  for (int q = 0; q <= k_max; ++q) out << ",se_" << q;
  out << ",modal_order,replicates,failures\n";
  for (const auto& t : tables) {
    out << t.model << ',' << method_name(t.method) << ',' << t.true_order;
    for (int q = 0; q <= k_max; ++q) out << ',' << (q <= t.k_max ? num(t.freq[q]) : "0");
    for (int q = 0; q <= k_max; ++q) out << ',' << (q <= t.k_max ? num(t.freq_se[q]) : "0");
    out << ',' << t.modal_order() << ',' << t.replicates << ',' << t.failures << '\n';
  }
}

void write_qq_csv(std::ostream& out, const QqData& qq) {
  out << "theoretical,sample\n";
  for (const auto& p : qq.points) out << num(p.theoretical) << ',' << num(p.sample) << '\n';
}

void write_rate_csv(std::ostream& out, const RateResult& rate) {
  out << "m,n,N,median_abs_error,ratio,failures\n";
  const auto ratios = rate.ratios();
  for (std::size_t i = 0; i < rate.points.size(); ++i) {
    const auto& p = rate.points[i];
    out << p.m << ',' << p.n << ',' << p.total << ',' << num(p.median_abs_error) << ','
        << (i == 0 ? "NA" : num(ratios[i - 1])) << ',' << p.failures << '\n';
  }
}

json bench_summary_json(const std::vector<EstimatorSummary>& example1,
                        const std::optional<Example2Result>& example2,
                        const std::optional<RateResult>& rate) {
  json out = {{"schema", "mutare-bench/1"}};
  json e1 = json::array();
  for (const auto& s : example1) {
    json params = json::array();
    for (const auto& p : s.params) {
      json row = {{"name", p.name},
                  {"truth", json_number(p.truth)},
                  {"mean", json_number(p.mean)},
                  {"sd", json_number(p.sd)},
                  {"mean_se", json_number(p.mean_se)}};
      if (p.coverage) {
        row["coverage90"] = json_number(*p.coverage);
        row["coverage_se"] = json_number(*p.coverage_se);
      }
      params.push_back(row);
    }
    e1.push_back({{"m", s.m},
                  {"n", s.n},
                  {"replicates", s.replicates},
                  {"failures", s.failures},
                  {"penalty", penalty_to_json(s.cfg)},
                  {"order_freq", s.order_freq},
                  {"parameters", params}});
  }
  out["example1"] = e1;
  if (example2) {
    json tables = json::array();
    for (const auto& t : example2->tables)
      tables.push_back({{"model", t.model},
                        {"method", method_name(t.method)},
                        {"true_order", t.true_order},
                        {"freq", t.freq},
                        {"freq_se", t.freq_se},
                        {"modal_order", t.modal_order()},
                        {"replicates", t.replicates},
                        {"failures", t.failures}});
    json tuned = json::array();
    for (const auto& c : example2->tuned) tuned.push_back(penalty_to_json(c));
    out["example2"] = {{"tables", tables}, {"tuned", tuned}};
  }
  if (rate) {
    json points = json::array();
    for (const auto& p : rate->points)
      points.push_back({{"m", p.m},
                        {"n", p.n},
                        {"N", p.total},
                        {"median_abs_error", json_number(p.median_abs_error)},
                        {"failures", p.failures}});
    json ratios = json::array();
    for (double r : rate->ratios()) ratios.push_back(json_number(r));
    out["rate"] = {{"points", points}, {"ratios", ratios}, {"warnings", rate->warnings}};
  }
  return out;
}

}  // namespace mutare
