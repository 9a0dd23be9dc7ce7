// mutare: simulate, fit, select, tune and bench front end.

#include "mutare/errors.hpp"
#include "mutare/montecarlo.hpp"
#include "mutare/panel.hpp"
#include "mutare/report.hpp"
#include "mutare/selection.hpp"
#include "mutare/tuning.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#include <omp.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

/// Reads `--config` files: top-level keys are global options, and an object
/// under a subcommand name holds that subcommand's options.
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App*, bool, bool, std::string) const override { return "{}"; }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    json j;
    try {
      j = json::parse(input);
    } catch (const json::exception& e) {
      throw CLI::ConversionError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw CLI::ConversionError("config must be a JSON object");
    std::vector<CLI::ConfigItem> items;
    collect(j, {}, items);
    return items;
  }

 private:
  static std::string scalar(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_number()) return v.dump();
    throw CLI::ConversionError("config values must be scalars or arrays of scalars");
  }

  static void collect(const json& obj, const std::vector<std::string>& parents,
                      std::vector<CLI::ConfigItem>& items) {
    for (const auto& [key, value] : obj.items()) {
      if (value.is_object()) {
        auto nested = parents;
        nested.push_back(key);
        collect(value, nested, items);
        continue;
      }
      CLI::ConfigItem item;
      item.parents = parents;
      item.name = key;
      if (value.is_array())
        for (const auto& v : value) item.inputs.push_back(scalar(v));
      else
        item.inputs.push_back(scalar(value));
      items.push_back(std::move(item));
    }
  }
};

struct PenaltyArgs {
  double lambda1 = 1.0;
  double lambda2 = 2.0;
  double rho = 1.0;
  double big_m = mutare::kDefaultBigM;
  std::vector<double> lambda1_grid;
  std::vector<double> lambda2_grid;
  std::vector<double> rho_grid;
  bool tune = false;
  std::string method = "test-panel";
  std::string test_path;
  std::string report_path;

  CLI::Option* fixed[3] = {};
  CLI::Option* grids[3] = {};
  CLI::Option* tune_flag = nullptr;

  void add(CLI::App* app) {
    fixed[0] = app->add_option("--lambda1", lambda1, "Lasso penalty")->capture_default_str();
    fixed[1] = app->add_option("--lambda2", lambda2, "Order penalty")->capture_default_str();
    fixed[2] = app->add_option("--rho", rho, "Adaptive weight exponent")->capture_default_str();
    app->add_option("--big-m", big_m, "Bound on the sum of |beta_j|")->capture_default_str();
    grids[0] = app->add_option("--lambda1-grid", lambda1_grid, "Tune lambda1 over these values");
    grids[1] = app->add_option("--lambda2-grid", lambda2_grid, "Tune lambda2 over these values");
    grids[2] = app->add_option("--rho-grid", rho_grid, "Tune rho over these values");
    tune_flag = app->add_flag("--tune", tune, "Tune over the default grids");
    app->add_option("--tune-method", method, "hblock or test-panel")
        ->check(CLI::IsMember({"hblock", "test-panel"}))
        ->capture_default_str();
    app->add_option("--test", test_path, "Test panel CSV for test-panel tuning");
    app->add_option("--tuning-report", report_path, "Write the tuning grid scores here");
    for (auto* f : fixed)
      for (auto* g : grids) f->excludes(g);
    for (auto* f : fixed) f->excludes(tune_flag);
  }

  bool tuning() const {
    return tune || !lambda1_grid.empty() || !lambda2_grid.empty() || !rho_grid.empty();
  }

  mutare::PenaltyConfig fixed_config() const {
    mutare::PenaltyConfig cfg;
    cfg.lambda1 = lambda1;
    cfg.lambda2 = lambda2;
    cfg.rho = rho;
    cfg.big_m = big_m;
    cfg.validate();
    return cfg;
  }

  mutare::TuningGrid grid() const {
    auto g = mutare::TuningGrid::defaults();
    if (!lambda1_grid.empty()) g.lambda1 = lambda1_grid;
    if (!lambda2_grid.empty()) g.lambda2 = lambda2_grid;
    if (!rho_grid.empty()) g.rho = rho_grid;
    return g;
  }

  mutare::TuningResult run_tuning(const mutare::PanelSeries& panel, int k,
                                  const mutare::FitOptions& options) const {
    const auto m = method == "hblock" ? mutare::TuningMethod::hblock
                                      : mutare::TuningMethod::test_panel;
    std::optional<mutare::PanelSeries> test;
    if (m == mutare::TuningMethod::test_panel) {
      if (test_path.empty()) throw mutare::ArgumentError("--tune-method test-panel needs --test");
      test = mutare::read_panel_csv(fs::path(test_path));
    } else if (!test_path.empty()) {
      throw mutare::ArgumentError("--test is only used with --tune-method test-panel");
    }
    auto result = mutare::tune(panel, k, grid(), m, test, options, big_m);
    if (!report_path.empty()) mutare::write_tuning_report(fs::path(report_path), result);
    return result;
  }
};

struct FitArgs {
  std::string input;
  std::string output;
  int k_max = 2;
  double trim = mutare::kDefaultTrim;
  double fix_eps = 0.0;
  double time_limit = 0.0;
  std::size_t node_budget = 100000;
  std::string trace;
  CLI::Option* fix_eps_opt = nullptr;
  CLI::Option* time_limit_opt = nullptr;

  void add(CLI::App* app, int default_k) {
    k_max = default_k;
    app->add_option("-i,--input", input, "Panel CSV (subject,time,y)")->required();
    app->add_option("-o,--output", output, "Output file");
    app->add_option("-k,--k-max", k_max, "Largest lag considered")
        ->check(CLI::Range(0, 30))
        ->capture_default_str();
    app->add_option("--trim", trim, "Quantile trim of the threshold grid")->capture_default_str();
    fix_eps_opt = app->add_option("--fix-eps", fix_eps, "Hold sigma2_eps at this value");
    time_limit_opt = app->add_option("--time-limit", time_limit, "Solver time limit in seconds");
    app->add_option("--node-budget", node_budget, "Branch-and-bound node budget")
        ->capture_default_str();
    app->add_option("--trace", trace, "Write the branch-and-bound node trace here");
  }

  mutare::FitOptions options() const {
    mutare::FitOptions o;
    o.trim = trim;
    if (*fix_eps_opt) o.fix_eps = fix_eps;
    if (*time_limit_opt) o.solver.time_limit_seconds = time_limit;
    o.solver.node_budget = node_budget;
    return o;
  }
};

void write_text(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw mutare::ArgumentError("cannot open " + path + " for writing");
  out << text;
}

mutare::FitResult run_fit(const mutare::PanelSeries& panel, const FitArgs& fa,
                          const PenaltyArgs& pa, std::optional<mutare::TuningResult>& tuning) {
  auto options = fa.options();
  mutare::PenaltyConfig cfg;
  if (pa.tuning()) {
    tuning = pa.run_tuning(panel, fa.k_max, options);
    cfg = tuning->best;
  } else {
    cfg = pa.fixed_config();
  }
  std::ofstream trace;
  if (!fa.trace.empty()) {
    trace.open(fa.trace);
    if (!trace) throw mutare::ArgumentError("cannot open " + fa.trace + " for writing");
    options.solver.trace = &trace;
  }
  return mutare::fit_mutare(panel, fa.k_max, cfg, options);
}

void print_warnings(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
}

int dispatch(int argc, char** argv) {
  CLI::App app{"MUTARE threshold panel autoregression: simulation, estimation, order selection"};
  app.require_subcommand(1);
  app.config_formatter(std::make_shared<JsonConfig>());
  app.set_config("--config", "", "JSON configuration file; command-line flags take precedence");
  app.allow_config_extras(CLI::config_extras_mode::error);
  int jobs = 0;
  app.add_option("-j,--jobs", jobs, "Worker threads (default: OpenMP default)")
      ->check(CLI::PositiveNumber);

  // simulate
  auto* sim = app.add_subcommand("simulate", "Simulate a panel and write it as CSV");
  std::vector<double> sim_beta{0.0, 0.5, 0.4};
  double sim_tau = 0.1, sim_s2a = 0.5, sim_s2e = 0.5;
  int sim_n = 25, sim_m = 60, sim_burn = mutare::kDefaultBurnIn;
  std::uint64_t sim_seed = 1;
  std::string sim_out;
  sim->add_option("--beta", sim_beta, "beta_0 ... beta_k")->capture_default_str();
  sim->add_option("--tau", sim_tau, "Threshold")->capture_default_str();
  sim->add_option("--sigma2-alpha", sim_s2a, "Random-intercept variance")->capture_default_str();
  sim->add_option("--sigma2-eps", sim_s2e, "Error variance")->capture_default_str();
  sim->add_option("-n,--subjects", sim_n, "Number of subjects")
      ->check(CLI::PositiveNumber)->capture_default_str();
  sim->add_option("-m,--length", sim_m, "Series length")
      ->check(CLI::PositiveNumber)->capture_default_str();
  sim->add_option("--burn-in", sim_burn, "Discarded warm-up steps")
      ->check(CLI::NonNegativeNumber)->capture_default_str();
  sim->add_option("--seed", sim_seed, "Random seed")->capture_default_str();
  sim->add_option("-o,--output", sim_out, "Panel CSV; parameters go to <output>.params.json")
      ->required();

  // fit
  auto* fit = app.add_subcommand("fit", "Double-penalized fit; writes mutare-fit/1 JSON");
  FitArgs fit_args;
  PenaltyArgs fit_pen;
  fit_args.add(fit, 2);
  fit_pen.add(fit);

  // select
  auto* sel = app.add_subcommand("select", "AIC, BIC and double-penalty order selection");
  FitArgs sel_args;
  PenaltyArgs sel_pen;
  int ic_count_threshold = 1;
  std::string sel_table;
  sel_args.add(sel, 5);
  sel_pen.add(sel);
  sel->add_option("--ic-count-threshold", ic_count_threshold,
                  "Count the threshold as an AIC/BIC parameter (0 or 1)")
      ->check(CLI::IsMember({0, 1}))
      ->capture_default_str();
  sel->add_option("--table", sel_table, "Criterion table CSV");

  // tune
  auto* tun = app.add_subcommand("tune", "Grid search over (lambda1, lambda2, rho)");
  FitArgs tune_args;
  PenaltyArgs tune_pen;
  tune_args.add(tun, 2);
  tune_pen.add(tun);

  // bench
  auto* bench = app.add_subcommand("bench", "Monte Carlo study: Example 1, Example 2 and the threshold rate check");
  std::string bench_dir;
  int bench_reps = 200;
  bool bench_full = false;
  std::uint64_t bench_seed = 1;
  std::vector<std::string> bench_parts{"example1", "example2", "rate"};
  int bench_doublings = 2;
  int bench_rate_reps = 0;
  bench->add_option("-o,--output-dir", bench_dir, "Directory for the CSV and JSON outputs")
      ->required();
  auto* reps_opt = bench->add_option("-r,--replicates", bench_reps, "Replicates per design")
                       ->check(CLI::PositiveNumber)
                       ->capture_default_str();
  bench->add_flag("--full", bench_full, "Use 1000 replicates")->excludes(reps_opt);
  bench->add_option("--seed", bench_seed, "Random seed")->capture_default_str();
  bench->add_option("--parts", bench_parts, "Any of example1, example2, rate")
      ->check(CLI::IsMember({"example1", "example2", "rate"}))
      ->capture_default_str();
  bench->add_option("--doublings", bench_doublings, "Rate check doublings of n")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  bench->add_option("--rate-replicates", bench_rate_reps,
                    "Replicates per rate-check size (default: --replicates)")
      ->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }
  if (jobs > 0) omp_set_num_threads(jobs);

  if (*sim) {
    mutare::MutareParams params;
    params.beta = Eigen::Map<const Eigen::VectorXd>(sim_beta.data(),
                                                    static_cast<Eigen::Index>(sim_beta.size()));
    params.tau = sim_tau;
    params.sigma2_alpha = sim_s2a;
    params.sigma2_eps = sim_s2e;
    const auto sim_result = mutare::simulate_panel_detailed(params, sim_n, sim_m, sim_burn, sim_seed);
    mutare::write_panel_csv(fs::path(sim_out), sim_result.panel);
    json sidecar = {{"schema", "mutare-params/1"},
                    {"params", mutare::params_to_json(params)},
                    {"n_subjects", sim_n},
                    {"series_length", sim_m},
                    {"burn_in", sim_burn},
                    {"seed", sim_seed},
                    {"alpha", mutare::json_vector(sim_result.alpha)},
                    {"warnings", sim_result.warnings}};
    mutare::write_json(fs::path(sim_out + ".params.json"), sidecar);
    print_warnings(sim_result.warnings);
    return kOk;
  }

  if (*fit) {
    const auto panel = mutare::read_panel_csv(fs::path(fit_args.input));
    mutare::FitDocument doc;
    doc.n_subjects = panel.n_subjects();
    doc.series_length = panel.series_length();
    doc.k_max = fit_args.k_max;
    doc.trim = fit_args.trim;
    doc.fit = run_fit(panel, fit_args, fit_pen, doc.tuning);
    write_text(fit_args.output, mutare::fit_to_json(doc).dump(2) + "\n");
    print_warnings(doc.fit.diagnostics.warnings);
    return kOk;
  }

  if (*sel) {
    const auto panel = mutare::read_panel_csv(fs::path(sel_args.input));
    mutare::IcOptions ic;
    ic.trim = sel_args.trim;
    ic.count_threshold = ic_count_threshold == 1;
    if (*sel_args.fix_eps_opt) ic.fix_eps = sel_args.fix_eps;
    mutare::FitDocument doc;
    doc.n_subjects = panel.n_subjects();
    doc.series_length = panel.series_length();
    doc.k_max = sel_args.k_max;
    doc.trim = sel_args.trim;
    doc.criteria = mutare::information_criteria(panel, sel_args.k_max, ic);
    doc.fit = run_fit(panel, sel_args, sel_pen, doc.tuning);
    if (!sel_table.empty()) {
      std::ofstream out(sel_table);
      if (!out) throw mutare::ArgumentError("cannot open " + sel_table + " for writing");
      out << "order,loglik,n_params,n_eff,aic,bic,tau\n";
      for (const auto& r : doc.criteria->rows)
        out << r.order << ',' << mutare::format_number(r.loglik) << ',' << r.n_params << ','
            << r.n_eff << ',' << mutare::format_number(r.aic) << ','
            << mutare::format_number(r.bic) << ',' << mutare::format_number(r.tau) << '\n';
    }
    if (!sel_args.output.empty())
      mutare::write_json(fs::path(sel_args.output), mutare::fit_to_json(doc));
    std::cout << "AIC order " << doc.criteria->aic_order << ", BIC order "
              << doc.criteria->bic_order << ", DP order " << doc.fit.order << '\n';
    print_warnings(doc.fit.diagnostics.warnings);
    return kOk;
  }

  if (*tun) {
    const auto panel = mutare::read_panel_csv(fs::path(tune_args.input));
    auto pen = tune_pen;
    pen.tune = true;
    if (pen.report_path.empty()) pen.report_path = tune_args.output;
    const auto result = pen.run_tuning(panel, tune_args.k_max, tune_args.options());
    if (tune_args.output.empty()) mutare::write_tuning_report(std::cout, result);
    std::cerr << "best: lambda1 " << mutare::format_number(result.best.lambda1) << ", lambda2 "
              << mutare::format_number(result.best.lambda2) << ", rho "
              << mutare::format_number(result.best.rho) << '\n';
    return kOk;
  }

  if (*bench) {
    const int reps = bench_full ? 1000 : bench_reps;
    const fs::path dir(bench_dir);
    fs::create_directories(dir);
    auto has = [&](const std::string& part) {
      return std::find(bench_parts.begin(), bench_parts.end(), part) != bench_parts.end();
    };
    std::vector<mutare::EstimatorSummary> e1;
    std::optional<mutare::Example2Result> e2;
    std::optional<mutare::RateResult> rate;
    if (has("example1")) {
      e1 = mutare::run_example1(mutare::Example1Options{.replicates = reps, .seed = bench_seed});
      std::ofstream t1(dir / "table1.csv");
      mutare::write_table1_csv(t1, e1);
      for (const auto& s : e1) {
        if (static_cast<int>(s.estimates[0].size()) < 20) continue;
        for (std::size_t p = 0; p < s.params.size(); ++p) {
          std::ofstream qq(dir / ("qq_m" + std::to_string(s.m) + "_n" + std::to_string(s.n) +
                                  "_" + s.params[p].name + ".csv"));
          mutare::write_qq_csv(qq, mutare::qq_data(s.estimates[p]));
        }
      }
    }
    if (has("example2")) {
      mutare::Example2Options o;
      o.replicates = reps;
      o.seed = bench_seed;
      e2 = mutare::run_example2(o);
      std::ofstream t3(dir / "table3.csv");
      mutare::write_table3_csv(t3, e2->tables);
    }
    if (has("rate")) {
      rate = mutare::rate_check({60, 25}, bench_doublings,
                                bench_rate_reps > 0 ? bench_rate_reps : reps, bench_seed);
      std::ofstream rc(dir / "rate.csv");
      mutare::write_rate_csv(rc, *rate);
      print_warnings(rate->warnings);
    }
    mutare::write_json(dir / "summary.json", mutare::bench_summary_json(e1, e2, rate));
    return kOk;
  }
  return kUsage;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return dispatch(argc, argv);
  } catch (const mutare::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    switch (e.kind()) {
      case mutare::ErrorKind::argument: return kUsage;
      case mutare::ErrorKind::data: return kData;
      default: return kNumeric;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNumeric;
  }
}
