#include "mutare/errors.hpp"
#include "mutare/likelihood.hpp"
#include "oracles.hpp"

#include <doctest.h>
#include <omp.h>

#include <random>

using namespace mutare;

namespace {

MutareParams random_params(std::mt19937_64& rng, int k) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  MutareParams p;
  p.beta = Eigen::VectorXd(k + 1);
  p.beta(0) = u(rng) - 0.5;
  for (int j = 1; j <= k; ++j) p.beta(j) = 0.6 * (u(rng) - 0.5);
  p.tau = u(rng) - 0.5;
  p.sigma2_alpha = u(rng) < 0.2 ? 0.0 : 2.0 * u(rng);
  p.sigma2_eps = 0.05 + u(rng);
  return p;
}

PanelSeries example1_panel(int n, int m, std::uint64_t seed) {
  MutareParams p;
  p.beta = Eigen::Vector3d(0.0, 0.5, 0.4);
  p.tau = 0.1;
  p.sigma2_alpha = 0.5;
  p.sigma2_eps = 0.5;
  return simulate_panel(p, n, m, 200, seed);
}

}  // namespace

TEST_CASE("rank-one likelihood equals the dense evaluation") {
  std::mt19937_64 rng(101);
  for (int trial = 0; trial < 100; ++trial) {
    const int k = static_cast<int>(rng() % 4);
    const int n = 1 + static_cast<int>(rng() % 4);
    const int m = k + 2 + static_cast<int>(rng() % (9 - k));
    const MutareParams p = random_params(rng, k);
    const PanelSeries panel = simulate_panel(p, n, m, 20, rng());
    const double fast = log_likelihood(panel, p);
    const double dense = oracle::dense_loglik(panel, p);
    CHECK(std::abs(fast - dense) <= 1e-8 * std::abs(dense));

    const LaggedDesign design(panel, k);
    const double from_stats =
        log_likelihood(design.stats(p.tau), p.beta, {p.sigma2_alpha, p.sigma2_eps});
    CHECK(from_stats == doctest::Approx(dense).epsilon(1e-9));
  }
}

TEST_CASE("GLS equals the dense solution") {
  const PanelSeries panel = example1_panel(6, 20, 9);
  for (const Support& s : {Support{1, 2}, Support{1}, Support{2}, Support{}}) {
    const Eigen::VectorXd fast = gls_beta(panel, 2, 0.1, {0.4, 0.6}, s);
    const Eigen::VectorXd dense = oracle::dense_gls(panel, 2, 0.1, 0.4, 0.6, design_columns(s));
    CHECK((fast - dense).cwiseAbs().maxCoeff() < 1e-9);
  }
  CHECK_THROWS_AS(gls_beta(panel, 2, 0.1, {0.4, 0.6}, Support{3}), ArgumentError);
  CHECK_THROWS_AS(gls_beta(panel, 2, 0.1, {0.4, 0.6}, Support{2, 1}), ArgumentError);
}

TEST_CASE("rank deficiency names the dependent columns") {
  const PanelSeries panel = example1_panel(3, 15, 1);
  const double above_all = panel.values().maxCoeff() + 1.0;
  try {
    gls_beta(panel, 2, above_all, {0.4, 0.6}, Support{1, 2});
    FAIL("expected a singular design");
  } catch (const SingularityError& e) {
    CHECK(e.kind() == ErrorKind::singular);
    CHECK_FALSE(e.columns().empty());
  }
}

TEST_CASE("candidate thresholds use the trimmed type-7 quantile range") {
  std::vector<double> v;
  for (int i = 100; i >= 1; --i) v.push_back(i);
  v.push_back(50);  // duplicates collapse
  const auto c = candidate_thresholds(v, 0.1);
  REQUIRE(c.size() == 80);
  CHECK(c.front() == 11);
  CHECK(c.back() == 90);
  CHECK(std::is_sorted(c.begin(), c.end()));
  CHECK(candidate_thresholds(v, 0.0).size() == 100);
  CHECK_THROWS_AS(candidate_thresholds(v, 0.5), ArgumentError);
}

TEST_CASE("variance components maximize the profiled likelihood") {
  const PanelSeries panel = example1_panel(8, 25, 17);
  const LaggedDesign design(panel, 2);
  const DesignStats stats = design.stats(0.1);
  const Support full{1, 2};
  const VarianceFit fit = fit_variance_components(stats, full, {}, design.response_variance());
  CHECK(fit.sigma2_alpha > 0.0);

  // No point of a coarse grid, with GLS beta, beats the optimum.
  double best_grid = -1e300;
  for (double a = 0.0; a <= 2.0; a += 0.05)
    for (double e = 0.2; e <= 1.2; e += 0.02) {
      const CovarianceSpec cov{a, e};
      best_grid = std::max(best_grid, log_likelihood(stats, gls_beta(stats, cov, full), cov));
    }
  CHECK(fit.loglik >= best_grid - 1e-9);
  CHECK(fit.loglik - best_grid < 0.05);

  MutareParams at;
  at.beta = fit.beta;
  at.tau = 0.1;
  at.sigma2_alpha = fit.sigma2_alpha;
  at.sigma2_eps = fit.sigma2_eps;
  CHECK(oracle::dense_loglik(panel, at) == doctest::Approx(fit.loglik).epsilon(1e-10));

  VarianceOptions fixed;
  fixed.fix_eps = 0.3;
  CHECK(fit_variance_components(stats, full, fixed, 1.0).sigma2_eps == 0.3);
  VarianceOptions pinned;
  pinned.pin_alpha_zero = true;
  CHECK(fit_variance_components(stats, full, pinned, 1.0).sigma2_alpha == 0.0);
}

TEST_CASE("single series pins the random-intercept variance") {
  const PanelSeries panel = example1_panel(1, 80, 4);
  const auto [s2a, s2e] = estimate_variance_components(panel, 0.1, 2);
  CHECK(s2a == 0.0);
  CHECK(s2e > 0.0);
}

TEST_CASE("threshold profile: chunked sweep agrees with the reference") {
  const PanelSeries panel = example1_panel(10, 40, 23);
  const LaggedDesign design(panel, 2);
  const auto candidates = candidate_thresholds(panel, kDefaultTrim);
  const Support full{1, 2};
  const ProfiledFit ref = profile_tau_reference(design, candidates, full, {});
  const ProfiledFit fast = profile_tau(design, candidates, full, {});
  CHECK(fast.tau_hat == ref.tau_hat);
  CHECK(fast.loglik == doctest::Approx(ref.loglik).epsilon(1e-12));
  CHECK((fast.beta_hat - ref.beta_hat).cwiseAbs().maxCoeff() < 1e-8);
  CHECK(fast.grid_size == candidates.size());

  // No candidate does better than the winner.
  for (std::size_t c = 0; c < candidates.size(); c += 7) {
    const VarianceFit vf =
        fit_variance_components(design.stats(candidates[c]), full, {}, design.response_variance());
    CHECK(vf.loglik <= fast.loglik + 1e-9);
  }
}

TEST_CASE("threshold profile is independent of the thread count") {
  const PanelSeries panel = example1_panel(12, 30, 31);
  const LaggedDesign design(panel, 2);
  const auto candidates = candidate_thresholds(panel, kDefaultTrim);
  const int saved = omp_get_max_threads();
  omp_set_num_threads(1);
  const ProfiledFit one = profile_tau(design, candidates, {1, 2}, {});
  omp_set_num_threads(4);
  const ProfiledFit four = profile_tau(design, candidates, {1, 2}, {});
  omp_set_num_threads(saved);
  CHECK(one.tau_hat == four.tau_hat);
  CHECK(one.loglik == four.loglik);
  CHECK(one.beta_hat == four.beta_hat);
  CHECK(one.sigma2_alpha_hat == four.sigma2_alpha_hat);
}

TEST_CASE("asymptotic covariance is the inverse GLS information") {
  const PanelSeries panel = example1_panel(6, 20, 41);
  const ProfiledFit fit = profile_tau(panel, 2);
  const SupportCovariance cov = asymptotic_covariance(panel, fit);
  REQUIRE(cov.columns == std::vector<int>{0, 1, 2});

  const int me = 18;
  const Eigen::MatrixXd w = fit.sigma2_eps_hat * Eigen::MatrixXd::Identity(me, me) +
                            fit.sigma2_alpha_hat * Eigen::MatrixXd::Ones(me, me);
  const Eigen::MatrixXd winv = w.inverse();
  Eigen::MatrixXd info = Eigen::MatrixXd::Zero(3, 3);
  for (int i = 0; i < 6; ++i) {
    const Eigen::MatrixXd h =
        oracle::subject_design(panel.values().row(i).transpose(), 2, fit.tau_hat);
    info += h.transpose() * winv * h;
  }
  const Eigen::MatrixXd ref = info.inverse();
  CHECK((cov.cov - ref).cwiseAbs().maxCoeff() < 1e-10 * ref.cwiseAbs().maxCoeff() + 1e-14);
  CHECK(cov.standard_error(1) == doctest::Approx(std::sqrt(ref(1, 1))));
  CHECK(std::isnan(cov.standard_error(3)));
}
