#include "mutare/errors.hpp"
#include "mutare/likelihood.hpp"
#include "mutare/mip.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <random>
#include <sstream>

using namespace mutare;

namespace {

std::vector<int> prefix(int q) {
  std::vector<int> a;
  for (int j = 1; j <= q; ++j) a.push_back(j);
  return a;
}

}  // namespace

TEST_CASE("whitening reproduces the GLS quadratic form") {
  MutareParams p;
  p.beta = Eigen::Vector3d(0.2, 0.5, 0.3);
  p.tau = 0.1;
  p.sigma2_alpha = 0.7;
  p.sigma2_eps = 0.4;
  const PanelSeries panel = simulate_panel(p, 4, 12, 50, 5);
  const LaggedDesign design(panel, 2);
  const CovarianceSpec cov{0.7, 0.4};
  const WhitenedProblem prob = whiten(design, p.tau, cov);

  std::mt19937_64 rng(3);
  std::normal_distribution<double> z;
  for (int trial = 0; trial < 10; ++trial) {
    MutareParams q = p;
    q.beta = Eigen::Vector3d(z(rng), z(rng), z(rng));
    CHECK(0.5 * prob.two_loglik(q.beta) == doctest::Approx(oracle::dense_loglik(panel, q)).epsilon(1e-10));
  }
}

TEST_CASE("lasso matches the exhaustive sign-pattern oracle") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    const int k = 2 + static_cast<int>(rng() % 4);
    const WhitenedProblem prob = oracle::random_problem(rng, k, 40);
    const PenaltyConfig cfg = oracle::random_penalty(rng, k);
    std::vector<int> active;
    for (int j = 1; j <= k; ++j)
      if (rng() % 3 != 0) active.push_back(j);
    const Eigen::VectorXd beta = lasso_subproblem(prob, cfg, active);
    const auto ref = oracle::sign_pattern_search(prob, cfg, active, false);
    CHECK((beta - ref.beta).cwiseAbs().maxCoeff() < 1e-6);
    CHECK(WeightedLasso(prob).kkt_violation(beta, cfg, active) <= 1e-7);
    for (int j = 1; j <= k; ++j)
      if (std::find(active.begin(), active.end(), j) == active.end()) CHECK(beta(j) == 0.0);
  }
}

TEST_CASE("lasso limits") {
  std::mt19937_64 rng(5);
  const WhitenedProblem prob = oracle::random_problem(rng, 4, 60);
  PenaltyConfig cfg;
  const auto all = prefix(4);

  SUBCASE("lambda1 = 0 gives least squares") {
    const Eigen::VectorXd beta = lasso_subproblem(prob, cfg, all);
    const Eigen::VectorXd ls = prob.design.colPivHouseholderQr().solve(prob.response);
    CHECK((beta - ls).cwiseAbs().maxCoeff() < 1e-7);
  }
  SUBCASE("large lambda1 zeroes every lag") {
    const Eigen::VectorXd c = prob.design.transpose() * prob.response;
    cfg.lambda1 = 2.0 * 2.0 * c.tail(4).cwiseAbs().maxCoeff() + 10.0 * prob.n_obs();
    const Eigen::VectorXd beta = lasso_subproblem(prob, cfg, all);
    CHECK(beta.tail(4).cwiseAbs().maxCoeff() == 0.0);
    CHECK(beta(0) == doctest::Approx(prob.design.col(0).dot(prob.response) /
                                     prob.design.col(0).squaredNorm()));
  }
  SUBCASE("bad active sets are rejected") {
    const std::vector<int> bad{0};
    CHECK_THROWS_AS(lasso_subproblem(prob, cfg, bad), ArgumentError);
    const std::vector<int> dup{1, 1};
    CHECK_THROWS_AS(lasso_subproblem(prob, cfg, dup), ArgumentError);
  }
}

TEST_CASE("order enumeration equals the global brute force") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 150; ++trial) {
    const int k = 1 + static_cast<int>(rng() % 4);
    const WhitenedProblem prob = oracle::random_problem(rng, k, 35);
    const PenaltyConfig cfg = oracle::random_penalty(rng, k);
    const MipSolution sol = solve_order_enumeration(prob, cfg, k);
    const auto ref = oracle::sign_pattern_search(prob, cfg, prefix(k), true);
    CHECK(sol.objective == doctest::Approx(ref.value).epsilon(1e-9));
    CHECK(sol.order == order_of(sol.beta));
  }
}

TEST_CASE("branch and bound equals order enumeration") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 300; ++trial) {
    const int k = 2 + static_cast<int>(rng() % 7);
    const WhitenedProblem prob = oracle::random_problem(rng, k, 50);
    const PenaltyConfig cfg = oracle::random_penalty(rng, k);
    const MipSolution bnb = solve_branch_and_bound(prob, cfg, k);
    const MipSolution en = solve_order_enumeration(prob, cfg, k);
    CHECK(std::abs(bnb.objective - en.objective) <= 1e-7);
    CHECK(bnb.node_count <= (std::size_t{1} << (k + 1)) - 1);
    CHECK(bnb.optimal);
    // Objective reported is the exact double-penalized value at beta.
    CHECK(bnb.objective ==
          doctest::Approx(double_penalized_objective(0.5 * prob.two_loglik(bnb.beta), bnb.beta, cfg)));
  }
}

TEST_CASE("solver special cases") {
  std::mt19937_64 rng(17);
  const int k = 5;
  const WhitenedProblem prob = oracle::random_problem(rng, k, 80);

  SUBCASE("lambda2 = 0 is the adaptive lasso on every lag") {
    PenaltyConfig cfg = oracle::random_penalty(rng, k);
    cfg.lambda2 = 0.0;
    const MipSolution sol = solve_branch_and_bound(prob, cfg, k);
    const Eigen::VectorXd lasso = lasso_subproblem(prob, cfg, prefix(k));
    CHECK((sol.beta - lasso).cwiseAbs().maxCoeff() < 1e-8);
  }
  SUBCASE("no penalty gives least squares") {
    PenaltyConfig cfg;
    const MipSolution sol = solve_order_enumeration(prob, cfg, k);
    const Eigen::VectorXd ls = prob.design.colPivHouseholderQr().solve(prob.response);
    CHECK((sol.beta - ls).cwiseAbs().maxCoeff() < 1e-7);
    CHECK(sol.order == order_of(ls));
  }
  SUBCASE("huge lambda2 gives the intercept-only model") {
    PenaltyConfig cfg;
    cfg.lambda2 = 1e9;
    CHECK(solve_branch_and_bound(prob, cfg, k).order == 0);
    CHECK(solve_order_enumeration(prob, cfg, k).order == 0);
  }
  SUBCASE("optimum is nonincreasing in lambda2") {
    PenaltyConfig cfg = oracle::random_penalty(rng, k);
    double last = std::numeric_limits<double>::infinity();
    int last_order = k + 1;
    for (double l2 : {0.0, 0.5, 1.0, 2.0, 5.0, 10.0, 50.0, 200.0}) {
      cfg.lambda2 = l2;
      const MipSolution sol = solve_branch_and_bound(prob, cfg, k);
      CHECK(sol.objective <= last + 1e-9);
      CHECK(sol.order <= last_order);
      last = sol.objective;
      last_order = sol.order;
    }
  }
  SUBCASE("big-M binding is flagged") {
    PenaltyConfig cfg;
    cfg.big_m = 1e-3;
    CHECK(solve_branch_and_bound(prob, cfg, k).big_m_binding);
    cfg.big_m = 1e6;
    CHECK_FALSE(solve_branch_and_bound(prob, cfg, k).big_m_binding);
  }
}

TEST_CASE("branch and bound budget, time limit and trace") {
  std::mt19937_64 rng(23);
  const int k = 6;
  const WhitenedProblem prob = oracle::random_problem(rng, k, 60);
  PenaltyConfig cfg;
  cfg.lambda1 = 0.5;
  cfg.lambda2 = 1.0;

  SolverOptions tight;
  tight.node_budget = 2;
  try {
    solve_branch_and_bound(prob, cfg, k, tight);
    FAIL("expected a budget error");
  } catch (const NodeBudgetError& e) {
    CHECK(e.kind() == ErrorKind::budget);
    CHECK(e.incumbent().beta.size() == k + 1);
    CHECK_FALSE(e.incumbent().optimal);
  }

  SolverOptions timed;
  timed.time_limit_seconds = 0.0;
  const MipSolution early = solve_branch_and_bound(prob, cfg, k, timed);
  CHECK(early.beta.size() == k + 1);

  std::ostringstream trace;
  SolverOptions traced;
  traced.trace = &trace;
  const MipSolution sol = solve_branch_and_bound(prob, cfg, k, traced);
  const std::string text = trace.str();
  CHECK(static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')) == sol.node_count);
  CHECK(text.rfind("node 0 bound ", 0) == 0);

  // Deterministic node counts.
  CHECK(solve_branch_and_bound(prob, cfg, k).node_count == sol.node_count);
}

TEST_CASE("nested closure: trailing zeros past the order") {
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 50; ++trial) {
    const int k = 4;
    const WhitenedProblem prob = oracle::random_problem(rng, k, 40);
    const PenaltyConfig cfg = oracle::random_penalty(rng, k);
    const MipSolution sol = solve_branch_and_bound(prob, cfg, k);
    for (int j = sol.order + 1; j <= k; ++j) CHECK(std::abs(sol.beta(j)) <= kZeroTol);
  }
}
