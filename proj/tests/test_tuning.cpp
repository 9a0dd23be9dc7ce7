#include "mutare/errors.hpp"
#include "mutare/montecarlo.hpp"
#include "mutare/tuning.hpp"

#include <doctest.h>
#include <omp.h>

#include <cmath>
#include <set>
#include <sstream>

using namespace mutare;

namespace {

PenaltyConfig penalty(double l1, double l2, double rho = 1.0) {
  PenaltyConfig c;
  c.lambda1 = l1;
  c.lambda2 = l2;
  c.rho = rho;
  return c;
}

TuningGrid small_grid() { return {{0.1, 2.0}, {0.5, 5.0}, {1.0}}; }

}  // namespace

TEST_CASE("CV plan arithmetic") {
  struct Case {
    int m, k, h, n_c;
  };
  for (const Case c : {Case{40, 5, 8, 6}, Case{60, 2, 14, 7}, Case{30, 2, 7, 5}}) {
    const CvPlan plan = CvPlan::make(c.m, c.k);
    CHECK(plan.h == c.h);
    CHECK(plan.n_c == c.n_c);
    CHECK(plan.n_v + plan.n_c + 2 * plan.h == c.m - c.k);
    CHECK(plan.folds() >= 1);
  }
  CHECK(CvPlan::make(40, 5).n_v == 13);
}

TEST_CASE("CV folds tile the rows and keep h rows of separation") {
  for (const auto [m, k] : {std::pair{40, 5}, std::pair{60, 2}, std::pair{30, 2}, std::pair{200, 5}}) {
    const CvPlan plan = CvPlan::make(m, k);
    std::set<int> seen;
    for (int f = 0; f < plan.folds(); ++f) {
      const auto valid = plan.validation_times(f);
      const auto train = plan.training_times(f);
      CHECK(static_cast<int>(valid.size()) == plan.n_v);
      CHECK_FALSE(train.empty());
      for (int t : valid) {
        CHECK(t >= k);
        CHECK(t < m);
        CHECK(seen.insert(t).second);
        for (int s : train) CHECK(std::abs(s - t) > plan.h);
      }
    }
    CHECK(static_cast<int>(seen.size()) == plan.folds() * plan.n_v);
  }
}

TEST_CASE("infeasible CV plan names its inputs") {
  try {
    CvPlan::make(9, 4);
    FAIL("expected ArgumentError");
  } catch (const ArgumentError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("m = 9") != std::string::npos);
    CHECK(msg.find("k = 4") != std::string::npos);
    CHECK(msg.find("n_c = 3") != std::string::npos);
  }
  CHECK_THROWS_AS(CvPlan::make(5, 5), ArgumentError);
}

TEST_CASE("CV and test-panel scores are finite and invariant to subject order") {
  const PanelSeries panel = simulate_panel(example1_params(), 12, 40, 200, 17);
  const PanelSeries test = simulate_panel(example1_params(), 12, 40, 200, 18);
  const PenaltyConfig cfg = penalty(1.0, 2.0);
  const CvPlan plan = CvPlan::make(40, 2);

  const double cv = hblock_cv_score(panel, 2, cfg, plan);
  const double tp = test_panel_score(panel, test, 2, cfg);
  CHECK(std::isfinite(cv));
  CHECK(std::isfinite(tp));
  // Error variance is 0.5; one-step errors cannot beat it by much.
  CHECK(cv > 0.3);
  CHECK(tp > 0.3);

  std::vector<int> perm;
  for (int i = 11; i >= 0; --i) perm.push_back(i);
  CHECK(hblock_cv_score(panel.select_subjects(perm), 2, cfg, plan) ==
        doctest::Approx(cv).epsilon(1e-8));
  CHECK(test_panel_score(panel, test.select_subjects(perm), 2, cfg) ==
        doctest::Approx(tp).epsilon(1e-10));

  CHECK_THROWS_AS(hblock_cv_score(panel, 2, cfg, CvPlan::make(41, 2)), ArgumentError);
}

TEST_CASE("singleton grid selects its only point") {
  const PanelSeries panel = simulate_panel(example1_params(), 10, 40, 200, 21);
  const TuningGrid grid{{1.0}, {2.0}, {0.5}};
  const TuningResult r = tune(panel, 2, grid, TuningMethod::hblock);
  REQUIRE(r.rows.size() == 1);
  CHECK(r.rows[0].rank == 1);
  CHECK(r.best.lambda1 == 1.0);
  CHECK(r.best.lambda2 == 2.0);
  CHECK(r.best.rho == 0.5);
}

TEST_CASE("tuning ranks, ties and method checks") {
  const PanelSeries panel = simulate_panel(example1_params(), 10, 40, 200, 23);
  const PanelSeries test = simulate_panel(example1_params(), 10, 40, 200, 24);

  SUBCASE("ranks are a permutation with the best first") {
    const TuningResult r = tune(panel, 2, small_grid(), TuningMethod::test_panel, test);
    REQUIRE(r.rows.size() == small_grid().size());
    std::set<int> ranks;
    for (const auto& row : r.rows) ranks.insert(row.rank);
    CHECK(ranks.size() == r.rows.size());
    CHECK(*ranks.begin() == 1);
    for (const auto& row : r.rows) {
      if (row.rank != 1) continue;
      CHECK(row.lambda1 == r.best.lambda1);
      CHECK(row.lambda2 == r.best.lambda2);
      for (const auto& other : r.rows) CHECK(row.score <= other.score);
    }
    // rho outermost, lambda1 innermost.
    CHECK(r.rows[0].lambda1 == 0.1);
    CHECK(r.rows[1].lambda1 == 2.0);
    CHECK(r.rows[2].lambda2 == 5.0);
  }

  SUBCASE("equal scores prefer the larger lambda2") {
    // With no l1 shrinkage both lambda2 values keep the full model.
    const TuningGrid grid{{0.0}, {0.0, 1e-9}, {1.0}};
    const TuningResult r = tune(panel, 2, grid, TuningMethod::test_panel, test);
    REQUIRE(r.rows[0].score == r.rows[1].score);
    CHECK(r.best.lambda2 == 1e-9);
    CHECK(r.rows[1].rank == 1);
  }

  SUBCASE("a crushing penalty loses to a moderate one") {
    const TuningGrid grid{{0.1}, {0.5, 1e6}, {1.0}};
    const TuningResult r = tune(panel, 2, grid, TuningMethod::test_panel, test);
    CHECK(r.best.lambda2 == 0.5);
    CHECK(r.rows[1].score > r.rows[0].score);
  }

  SUBCASE("test panel required exactly for test-panel tuning") {
    CHECK_THROWS_AS(tune(panel, 2, small_grid(), TuningMethod::test_panel), ArgumentError);
    CHECK_THROWS_AS(tune(panel, 2, small_grid(), TuningMethod::hblock, test), ArgumentError);
  }

  SUBCASE("grid validation") {
    CHECK_THROWS_AS(tune(panel, 2, TuningGrid{{}, {1.0}, {1.0}}, TuningMethod::hblock),
                    ArgumentError);
    CHECK_THROWS_AS(tune(panel, 2, TuningGrid{{1.0}, {1.0}, {0.0}}, TuningMethod::hblock),
                    ArgumentError);
    CHECK_THROWS_AS(tune(panel, 2, TuningGrid{{-1.0}, {1.0}, {1.0}}, TuningMethod::hblock),
                    ArgumentError);
  }
}

TEST_CASE("tuning does not depend on the thread count") {
  const PanelSeries panel = simulate_panel(example1_params(), 10, 40, 200, 31);
  const int saved = omp_get_max_threads();
  omp_set_num_threads(1);
  const TuningResult one = tune(panel, 2, small_grid(), TuningMethod::hblock);
  omp_set_num_threads(4);
  const TuningResult four = tune(panel, 2, small_grid(), TuningMethod::hblock);
  omp_set_num_threads(saved);
  REQUIRE(one.rows.size() == four.rows.size());
  for (std::size_t i = 0; i < one.rows.size(); ++i) {
    CHECK(one.rows[i].score == four.rows[i].score);
    CHECK(one.rows[i].rank == four.rows[i].rank);
  }
}

TEST_CASE("tuning report format") {
  TuningResult r;
  r.rows = {{0.1, 2.0, 1.0, 0.5, 1}, {1.0, 2.0, 1.0, std::numeric_limits<double>::infinity(), 2}};
  std::ostringstream out;
  write_tuning_report(out, r);
  CHECK(out.str() == "lambda1,lambda2,rho,score,rank\n0.1,2,1,0.5,1\n1,2,1,inf,2\n");
}
