#include "mutare/errors.hpp"
#include "mutare/panel.hpp"

#include <doctest.h>

#include <sstream>

using namespace mutare;

TEST_CASE("panel CSV round trip") {
  Eigen::MatrixXd v(2, 3);
  v << 0.1, -2.5, 1e-7, 3.25, 0.0, 123456.789;
  const PanelSeries panel(v, {"a", "b"});
  std::ostringstream out;
  write_panel_csv(out, panel);
  CHECK(out.str().rfind("subject,time,y\na,1,0.1\n", 0) == 0);
  std::istringstream in(out.str());
  const PanelSeries back = read_panel_csv(in);
  CHECK(back.subject_ids() == panel.subject_ids());
  CHECK(back.values() == panel.values());
}

TEST_CASE("panel CSV validation") {
  auto parse = [](const std::string& text) {
    std::istringstream in(text);
    return read_panel_csv(in);
  };
  CHECK_THROWS_AS(parse("id,t,y\n1,1,0\n"), DataError);
  CHECK_THROWS_AS(parse("subject,time,y\n"), DataError);
  CHECK_THROWS_AS(parse("subject,time,y\n1,2,0\n"), DataError);
  CHECK_THROWS_AS(parse("subject,time,y\n1,1,0\n1,3,0\n"), DataError);
  CHECK_THROWS_AS(parse("subject,time,y\n1,1,abc\n"), DataError);
  CHECK_THROWS_AS(parse("subject,time,y\n1,1,0\n2,1,0\n1,2,0\n"), DataError);
  CHECK_THROWS_AS(parse("subject,time,y\n1,1,0\n1,2,0\n2,1,0\n"), DataError);
  CHECK_THROWS_AS(parse("subject,time,y\n1,1,nan\n"), DataError);
  const PanelSeries ok = parse("subject,time,y\r\n7,1,0.5\r\n7,2,1.5\r\n");
  CHECK(ok.n_subjects() == 1);
  CHECK(ok.series_length() == 2);
  CHECK(ok(0, 1) == 1.5);
}

TEST_CASE("unbalanced panels are rejected with a hint") {
  std::istringstream in("subject,time,y\n1,1,0\n1,2,0\n2,1,0\n");
  try {
    read_panel_csv(in);
    FAIL("expected a data error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("unbalanced") != std::string::npos);
  }
}

TEST_CASE("number formatting uses 12 significant digits") {
  CHECK(format_number(0.1) == "0.1");
  CHECK(format_number(1.0 / 3.0) == "0.333333333333");
  CHECK(format_number(-0.0) == "0");
  CHECK(format_number(123456789012345.0) == "1.23456789012e+14");
  CHECK(round_significant(1.0 / 3.0) == 0.333333333333);
}

TEST_CASE("panel helpers") {
  Eigen::MatrixXd v(3, 2);
  v << 1, 2, 3, 4, 5, 6;
  const PanelSeries panel(v);
  CHECK(panel.subject_ids() == std::vector<std::string>{"1", "2", "3"});
  CHECK(panel.pooled_variance() == doctest::Approx(3.5));
  const PanelSeries sub = panel.select_subjects({2, 0});
  CHECK(sub(0, 0) == 5);
  CHECK(sub.subject_ids()[1] == "1");
  CHECK_THROWS_AS(PanelSeries(Eigen::MatrixXd(0, 3)), DataError);
}
