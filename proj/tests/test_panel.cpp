#include <algorithm>
#include <map>
#include <tuple>

#include <catch2/catch_amalgamated.hpp>

#include "synthpanel/panel.hpp"
#include "synthpanel/rng.hpp"
#include "test_helpers.hpp"

using namespace synthpanel;

TEST_CASE("build_panel singleton", "[panel]") {
  std::vector<Record> records{{"A", 2013, 4, 10.0}};
  Panel panel = build_panel(records);
  REQUIRE(panel.n_units() == 1);
  REQUIRE(panel.n_periods() == 1);
  REQUIRE(panel.value(0, 0) == 10.0);
  REQUIRE(panel.is_observed(0, 0));
}

TEST_CASE("build_panel flags unrecorded cells unobserved", "[panel]") {
  std::vector<Record> records{
      {"A", 2013, 4, 1.0}, {"A", 2013, 5, 2.0}, {"B", 2013, 4, 3.0},
      // B has no May row
  };
  Panel panel = build_panel(records);
  REQUIRE(panel.n_units() == 2);
  REQUIRE(panel.n_periods() == 2);
  std::size_t b = panel.unit_index("B");
  REQUIRE(panel.is_observed(b, 0));
  REQUIRE_FALSE(panel.is_observed(b, 1));
}

TEST_CASE("build_panel produces the 8x49 study shape", "[panel]") {
  Panel panel = synthpanel::testing::make_table_fixture();
  REQUIRE(panel.n_units() == 8);
  REQUIRE(panel.n_periods() == 49);  // 7 years x 7 season months
  REQUIRE(std::all_of(panel.observed.begin(), panel.observed.end(), [](auto v) { return v != 0; }));
}

TEST_CASE("build_panel rejects duplicates and non-finite values", "[panel]") {
  std::vector<Record> dup{{"A", 2013, 4, 1.0}, {"A", 2013, 4, 2.0}};
  REQUIRE_THROWS_WITH(build_panel(dup), Catch::Matchers::ContainsSubstring("duplicate") &&
                                            Catch::Matchers::ContainsSubstring("A") &&
                                            Catch::Matchers::ContainsSubstring("2013"));
  std::vector<Record> inf{{"A", 2013, 4, std::numeric_limits<double>::infinity()}};
  REQUIRE_THROWS_AS(build_panel(inf), std::invalid_argument);
}

TEST_CASE("panel round-trips observed records as a multiset", "[panel]") {
  Xoshiro256pp rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Record> records;
    std::map<std::tuple<std::string, int, int>, double> cells;
    int n_units = 2 + static_cast<int>(rng.next_index(4));
    for (int u = 0; u < n_units; ++u) {
      for (int y = 2013; y <= 2016; ++y) {
        for (int m = 4; m <= 8; ++m) {
          if (rng.next_double() < 0.3) continue;  // random missingness
          double v = rng.next_normal() * 100.0;
          std::string unit = "u" + std::to_string(u);
          records.push_back(Record{unit, y, m, v});
          cells[{unit, y, m}] = v;
        }
      }
    }
    if (records.empty()) continue;
    Panel panel = build_panel(records);
    std::vector<Record> back = emit_records(panel);
    REQUIRE(back.size() == records.size());
    for (const auto& rec : back) {
      auto it = cells.find({rec.unit, rec.year, rec.month});
      REQUIRE(it != cells.end());
      REQUIRE(rec.value == it->second);
      cells.erase(it);
    }
    REQUIRE(cells.empty());
  }
}

TEST_CASE("split_periods gives 4 pre and 3 post years on the study-shaped fixture", "[panel]") {
  Panel panel = synthpanel::testing::make_table_fixture();
  TreatmentSpec spec = synthpanel::testing::make_table_spec();
  PeriodSplit split = split_periods(panel, spec);
  REQUIRE(split.pre.size() == 4 * 7);
  REQUIRE(split.post.size() == 3 * 7);
}

TEST_CASE("split_periods partitions the season periods", "[panel]") {
  Panel panel = synthpanel::testing::make_table_fixture();
  TreatmentSpec spec = synthpanel::testing::make_table_spec();
  spec.season_months = {4, 5, 6, 7, 9, 10};  // drop August
  PeriodSplit split = split_periods(panel, spec);
  std::vector<std::size_t> all = split.pre;
  all.insert(all.end(), split.post.begin(), split.post.end());
  std::sort(all.begin(), all.end());
  REQUIRE(std::adjacent_find(all.begin(), all.end()) == all.end());  // disjoint
  std::size_t season_count = 0;
  for (const auto& p : panel.periods)
    if (spec.season_months.count(p.month)) ++season_count;
  REQUIRE(all.size() == season_count);
}

TEST_CASE("split_periods boundary cases", "[panel]") {
  Panel panel = synthpanel::testing::make_table_fixture();
  TreatmentSpec spec = synthpanel::testing::make_table_spec();

  spec.t0_year = 2019;  // last panel year: no post periods left
  REQUIRE_THROWS_AS(split_periods(panel, spec), std::invalid_argument);

  spec.t0_year = 2013;
  PeriodSplit split = split_periods(panel, spec);
  REQUIRE(split.pre.size() == 7);
  REQUIRE(split.post.size() == 6 * 7);
}

TEST_CASE("descriptive_stats hand-computed example", "[panel]") {
  std::vector<double> series{1, 2, 3, 4};
  SummaryStats s = descriptive_stats(series);
  REQUIRE(s.mean == Catch::Approx(2.5));
  REQUIRE(s.sd == Catch::Approx(1.2909944487358056));  // sqrt(5/3)
  REQUIRE(s.min == 1.0);
  REQUIRE(s.max == 4.0);
  REQUIRE(s.n == 4);
}

TEST_CASE("descriptive_stats zero variance and edge cases", "[panel]") {
  std::vector<double> constant{5, 5, 5};
  SummaryStats s = descriptive_stats(constant);
  REQUIRE(s.mean == 5.0);
  REQUIRE(s.sd == 0.0);
  REQUIRE(s.n == 3);

  REQUIRE_THROWS_AS(descriptive_stats(std::vector<double>{}), std::invalid_argument);
  REQUIRE(std::isnan(descriptive_stats(std::vector<double>{2.0}).sd));
}

TEST_CASE("descriptive_stats mean of k copies equals the value", "[panel]") {
  Xoshiro256pp rng(11);
  for (int k = 1; k <= 9; ++k) {
    double x = rng.next_normal() * 1000.0;
    std::vector<double> series(static_cast<std::size_t>(k), x);
    REQUIRE(descriptive_stats(series).mean == Catch::Approx(x));
  }
}

TEST_CASE("validate_spec enforces treated unit and t0 bounds", "[panel]") {
  Panel panel = synthpanel::testing::make_table_fixture();
  TreatmentSpec spec = synthpanel::testing::make_table_spec();
  REQUIRE_NOTHROW(validate_spec(panel, spec));

  spec.treated_unit = "Nowhere";
  REQUIRE_THROWS_AS(validate_spec(panel, spec), std::invalid_argument);

  spec = synthpanel::testing::make_table_spec();
  spec.t0_year = 2013;  // only one year at or before t0
  REQUIRE_THROWS_AS(validate_spec(panel, spec), std::invalid_argument);

  spec = synthpanel::testing::make_table_spec();
  spec.excluded_donors = {"Gotthard"};
  REQUIRE_THROWS_AS(validate_spec(panel, spec), std::invalid_argument);
}
