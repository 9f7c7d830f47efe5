#include <cmath>
#include <stdexcept>

#include "doctest.h"
#include "socioprobe/costmodel.hpp"

using namespace socioprobe;

TEST_CASE("cost rows follow the per-word rates and run counts") {
  const auto one_b = cost_estimate(1'000'000'000ULL);
  CHECK(one_b.runs == 10.0);
  CHECK(one_b.dollars == doctest::Approx(20316.0));
  CHECK(one_b.co2_lbs == doctest::Approx(2330.0));
  const auto hundred_m = cost_estimate(100'000'000ULL);
  CHECK(hundred_m.runs == 25.0);
  CHECK(hundred_m.dollars == doctest::Approx(5079.0));
  CHECK(hundred_m.co2_lbs == doctest::Approx(582.5));
  const auto one_m = cost_estimate(1'000'000ULL);
  CHECK(one_m.co2_lbs == doctest::Approx(5.825));
  CHECK(one_m.single_run_dollars == doctest::Approx(60948.0 / 30000.0));
  const auto full = cost_estimate(30'000'000'000ULL);
  CHECK(full.dollars == doctest::Approx(609480.0));
  CHECK(full.co2_lbs == doctest::Approx(69900.0));
}

TEST_CASE("zero tokens cost nothing") {
  const auto c = cost_estimate(0);
  CHECK(c.dollars == 0.0);
  CHECK(c.co2_lbs == 0.0);
}

TEST_CASE("single-run cost is linear and the dollar to CO2 ratio is constant") {
  for (std::uint64_t t : {1ULL, 777ULL, 1'000'000ULL, 123'456'789ULL}) {
    const auto a = cost_estimate(t, {}, 1.0);
    const auto b = cost_estimate(2 * t, {}, 1.0);
    CHECK(b.dollars == doctest::Approx(2 * a.dollars).epsilon(1e-15));
    CHECK(a.dollars / a.co2_lbs == doctest::Approx(60948.0 / 6990.0).epsilon(1e-12));
  }
}

TEST_CASE("unknown budgets need an explicit run count") {
  CHECK_THROWS_AS(cost_estimate(5'000'000ULL), std::invalid_argument);
  CHECK(cost_estimate(5'000'000ULL, {}, 3.0).runs == 3.0);
}

TEST_CASE("token counts parse and format") {
  CHECK(parse_token_count("1M") == 1'000'000ULL);
  CHECK(parse_token_count("30B") == 30'000'000'000ULL);
  CHECK(parse_token_count("500K") == 500'000ULL);
  CHECK(parse_token_count("42") == 42ULL);
  CHECK_THROWS_AS(parse_token_count("ten"), std::invalid_argument);
  CHECK_THROWS_AS(parse_token_count(""), std::invalid_argument);
  CHECK(format_token_count(10'000'000ULL) == "10M");
  CHECK(format_token_count(30'000'000'000ULL) == "30B");
  CHECK(format_token_count(1234) == "1234");
}

TEST_CASE("gain of a single task between two sizes") {
  const auto g = gain_table({{"1M", {{"age", {60.0}}}}, {"10M", {{"age", {62.61}}}}});
  REQUIRE(g.size() == 1);
  CHECK(g[0].size == "10M");
  CHECK(g[0].gain == doctest::Approx(2.61).epsilon(1e-12));
}

TEST_CASE("gains average checkpoints then tasks") {
  const auto g = gain_table({
      {"a", {{"t1", {50.0, 52.0}}, {"t2", {70.0}}}},
      {"b", {{"t1", {55.0}}, {"t2", {69.0, 71.0, 73.0}}}},
  });
  // t1: 55 - 51 = 4; t2: 71 - 70 = 1
  CHECK(g[0].gain == doctest::Approx(2.5));
}

TEST_CASE("gains do not depend on task insertion order") {
  SizeScores a{"a", {}}, b{"b", {}};
  a.task_scores["x"] = {1.0};
  a.task_scores["y"] = {5.0};
  b.task_scores["y"] = {8.0};
  b.task_scores["x"] = {2.0};
  SizeScores a2{"a", {}}, b2{"b", {}};
  a2.task_scores["y"] = {5.0};
  a2.task_scores["x"] = {1.0};
  b2.task_scores["x"] = {2.0};
  b2.task_scores["y"] = {8.0};
  CHECK(gain_table({a, b})[0].gain == gain_table({a2, b2})[0].gain);
}

TEST_CASE("mismatched task sets are rejected") {
  CHECK_THROWS_AS(gain_table({{"a", {{"x", {1.0}}}}, {"b", {{"y", {1.0}}}}}),
                  std::invalid_argument);
  CHECK_THROWS_AS(gain_table({{"a", {{"x", {}}}}, {"b", {{"x", {1.0}}}}}),
                  std::invalid_argument);
  CHECK(gain_table({{"a", {{"x", {1.0}}}}}).empty());
}
