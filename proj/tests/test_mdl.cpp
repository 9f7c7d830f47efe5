#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "doctest.h"
#include "oracles.hpp"
#include "socioprobe/mdl.hpp"
#include "socioprobe/synth.hpp"

using namespace socioprobe;

namespace {

ProbeData synth_layer(std::size_t n, double delta, std::uint64_t seed, std::size_t dim = 8) {
  SynthSpec spec;
  spec.n = n;
  spec.dim = dim;
  spec.layer_deltas = {delta};
  spec.seed = seed;
  return layer_data(generate(spec), 1);
}

ProbeConfig small_config(const ProbeData& d, std::uint64_t seed) {
  ProbeConfig c;
  c.input_dim = d.dim();
  c.num_classes = d.num_classes;
  c.hidden_dim = 16;
  c.learning_rate = 0.01;
  c.max_epochs = 20;
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("default schedule at n = 10000") {
  const auto s = build_schedule(10000, 2);
  const std::vector<std::size_t> expected = {10, 20, 40, 80, 160, 320, 625, 1250, 2500, 5000, 10000};
  CHECK(s.boundaries == expected);
  CHECK(s.num_blocks() == 10);
  CHECK(s.total() == 10000);
}

TEST_CASE("schedule scales with n") {
  const auto a = build_schedule(100000, 2);
  const auto b = build_schedule(10000, 2);
  for (std::size_t i = 0; i < a.boundaries.size(); ++i) {
    CHECK(a.boundaries[i] == 10 * b.boundaries[i]);
  }
}

TEST_CASE("small n raises early boundaries to stay strictly increasing") {
  const auto s = build_schedule(100, 3);
  CHECK(s.boundaries.front() == 3);
  for (std::size_t i = 1; i < s.boundaries.size(); ++i) {
    CHECK(s.boundaries[i] > s.boundaries[i - 1]);
  }
  CHECK(s.boundaries.back() == 100);
  CHECK_THROWS_AS(build_schedule(11, 2), std::invalid_argument);
  CHECK_NOTHROW(build_schedule(12, 2));
}

TEST_CASE("schedule rejects malformed fractions") {
  const std::vector<double> not_ending_at_one = {0.1, 0.5, 0.9};
  CHECK_THROWS_AS(build_schedule(1000, 2, not_ending_at_one), std::invalid_argument);
  const std::vector<double> decreasing = {0.5, 0.25, 1.0};
  CHECK_THROWS_AS(build_schedule(1000, 2, decreasing), std::invalid_argument);
}

TEST_CASE("within-portion holdout sizes") {
  auto s = within_portion_validation_split(100, 1);
  CHECK(s.fit.size() == 90);
  CHECK(s.validation.size() == 10);
  s = within_portion_validation_split(3, 1);
  CHECK(s.fit.size() == 2);
  CHECK(s.validation.size() == 1);
  s = within_portion_validation_split(2, 1);
  CHECK(s.fit.size() == 2);
  CHECK(s.validation.empty());
  s = within_portion_validation_split(50000, 1);
  CHECK(s.validation.size() == kMaxPortionHoldout);

  s = within_portion_validation_split(40, 9);
  std::vector<std::size_t> all = s.fit;
  all.insert(all.end(), s.validation.begin(), s.validation.end());
  std::sort(all.begin(), all.end());
  std::vector<std::size_t> expected(40);
  std::iota(expected.begin(), expected.end(), std::size_t{0});
  CHECK(all == expected);
}

TEST_CASE("codelength accounting and block structure") {
  const auto data = synth_layer(400, 2.0, 1);
  const auto c = small_config(data, 3);
  const auto schedule = build_schedule(data.size(), 2);
  std::vector<PortionTrace> trace;
  const auto r = online_codelength(data, c, schedule, &trace);

  CHECK(r.t1 == schedule.boundaries.front());
  CHECK(r.uniform_bits == doctest::Approx(static_cast<double>(r.t1)));
  REQUIRE(r.block_bits.size() == schedule.num_blocks());
  const double sum = std::accumulate(r.block_bits.begin(), r.block_bits.end(), r.uniform_bits);
  CHECK(r.total_bits == doctest::Approx(sum).epsilon(1e-12));
  for (double b : r.block_bits) CHECK(b >= 0.0);
  CHECK(r.compression == doctest::Approx(400.0 / r.total_bits));

  REQUIRE(trace.size() == schedule.num_blocks());
  for (std::size_t i = 0; i < trace.size(); ++i) {
    CHECK(trace[i].block.size() == schedule.boundaries[i + 1] - schedule.boundaries[i]);
    CHECK(trace[i].fit.size() + trace[i].validation.size() == schedule.boundaries[i]);
  }
}

TEST_CASE("no probe ever sees the block it transmits") {
  const auto data = synth_layer(300, 1.0, 2);
  const auto c = small_config(data, 4);
  std::vector<PortionTrace> trace;
  online_codelength(data, c, build_schedule(data.size(), 2), &trace);
  auto portion = [](const PortionTrace& t) {
    std::set<std::size_t> seen(t.fit.begin(), t.fit.end());
    seen.insert(t.validation.begin(), t.validation.end());
    return seen;
  };
  // each portion is exactly the uniform prefix plus all earlier blocks
  std::set<std::size_t> earlier = portion(trace.front());
  for (const auto& t : trace) {
    CHECK(portion(t) == earlier);
    for (auto i : t.block) {
      CHECK(earlier.count(i) == 0);
      earlier.insert(i);
    }
  }
  CHECK(earlier.size() == data.size());
}

TEST_CASE("codelength is deterministic for a fixed seed and varies across seeds") {
  const auto data = synth_layer(256, 1.0, 3);
  const auto a = online_codelength(data, small_config(data, 5));
  const auto b = online_codelength(data, small_config(data, 5));
  const auto other = online_codelength(data, small_config(data, 6));
  CHECK(a == b);
  CHECK(a.total_bits != other.total_bits);
}

TEST_CASE("a constant label compresses far below one bit per example") {
  auto data = synth_layer(512, 0.0, 4);
  std::fill(data.labels.begin(), data.labels.end(), 0u);
  auto c = small_config(data, 1);
  c.learning_rate = 0.05;
  const auto r = online_codelength(data, c);
  CHECK(r.total_bits < static_cast<double>(data.size()));
  CHECK(r.compression > 1.0);
}

TEST_CASE("codelength matches the straight-line reference on a small set") {
  const auto data = synth_layer(64, 2.0, 21, 4);
  ProbeConfig c;
  c.input_dim = 4;
  c.hidden_dim = 8;
  c.learning_rate = 0.01;
  c.batch_size = 64;
  c.max_epochs = 50;
  c.seed = 17;
  const auto schedule = build_schedule(64, 2);
  const auto r = online_codelength(data, c, schedule);

  std::vector<oracle::Example> examples;
  for (std::size_t i = 0; i < data.size(); ++i) {
    oracle::Example e;
    for (Eigen::Index j = 0; j < data.features.cols(); ++j) {
      e.x.push_back(data.features(static_cast<Eigen::Index>(i), j));
    }
    e.y = static_cast<int>(data.labels[i]);
    examples.push_back(e);
  }
  const double ref = oracle::online_codelength(examples, 2, schedule.boundaries, 17, {});
  CHECK(std::abs(r.total_bits - ref) / ref < 0.02);
}

TEST_CASE("codelength rejects a schedule for the wrong size") {
  const auto data = synth_layer(100, 1.0, 1);
  CHECK_THROWS_AS(online_codelength(data, small_config(data, 1), build_schedule(200, 2)),
                  std::invalid_argument);
}
