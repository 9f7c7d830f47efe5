#include <algorithm>
#include <vector>

#include "doctest.h"
#include "socioprobe/metrics.hpp"
#include "socioprobe/rng.hpp"

using namespace socioprobe;

namespace {

ConfusionMatrix confusion(std::size_t k, const std::vector<std::uint32_t>& gold,
                          const std::vector<std::uint32_t>& pred) {
  ConfusionMatrix m(k);
  for (std::size_t i = 0; i < gold.size(); ++i) m.add(gold[i], pred[i]);
  return m;
}

}  // namespace

TEST_CASE("perfect predictions score one everywhere") {
  const std::vector<std::uint32_t> y = {0, 1, 2, 2, 1, 0, 0};
  const auto m = confusion(3, y, y);
  CHECK(m.accuracy() == 1.0);
  CHECK(m.f1(F1Averaging::kMacro) == 1.0);
  CHECK(m.f1(F1Averaging::kMicro) == 1.0);
  CHECK_THROWS_AS(m.f1(F1Averaging::kBinaryPositive), std::invalid_argument);
}

TEST_CASE("half-right binary predictions") {
  const auto m = confusion(2, {1, 1, 0, 0}, {1, 0, 1, 0});
  CHECK(m.f1(F1Averaging::kMacro) == doctest::Approx(0.5));
  CHECK(m.f1(F1Averaging::kBinaryPositive) == doctest::Approx(0.5));
  CHECK(m.accuracy() == 0.5);
}

TEST_CASE("majority predictor gets macro F1 of one third") {
  const auto m = confusion(2, {1, 1, 0, 0}, {0, 0, 0, 0});
  // class 0: p = 1/2, r = 1 -> 2/3; class 1: 0
  CHECK(m.f1(F1Averaging::kMacro) == doctest::Approx(1.0 / 3.0));
  CHECK(m.f1(F1Averaging::kBinaryPositive) == 0.0);
  CHECK(m.f1(F1Averaging::kMicro) == doctest::Approx(m.accuracy()));
}

TEST_CASE("classes absent from gold and predictions do not dilute macro F1") {
  const auto m = confusion(4, {0, 1, 0, 1}, {0, 1, 0, 1});
  CHECK(m.f1(F1Averaging::kMacro) == 1.0);
}

TEST_CASE("F1 is invariant to example order") {
  Rng rng(2);
  std::vector<std::uint32_t> gold, pred;
  for (int i = 0; i < 200; ++i) {
    gold.push_back(static_cast<std::uint32_t>(rng.bounded(3)));
    pred.push_back(static_cast<std::uint32_t>(rng.bounded(3)));
  }
  const auto base = confusion(3, gold, pred);
  std::vector<std::size_t> order(gold.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(std::span(order));
  std::vector<std::uint32_t> g2, p2;
  for (auto i : order) {
    g2.push_back(gold[i]);
    p2.push_back(pred[i]);
  }
  const auto shuffled = confusion(3, g2, p2);
  CHECK(shuffled.f1(F1Averaging::kMacro) == base.f1(F1Averaging::kMacro));
  CHECK(shuffled.accuracy() == base.accuracy());
}

TEST_CASE("confusion matrix bounds") {
  ConfusionMatrix m(2);
  CHECK_THROWS_AS(m.add(2, 0), std::out_of_range);
  CHECK(m.accuracy() == 0.0);
  CHECK_THROWS_AS(parse_averaging("weighted"), std::invalid_argument);
  CHECK(parse_averaging("macro") == F1Averaging::kMacro);
}

TEST_CASE("prediction ties go to the lowest class index") {
  const auto net = ProbeNetwork::zeros(2, 3, 3);
  ProbeData data;
  data.num_classes = 3;
  data.features = Matrix::Ones(4, 2);
  data.labels = {0, 1, 2, 0};
  const auto p = predict(net, data);
  CHECK(std::all_of(p.begin(), p.end(), [](auto c) { return c == 0; }));
  const auto e = evaluate(net, data);
  CHECK(e.accuracy == 0.5);
}

TEST_CASE("run aggregation uses the population standard deviation") {
  const std::vector<double> one = {0.5};
  auto a = aggregate_runs(one);
  CHECK(a.mean == 0.5);
  CHECK(a.std == 0.0);
  const std::vector<double> two = {0.4, 0.6};
  a = aggregate_runs(two);
  CHECK(a.mean == doctest::Approx(0.5));
  CHECK(a.std == doctest::Approx(0.1));
  const std::vector<double> same(7, 0.3);
  CHECK(aggregate_runs(same).std == 0.0);
  CHECK_THROWS_AS(aggregate_runs(std::span<const double>{}), std::invalid_argument);
}
