#include <cmath>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "socioprobe/synth.hpp"

using namespace socioprobe;

TEST_CASE("generation is deterministic and well formed") {
  SynthSpec spec;
  spec.n = 300;
  spec.dim = 6;
  spec.num_classes = 3;
  spec.layer_deltas = {0.0, 2.0};
  spec.seed = 4;
  const auto a = generate(spec);
  const auto b = generate(spec);
  CHECK(a.records.size() == 300);
  CHECK(a.num_layers == 2);
  CHECK(a.dim == 6);
  CHECK(a.schema.class_names == std::vector<std::string>{"class0", "class1", "class2"});
  CHECK(a.records[7].id == "synth-7");
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    CHECK(a.records[i].values == b.records[i].values);
    CHECK(a.records[i].label == b.records[i].label);
  }
  CHECK_NOTHROW(a.validate());
}

TEST_CASE("each record depends only on its index") {
  SynthSpec small;
  small.n = 10;
  small.layer_deltas = {1.0};
  small.seed = 8;
  SynthSpec large = small;
  large.n = 50;
  const auto a = generate(small);
  const auto b = generate(large);
  for (std::size_t i = 0; i < 10; ++i) CHECK(a.records[i].values == b.records[i].values);
}

TEST_CASE("label marginals are uniform") {
  SynthSpec spec;
  spec.n = 6000;
  spec.dim = 4;
  spec.num_classes = 3;
  const auto ds = generate(spec);
  std::vector<double> counts(3, 0.0);
  for (const auto& r : ds.records) counts[r.label] += 1.0;
  for (double c : counts) CHECK(std::abs(c - 2000.0) < 3.0 * std::sqrt(2000.0));
}

TEST_CASE("noise dimensions and class means") {
  SynthSpec spec;
  spec.n = 20000;
  spec.dim = 8;
  spec.layer_deltas = {4.0};
  spec.noise_fraction = 0.5;
  spec.seed = 2;
  REQUIRE(spec.num_noise_dims() == 4);
  const auto ds = generate(spec);
  std::vector<std::vector<double>> sum(2, std::vector<double>(8, 0.0));
  std::vector<double> n(2, 0.0);
  for (const auto& r : ds.records) {
    n[r.label] += 1.0;
    for (std::size_t j = 0; j < 8; ++j) sum[r.label][j] += r.values[j];
  }
  const double tol = 4.0 / std::sqrt(5000.0);
  for (int c = 0; c < 2; ++c) {
    for (std::size_t j = 4; j < 8; ++j) CHECK(std::abs(sum[c][j] / n[c]) < tol);
  }
  // class means sit delta apart
  double dist2 = 0.0;
  for (std::size_t j = 0; j < 8; ++j) {
    const double diff = sum[0][j] / n[0] - sum[1][j] / n[1];
    dist2 += diff * diff;
  }
  CHECK(std::abs(std::sqrt(dist2) - 4.0) < 0.1);
}

TEST_CASE("closed-form optimal accuracy") {
  CHECK(bayes_accuracy(0.0) == doctest::Approx(0.5));
  CHECK(bayes_accuracy(2.0) == doctest::Approx(0.841344746).epsilon(1e-8));
  CHECK(bayes_accuracy(6.0) == doctest::Approx(0.998650102).epsilon(1e-8));
}

TEST_CASE("invalid specs are rejected") {
  SynthSpec spec;
  spec.dim = 1;
  spec.num_classes = 3;
  CHECK_THROWS_AS(generate(spec), std::invalid_argument);
  spec = {};
  spec.layer_deltas = {};
  CHECK_THROWS_AS(generate(spec), std::invalid_argument);
  spec = {};
  spec.noise_fraction = 1.0;
  CHECK_THROWS_AS(generate(spec), std::invalid_argument);
}
