#include "socioprobe/metrics.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace socioprobe {

F1Averaging parse_averaging(std::string_view name) {
  if (name == "macro") return F1Averaging::kMacro;
  if (name == "micro") return F1Averaging::kMicro;
  if (name == "binary" || name == "binary-positive") {
    return F1Averaging::kBinaryPositive;
  }
  throw std::invalid_argument("unknown F1 averaging '" + std::string(name) + "'");
}

ConfusionMatrix::ConfusionMatrix(std::size_t num_classes)
    : k_(num_classes), cells_(num_classes * num_classes, 0) {}

void ConfusionMatrix::add(std::uint32_t gold, std::uint32_t predicted) {
  if (gold >= k_ || predicted >= k_) {
    throw std::out_of_range("class index out of range");
  }
  ++cells_[gold * k_ + predicted];
  ++total_;
}

std::size_t ConfusionMatrix::count(std::uint32_t gold,
                                   std::uint32_t predicted) const {
  return cells_.at(gold * k_ + predicted);
}

double ConfusionMatrix::accuracy() const {
  if (total_ == 0) return 0.0;
  std::size_t correct = 0;
  for (std::uint32_t c = 0; c < k_; ++c) correct += count(c, c);
  return static_cast<double>(correct) / static_cast<double>(total_);
}

double ConfusionMatrix::f1(std::uint32_t cls) const {
  std::size_t tp = count(cls, cls);
  std::size_t fp = 0;
  std::size_t fn = 0;
  for (std::uint32_t o = 0; o < k_; ++o) {
    if (o == cls) continue;
    fp += count(o, cls);
    fn += count(cls, o);
  }
  const double precision = tp + fp == 0 ? 0.0 : double(tp) / double(tp + fp);
  const double recall = tp + fn == 0 ? 0.0 : double(tp) / double(tp + fn);
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

double ConfusionMatrix::f1(F1Averaging averaging) const {
  switch (averaging) {
    case F1Averaging::kMicro:
      return accuracy();
    case F1Averaging::kBinaryPositive:
      if (k_ != 2) throw std::invalid_argument("binary F1 needs K = 2");
      return f1(1u);
    case F1Averaging::kMacro:
      break;
  }
  double sum = 0.0;
  std::size_t present = 0;
  for (std::uint32_t c = 0; c < k_; ++c) {
    std::size_t touched = 0;
    for (std::uint32_t o = 0; o < k_; ++o) touched += count(c, o) + count(o, c);
    if (touched == 0) continue;
    sum += f1(c);
    ++present;
  }
  return present == 0 ? 0.0 : sum / static_cast<double>(present);
}

std::vector<std::uint32_t> predict(const ProbeNetwork& net, const ProbeData& data) {
  const Matrix log_probs = log_probabilities(net, data.features);
  std::vector<std::uint32_t> out(data.size());
  for (Eigen::Index i = 0; i < log_probs.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < log_probs.cols(); ++c) {
      if (log_probs(i, c) > log_probs(i, best)) best = c;
    }
    out[static_cast<std::size_t>(i)] = static_cast<std::uint32_t>(best);
  }
  return out;
}

Evaluation evaluate(const ProbeNetwork& net, const ProbeData& test,
                    F1Averaging averaging) {
  if (test.size() == 0) throw std::invalid_argument("empty test data");
  ConfusionMatrix cm(net.num_classes());
  const auto predicted = predict(net, test);
  for (std::size_t i = 0; i < test.size(); ++i) cm.add(test.labels[i], predicted[i]);
  return {cm.f1(averaging), cm.accuracy()};
}

Aggregate aggregate_runs(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("no values to aggregate");
  const double n = static_cast<double>(values.size());
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / n;
  double sq = 0.0;
  for (double v : values) sq += (v - mean) * (v - mean);
  return {mean, std::sqrt(sq / n)};
}

}  // namespace socioprobe
