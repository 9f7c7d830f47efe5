#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "socioprobe/probe.hpp"

namespace socioprobe {

enum class F1Averaging {
  kMacro,           // unweighted mean over classes present in gold or predictions
  kMicro,           // pooled counts; equals accuracy for single-label data
  kBinaryPositive,  // F1 of class index 1
};

F1Averaging parse_averaging(std::string_view name);

/// Row = gold class, column = predicted class.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t num_classes);

  void add(std::uint32_t gold, std::uint32_t predicted);
  std::size_t count(std::uint32_t gold, std::uint32_t predicted) const;
  std::size_t total() const { return total_; }
  std::size_t num_classes() const { return k_; }

  double accuracy() const;
  /// Zero when precision + recall is zero.
  double f1(std::uint32_t cls) const;
  double f1(F1Averaging averaging) const;

 private:
  std::size_t k_;
  std::size_t total_ = 0;
  std::vector<std::size_t> cells_;
};

struct Evaluation {
  double f1 = 0.0;
  double accuracy = 0.0;
};

/// Argmax with ties broken toward the lowest class index.
std::vector<std::uint32_t> predict(const ProbeNetwork& net, const ProbeData& data);

Evaluation evaluate(const ProbeNetwork& net, const ProbeData& test,
                    F1Averaging averaging = F1Averaging::kMacro);

struct Aggregate {
  double mean = 0.0;
  double std = 0.0;  // population (divisor n)
};

Aggregate aggregate_runs(std::span<const double> values);

}  // namespace socioprobe
