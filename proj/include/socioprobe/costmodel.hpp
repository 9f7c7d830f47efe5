#pragma once

// Pretraining cost and expected-gain arithmetic for encoders trained on
// increasing amounts of text.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace socioprobe {

struct CostModelParams {
  double dollars_per_30b_words = 60948.0;
  double co2_lbs_per_30b_words = 6990.0;
  /// Number of pretraining runs needed per token budget.
  std::map<std::uint64_t, double> run_count = {
      {1'000'000ULL, 25.0},
      {10'000'000ULL, 25.0},
      {100'000'000ULL, 25.0},
      {1'000'000'000ULL, 10.0},
      {30'000'000'000ULL, 10.0},
  };
};

struct CostEstimate {
  std::uint64_t tokens = 0;
  double runs = 0.0;
  double single_run_dollars = 0.0;
  double single_run_co2_lbs = 0.0;
  double dollars = 0.0;
  double co2_lbs = 0.0;
};

/// Throws std::invalid_argument for a non-zero budget with no run_count entry
/// unless `runs_override` is given.
CostEstimate cost_estimate(std::uint64_t tokens, const CostModelParams& params = {},
                           std::optional<double> runs_override = std::nullopt);

/// Parses "1M", "10M", "1B", "30B", "500K" or a plain integer.
std::uint64_t parse_token_count(std::string_view text);
/// Inverse of parse_token_count for round multiples; plain digits otherwise.
std::string format_token_count(std::uint64_t tokens);

/// F1 scores (any unit; gains come out in the same unit) for one pretraining
/// size: task -> one score per checkpoint.
struct SizeScores {
  std::string size;
  std::map<std::string, std::vector<double>> task_scores;
};

struct SizeGain {
  std::string size;
  double gain = 0.0;
};

/// For each size after the first: mean over tasks of (checkpoint-mean score
/// at this size - checkpoint-mean score at the previous size). Sizes must be
/// given in ascending order and share one task set.
std::vector<SizeGain> gain_table(const std::vector<SizeScores>& sizes);

}  // namespace socioprobe
