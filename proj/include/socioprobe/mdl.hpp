#pragma once

// Online-code minimum description length of labels given representations.
//
// The shuffled training data is cut at cumulative boundaries t_1 < ... < t_11.
// The first t_1 labels are sent with a uniform code (t_1 * log2 K bits). For
// each later block (t_i, t_{i+1}], a probe trained only on the first t_i
// examples pays -log2 p(y | x) bits per example. The codelength is the
// uniform term plus the sum of the ten block costs.

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "json.hpp"
#include "socioprobe/probe.hpp"

namespace socioprobe {

inline constexpr std::array<double, 11> kDefaultPortionFractions = {
    0.001, 0.002, 0.004, 0.008, 0.016, 0.032, 0.0625, 0.125, 0.25, 0.5, 1.0};

struct OnlineCodeSchedule {
  std::vector<double> fractions;
  std::vector<std::size_t> boundaries;  // t_1 .. t_m, t_m = n

  std::size_t num_blocks() const { return boundaries.size() - 1; }
  std::size_t total() const { return boundaries.back(); }
};

/// t_i = round(fraction_i * n), raised to max(2, K) for the first boundary
/// and to t_{i-1} + 1 where needed for strict monotonicity. Throws
/// std::invalid_argument when the raised boundaries would exceed n.
OnlineCodeSchedule build_schedule(
    std::size_t n, std::size_t num_classes,
    std::span<const double> fractions = kDefaultPortionFractions);

struct CodelengthReport {
  std::size_t t1 = 0;
  std::size_t num_examples = 0;
  std::size_t num_classes = 0;
  double uniform_bits = 0.0;
  std::vector<double> block_bits;
  double total_bits = 0.0;
  double compression = 0.0;

  bool operator==(const CodelengthReport&) const = default;
};

void to_json(nlohmann::json& j, const CodelengthReport& report);

/// Holdout used to early-stop a portion probe.
struct PortionSplit {
  std::vector<std::size_t> fit;         // indices into the portion
  std::vector<std::size_t> validation;  // empty: train a fixed number of epochs
};

inline constexpr std::size_t kMaxPortionHoldout = 1000;
inline constexpr std::size_t kFixedEpochsWithoutHoldout = 20;

/// Holds out floor(10%) of the portion (at least 1, at most 1000), chosen by a
/// Fisher-Yates shuffle seeded with `seed` (the last entries of the shuffled
/// index list). Portions whose fit part would drop below 2 get no holdout.
PortionSplit within_portion_validation_split(std::size_t portion_size,
                                             std::uint64_t seed);

/// Records which example indices (into the shuffled order) each block's
/// probe saw, for leakage checks.
struct PortionTrace {
  std::vector<std::size_t> fit;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> block;
};

/// Shuffles `train` with Rng(config.seed), then transmits each block with a
/// probe trained on the preceding portion. Portion i (1-based) uses probe
/// seed derive_seed(config.seed, 100 + i) and holdout seed
/// derive_seed(config.seed, 200 + i). The schedule must be built for
/// train.size(). When `trace` is non-null it receives one entry per block,
/// with indices into the original `train` order.
CodelengthReport online_codelength(const ProbeData& train,
                                   const ProbeConfig& config,
                                   const OnlineCodeSchedule& schedule,
                                   std::vector<PortionTrace>* trace = nullptr);

/// Convenience overload using the default schedule for train.size().
CodelengthReport online_codelength(const ProbeData& train,
                                   const ProbeConfig& config);

}  // namespace socioprobe
