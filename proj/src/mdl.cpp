#include "socioprobe/mdl.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>

#include "socioprobe/rng.hpp"

namespace socioprobe {

OnlineCodeSchedule build_schedule(std::size_t n, std::size_t num_classes,
                                  std::span<const double> fractions) {
  if (fractions.size() < 2) {
    throw std::invalid_argument("schedule needs at least two fractions");
  }
  for (std::size_t i = 0; i < fractions.size(); ++i) {
    if (!(fractions[i] > 0.0) || (i > 0 && !(fractions[i] > fractions[i - 1]))) {
      throw std::invalid_argument("fractions must be positive and increasing");
    }
  }
  if (fractions.back() != 1.0) {
    throw std::invalid_argument("last fraction must be 1.0");
  }

  OnlineCodeSchedule s;
  s.fractions.assign(fractions.begin(), fractions.end());
  const std::size_t floor_t1 = std::max<std::size_t>(2, num_classes);
  for (std::size_t i = 0; i < fractions.size(); ++i) {
    auto t = static_cast<std::size_t>(
        std::llround(fractions[i] * static_cast<double>(n)));
    if (i == 0) {
      t = std::max(t, floor_t1);
    } else {
      t = std::max(t, s.boundaries.back() + 1);
    }
    s.boundaries.push_back(t);
  }
  if (s.boundaries.back() != n) {
    throw std::invalid_argument(
        "training set of " + std::to_string(n) + " examples is too small for " +
        std::to_string(fractions.size()) + " strictly increasing portions");
  }
  return s;
}

void to_json(nlohmann::json& j, const CodelengthReport& r) {
  j = nlohmann::json{{"t1", r.t1},
                     {"uniform_bits", r.uniform_bits},
                     {"block_bits", r.block_bits},
                     {"total_bits", r.total_bits},
                     {"compression", r.compression}};
}

PortionSplit within_portion_validation_split(std::size_t portion_size,
                                             std::uint64_t seed) {
  if (portion_size == 0) throw std::invalid_argument("empty portion");
  PortionSplit out;
  const std::size_t holdout =
      std::min(std::max<std::size_t>(portion_size / 10, 1), kMaxPortionHoldout);
  std::vector<std::size_t> idx(portion_size);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (portion_size < holdout + 2) {
    out.fit = std::move(idx);
    return out;
  }
  Rng rng(seed);
  rng.shuffle(std::span(idx));
  const auto cut = idx.end() - static_cast<std::ptrdiff_t>(holdout);
  out.fit.assign(idx.begin(), cut);
  out.validation.assign(cut, idx.end());
  return out;
}

CodelengthReport online_codelength(const ProbeData& train,
                                   const ProbeConfig& config,
                                   const OnlineCodeSchedule& schedule,
                                   std::vector<PortionTrace>* trace) {
  config.validate();
  if (schedule.boundaries.empty() || schedule.total() != train.size()) {
    throw std::invalid_argument("schedule was built for " +
                                std::to_string(schedule.boundaries.empty()
                                                   ? 0
                                                   : schedule.total()) +
                                " examples but the data has " +
                                std::to_string(train.size()));
  }
  if (train.num_classes != config.num_classes ||
      train.dim() != config.input_dim) {
    throw std::invalid_argument("data shape does not match probe config");
  }

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(config.seed);
  rng.shuffle(std::span(order));
  const ProbeData shuffled = train.rows(order);

  const auto& t = schedule.boundaries;
  const double k = static_cast<double>(config.num_classes);

  CodelengthReport report;
  report.t1 = t.front();
  report.num_examples = train.size();
  report.num_classes = config.num_classes;
  report.uniform_bits = static_cast<double>(t.front()) * std::log2(k);
  report.block_bits.resize(schedule.num_blocks());
  if (trace) trace->assign(schedule.num_blocks(), {});

  for (std::size_t i = 0; i < schedule.num_blocks(); ++i) {
    const std::size_t portion_size = t[i];
    const ProbeData portion = shuffled.head(portion_size);
    ProbeConfig probe_config = config;
    probe_config.seed = derive_seed(config.seed, 100 + i + 1);

    const auto split = within_portion_validation_split(
        portion_size, derive_seed(config.seed, 200 + i + 1));
    TrainedProbe probe;
    if (split.validation.empty()) {
      probe_config.max_epochs = kFixedEpochsWithoutHoldout;
      probe = train_probe_fixed_epochs(portion, probe_config);
    } else {
      probe = train_probe(portion.rows(split.fit), portion.rows(split.validation),
                          probe_config);
    }

    const ProbeData block = shuffled.slice(t[i], t[i + 1]);
    const Matrix log_probs = log_probabilities(probe.network, block.features);
    double nats = 0.0;
    for (std::size_t r = 0; r < block.size(); ++r) {
      nats -= log_probs(static_cast<Eigen::Index>(r), block.labels[r]);
    }
    report.block_bits[i] = nats / std::numbers::ln2;

    if (trace) {
      auto& tr = (*trace)[i];
      for (std::size_t f : split.fit) tr.fit.push_back(order[f]);
      for (std::size_t v : split.validation) tr.validation.push_back(order[v]);
      for (std::size_t b = t[i]; b < t[i + 1]; ++b) tr.block.push_back(order[b]);
    }
  }

  // Accumulation order: uniform term first, then blocks in schedule order.
  report.total_bits = report.uniform_bits;
  for (double bits : report.block_bits) report.total_bits += bits;
  report.compression =
      static_cast<double>(train.size()) * std::log2(k) / report.total_bits;
  return report;
}

CodelengthReport online_codelength(const ProbeData& train,
                                   const ProbeConfig& config) {
  return online_codelength(
      train, config, build_schedule(train.size(), config.num_classes));
}

}  // namespace socioprobe
