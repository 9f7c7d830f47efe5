#include "socioprobe/costmodel.hpp"

#include <cctype>
#include <charconv>
#include <numeric>
#include <stdexcept>

namespace socioprobe {

CostEstimate cost_estimate(std::uint64_t tokens, const CostModelParams& params,
                           std::optional<double> runs_override) {
  CostEstimate e;
  e.tokens = tokens;
  const double share = static_cast<double>(tokens) / 30e9;
  e.single_run_dollars = params.dollars_per_30b_words * share;
  e.single_run_co2_lbs = params.co2_lbs_per_30b_words * share;
  if (runs_override) {
    e.runs = *runs_override;
  } else if (auto it = params.run_count.find(tokens); it != params.run_count.end()) {
    e.runs = it->second;
  } else if (tokens == 0) {
    e.runs = 0.0;
  } else {
    throw std::invalid_argument("no pretraining run count for " +
                                format_token_count(tokens) +
                                " tokens; supply a multiplier");
  }
  e.dollars = e.single_run_dollars * e.runs;
  e.co2_lbs = e.single_run_co2_lbs * e.runs;
  return e;
}

std::uint64_t parse_token_count(std::string_view text) {
  if (text.empty()) throw std::invalid_argument("empty token count");
  std::uint64_t scale = 1;
  switch (std::toupper(static_cast<unsigned char>(text.back()))) {
    case 'K': scale = 1'000ULL; break;
    case 'M': scale = 1'000'000ULL; break;
    case 'B': scale = 1'000'000'000ULL; break;
    default: break;
  }
  if (scale != 1) text.remove_suffix(1);
  std::uint64_t value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw std::invalid_argument("bad token count '" + std::string(text) + "'");
  }
  return value * scale;
}

std::string format_token_count(std::uint64_t tokens) {
  if (tokens != 0) {
    if (tokens % 1'000'000'000ULL == 0) return std::to_string(tokens / 1'000'000'000ULL) + "B";
    if (tokens % 1'000'000ULL == 0) return std::to_string(tokens / 1'000'000ULL) + "M";
    if (tokens % 1'000ULL == 0) return std::to_string(tokens / 1'000ULL) + "K";
  }
  return std::to_string(tokens);
}

namespace {
double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}
}  // namespace

std::vector<SizeGain> gain_table(const std::vector<SizeScores>& sizes) {
  if (sizes.empty()) throw std::invalid_argument("no sizes given");
  for (const auto& s : sizes) {
    if (s.task_scores.empty()) {
      throw std::invalid_argument("size " + s.size + " has no tasks");
    }
    for (const auto& [task, scores] : s.task_scores) {
      if (scores.empty()) {
        throw std::invalid_argument("size " + s.size + " has no scores for " + task);
      }
    }
  }
  std::vector<SizeGain> out;
  for (std::size_t j = 1; j < sizes.size(); ++j) {
    const auto& prev = sizes[j - 1].task_scores;
    const auto& cur = sizes[j].task_scores;
    if (prev.size() != cur.size()) {
      throw std::invalid_argument("task sets differ between " + sizes[j - 1].size +
                                  " and " + sizes[j].size);
    }
    double sum = 0.0;
    for (const auto& [task, scores] : cur) {
      auto it = prev.find(task);
      if (it == prev.end()) {
        throw std::invalid_argument("task " + task + " missing at size " +
                                    sizes[j - 1].size);
      }
      sum += mean_of(scores) - mean_of(it->second);
    }
    out.push_back({sizes[j].size, sum / static_cast<double>(cur.size())});
  }
  return out;
}

}  // namespace socioprobe
