#pragma once

// Experiment grids over (task x encoder x layer x seed).
//
// Each task and encoder names an SPEB file. An encoder path may contain the
// placeholder "{task}", which is replaced by the task label; an encoder
// without a path uses the task's path. Classic cells train on the train
// split, early-stop on the validation split and score the test split; MDL
// cells compute the online codelength of the train split. The split is fixed
// by the spec's SplitSpec; the run seed only drives the probe.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "socioprobe/costmodel.hpp"
#include "socioprobe/embstore.hpp"
#include "socioprobe/probe.hpp"

namespace socioprobe {

enum class ProbeMode { kClassic, kMdl, kLayerwiseClassic, kLayerwiseMdl };

ProbeMode parse_mode(std::string_view name);
std::string to_string(ProbeMode mode);
bool is_mdl(ProbeMode mode);

struct TaskSpec {
  std::string label;
  std::string path;
};

struct EncoderSpec {
  std::string label;
  std::string path;  // may contain "{task}"; empty means the task's path
};

struct LayerSelection {
  enum class Kind { kLast, kAll, kExplicit };
  Kind kind = Kind::kLast;
  std::vector<std::size_t> layers;  // 1-based, for kExplicit

  std::vector<std::size_t> resolve(std::size_t num_layers) const;
  static LayerSelection parse(std::string_view text);  // "last", "all", "1,3,5"
};

/// Probe hyperparameters a spec may override; dimensions come from the data.
struct ProbeOverrides {
  std::optional<std::size_t> hidden_dim;
  std::optional<double> learning_rate;
  std::optional<std::size_t> batch_size;
  std::optional<std::size_t> max_epochs;
  std::optional<std::size_t> patience;
  std::optional<double> lr_decay_factor;

  ProbeConfig apply(ProbeConfig base) const;
};

struct ExperimentSpec {
  std::string name = "experiment";
  std::vector<TaskSpec> tasks;
  std::vector<EncoderSpec> encoders;
  ProbeMode mode = ProbeMode::kClassic;
  std::optional<LayerSelection> layers;  // default: last for classic/mdl, all for layerwise
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
  SplitSpec split;
  ProbeOverrides probe;

  LayerSelection layer_selection() const;
  std::filesystem::path resolve_path(const TaskSpec& task,
                                     const EncoderSpec& encoder) const;
  void validate() const;
};

ExperimentSpec parse_experiment_spec(const nlohmann::json& j);
ExperimentSpec read_experiment_spec(const std::filesystem::path& path);
nlohmann::json to_json(const ExperimentSpec& spec);

/// Metric names, in the order they are emitted per cell.
inline constexpr const char* kMetricF1Macro = "f1_macro";
inline constexpr const char* kMetricAccuracy = "accuracy";
inline constexpr const char* kMetricMdlBits = "mdl_bits";
inline constexpr const char* kMetricCompression = "compression";

std::vector<std::string> metrics_for(ProbeMode mode);

struct RunResult {
  std::string experiment;
  std::string task;
  std::string encoder;
  std::size_t layer = 0;
  std::uint64_t seed = 0;
  std::string metric;
  double value = 0.0;

  bool operator==(const RunResult&) const = default;
};

struct AggregateResult {
  std::string task;
  std::string encoder;
  std::size_t layer = 0;
  std::string metric;
  double mean = 0.0;
  double std = 0.0;
  std::size_t n_seeds = 0;

  bool operator==(const AggregateResult&) const = default;
};

/// Groups by (task, encoder, layer, metric) in first-appearance order and
/// applies aggregate_runs to each group.
std::vector<AggregateResult> aggregate_results(const std::vector<RunResult>& results);

struct CellFailure {
  std::string task;
  std::string encoder;
  std::size_t layer = 0;
  std::uint64_t seed = 0;
  std::string message;
};

struct ExperimentOutcome {
  std::vector<RunResult> results;  // canonical grid order
  std::vector<AggregateResult> aggregates;
  std::vector<CellFailure> failures;
  std::size_t cells_total = 0;
  std::size_t cells_skipped = 0;  // already present in the results file

  bool ok() const { return failures.empty(); }
};

struct RunOptions {
  std::size_t workers = 0;  // 0: hardware concurrency
  /// When set: results.csv is appended to as cells finish, completed cells
  /// found there are skipped, and on completion results.csv is rewritten in
  /// grid order next to aggregates.json and per-cell reports under cells/.
  std::optional<std::filesystem::path> output_dir;
};

/// Throws std::runtime_error (naming task and encoder) for unreadable files,
/// schema mismatches within a task, or out-of-range layers. Failures inside
/// individual cells are collected in the outcome instead.
ExperimentOutcome run_experiment(const ExperimentSpec& spec,
                                 const RunOptions& options = {});

/// Runs one cell and returns its metrics (in metrics_for order), plus the
/// probe's training report (classic) or codelength report (MDL) as JSON.
struct CellOutput {
  std::vector<RunResult> results;
  nlohmann::json report;
};
CellOutput run_cell(const ExperimentSpec& spec, const EmbeddingDataset& data,
                    const std::string& task, const std::string& encoder,
                    std::size_t layer, std::uint64_t seed);

void to_json(nlohmann::json& j, const TrainReport& report);

/// Encoders (e.g. checkpoints) that share one pretraining size.
struct EncoderGroup {
  std::string label;
  std::vector<std::string> encoders;
};

/// Per-step F1 gains in percentage points along an ordering of encoder
/// groups, using f1_macro means at each (task, encoder)'s highest probed
/// layer. The first group has no entry.
std::vector<SizeGain> compare_encoders(const std::vector<AggregateResult>& aggregates,
                                       const std::vector<EncoderGroup>& ordering);
std::vector<SizeGain> compare_encoders(const std::vector<AggregateResult>& aggregates,
                                       const std::vector<std::string>& ordering);

}  // namespace socioprobe
