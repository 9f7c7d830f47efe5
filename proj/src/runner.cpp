#include "socioprobe/runner.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <charconv>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

#include "socioprobe/mdl.hpp"
#include "socioprobe/metrics.hpp"
#include "socioprobe/report.hpp"

namespace socioprobe {

namespace fs = std::filesystem;
using nlohmann::json;

ProbeMode parse_mode(std::string_view name) {
  if (name == "classic") return ProbeMode::kClassic;
  if (name == "mdl") return ProbeMode::kMdl;
  if (name == "layerwise-classic") return ProbeMode::kLayerwiseClassic;
  if (name == "layerwise-mdl") return ProbeMode::kLayerwiseMdl;
  throw std::invalid_argument("unknown mode '" + std::string(name) + "'");
}

std::string to_string(ProbeMode mode) {
  switch (mode) {
    case ProbeMode::kClassic: return "classic";
    case ProbeMode::kMdl: return "mdl";
    case ProbeMode::kLayerwiseClassic: return "layerwise-classic";
    case ProbeMode::kLayerwiseMdl: return "layerwise-mdl";
  }
  return "classic";
}

bool is_mdl(ProbeMode mode) {
  return mode == ProbeMode::kMdl || mode == ProbeMode::kLayerwiseMdl;
}

std::vector<std::size_t> LayerSelection::resolve(std::size_t num_layers) const {
  switch (kind) {
    case Kind::kLast:
      return {num_layers};
    case Kind::kAll: {
      std::vector<std::size_t> all(num_layers);
      for (std::size_t i = 0; i < num_layers; ++i) all[i] = i + 1;
      return all;
    }
    case Kind::kExplicit:
      for (std::size_t l : layers) {
        if (l < 1 || l > num_layers) {
          throw std::out_of_range("layer " + std::to_string(l) + " outside [1, " +
                                  std::to_string(num_layers) + "]");
        }
      }
      return layers;
  }
  return {};
}

LayerSelection LayerSelection::parse(std::string_view text) {
  if (text == "last") return {Kind::kLast, {}};
  if (text == "all") return {Kind::kAll, {}};
  LayerSelection sel{Kind::kExplicit, {}};
  while (!text.empty()) {
    const auto comma = text.find(',');
    const auto item = text.substr(0, comma);
    std::size_t value = 0;
    const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), value);
    if (ec != std::errc{} || ptr != item.data() + item.size() || value == 0) {
      throw std::invalid_argument("bad layer list '" + std::string(text) + "'");
    }
    sel.layers.push_back(value);
    if (comma == std::string_view::npos) break;
    text.remove_prefix(comma + 1);
  }
  if (sel.layers.empty()) throw std::invalid_argument("empty layer list");
  return sel;
}

ProbeConfig ProbeOverrides::apply(ProbeConfig base) const {
  if (hidden_dim) base.hidden_dim = *hidden_dim;
  if (learning_rate) base.learning_rate = *learning_rate;
  if (batch_size) base.batch_size = *batch_size;
  if (max_epochs) base.max_epochs = *max_epochs;
  if (patience) base.patience = *patience;
  if (lr_decay_factor) base.lr_decay_factor = *lr_decay_factor;
  return base;
}

LayerSelection ExperimentSpec::layer_selection() const {
  if (layers) return *layers;
  if (mode == ProbeMode::kLayerwiseClassic || mode == ProbeMode::kLayerwiseMdl) {
    return {LayerSelection::Kind::kAll, {}};
  }
  return {LayerSelection::Kind::kLast, {}};
}

fs::path ExperimentSpec::resolve_path(const TaskSpec& task,
                                      const EncoderSpec& encoder) const {
  if (encoder.path.empty()) {
    if (task.path.empty()) {
      throw std::invalid_argument("task '" + task.label + "', encoder '" +
                                  encoder.label + "': no data path");
    }
    return task.path;
  }
  std::string p = encoder.path;
  const std::string placeholder = "{task}";
  for (auto pos = p.find(placeholder); pos != std::string::npos;
       pos = p.find(placeholder, pos + task.label.size())) {
    p.replace(pos, placeholder.size(), task.label);
  }
  return p;
}

void ExperimentSpec::validate() const {
  if (tasks.empty()) throw std::invalid_argument("experiment has no tasks");
  if (encoders.empty()) throw std::invalid_argument("experiment has no encoders");
  if (seeds.empty()) throw std::invalid_argument("experiment has no seeds");
  std::set<std::string> names;
  for (const auto& t : tasks) {
    if (t.label.empty() || !names.insert("t:" + t.label).second) {
      throw std::invalid_argument("task labels must be unique and non-empty");
    }
  }
  for (const auto& e : encoders) {
    if (e.label.empty() || !names.insert("e:" + e.label).second) {
      throw std::invalid_argument("encoder labels must be unique and non-empty");
    }
  }
  std::set<std::uint64_t> unique_seeds(seeds.begin(), seeds.end());
  if (unique_seeds.size() != seeds.size()) {
    throw std::invalid_argument("seeds must be distinct");
  }
  split.validate();
}

namespace {

template <typename T>
void read_optional(const json& j, const char* key, std::optional<T>& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

ExperimentSpec parse_experiment_spec(const json& j) {
  ExperimentSpec spec;
  spec.name = j.value("name", spec.name);
  spec.mode = parse_mode(j.value("mode", std::string("classic")));
  for (const auto& t : j.at("tasks")) {
    spec.tasks.push_back({t.at("label").get<std::string>(), t.value("path", "")});
  }
  if (j.contains("encoders")) {
    for (const auto& e : j.at("encoders")) {
      spec.encoders.push_back({e.at("label").get<std::string>(), e.value("path", "")});
    }
  } else {
    spec.encoders.push_back({"default", ""});
  }
  if (j.contains("layers")) {
    const auto& l = j.at("layers");
    if (l.is_string()) {
      spec.layers = LayerSelection::parse(l.get<std::string>());
    } else {
      spec.layers = LayerSelection{LayerSelection::Kind::kExplicit,
                                   l.get<std::vector<std::size_t>>()};
    }
  }
  if (j.contains("seeds")) spec.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  if (j.contains("split")) {
    const auto& s = j.at("split");
    spec.split.train_fraction = s.value("train", spec.split.train_fraction);
    spec.split.val_fraction = s.value("val", spec.split.val_fraction);
    spec.split.test_fraction = s.value("test", spec.split.test_fraction);
    spec.split.seed = s.value("seed", spec.split.seed);
  }
  if (j.contains("probe")) {
    const auto& p = j.at("probe");
    read_optional(p, "hidden_dim", spec.probe.hidden_dim);
    read_optional(p, "learning_rate", spec.probe.learning_rate);
    read_optional(p, "batch_size", spec.probe.batch_size);
    read_optional(p, "max_epochs", spec.probe.max_epochs);
    read_optional(p, "patience", spec.probe.patience);
    read_optional(p, "lr_decay_factor", spec.probe.lr_decay_factor);
  }
  spec.validate();
  return spec;
}

ExperimentSpec read_experiment_spec(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
  ExperimentSpec spec = parse_experiment_spec(j);
  // Relative data paths are taken relative to the spec file.
  const fs::path base = path.parent_path();
  auto rebase = [&base](std::string& p) {
    if (!p.empty() && fs::path(p).is_relative()) p = (base / p).string();
  };
  for (auto& t : spec.tasks) rebase(t.path);
  for (auto& e : spec.encoders) rebase(e.path);
  return spec;
}

json to_json(const ExperimentSpec& spec) {
  json j;
  j["name"] = spec.name;
  j["mode"] = to_string(spec.mode);
  for (const auto& t : spec.tasks) j["tasks"].push_back({{"label", t.label}, {"path", t.path}});
  for (const auto& e : spec.encoders) {
    j["encoders"].push_back({{"label", e.label}, {"path", e.path}});
  }
  const auto sel = spec.layer_selection();
  switch (sel.kind) {
    case LayerSelection::Kind::kLast: j["layers"] = "last"; break;
    case LayerSelection::Kind::kAll: j["layers"] = "all"; break;
    case LayerSelection::Kind::kExplicit: j["layers"] = sel.layers; break;
  }
  j["seeds"] = spec.seeds;
  j["split"] = {{"train", spec.split.train_fraction},
                {"val", spec.split.val_fraction},
                {"test", spec.split.test_fraction},
                {"seed", spec.split.seed}};
  json p = json::object();
  if (spec.probe.hidden_dim) p["hidden_dim"] = *spec.probe.hidden_dim;
  if (spec.probe.learning_rate) p["learning_rate"] = *spec.probe.learning_rate;
  if (spec.probe.batch_size) p["batch_size"] = *spec.probe.batch_size;
  if (spec.probe.max_epochs) p["max_epochs"] = *spec.probe.max_epochs;
  if (spec.probe.patience) p["patience"] = *spec.probe.patience;
  if (spec.probe.lr_decay_factor) p["lr_decay_factor"] = *spec.probe.lr_decay_factor;
  j["probe"] = p;
  return j;
}

std::vector<std::string> metrics_for(ProbeMode mode) {
  if (is_mdl(mode)) return {kMetricMdlBits, kMetricCompression};
  return {kMetricF1Macro, kMetricAccuracy};
}

std::vector<AggregateResult> aggregate_results(const std::vector<RunResult>& results) {
  using Key = std::tuple<std::string, std::string, std::size_t, std::string>;
  std::vector<Key> order;
  std::map<Key, std::vector<double>> groups;
  for (const auto& r : results) {
    Key key{r.task, r.encoder, r.layer, r.metric};
    auto [it, inserted] = groups.try_emplace(key);
    if (inserted) order.push_back(key);
    it->second.push_back(r.value);
  }
  std::vector<AggregateResult> out;
  out.reserve(order.size());
  for (const auto& key : order) {
    const auto& values = groups.at(key);
    const auto agg = aggregate_runs(values);
    out.push_back({std::get<0>(key), std::get<1>(key), std::get<2>(key),
                   std::get<3>(key), agg.mean, agg.std, values.size()});
  }
  return out;
}

void to_json(json& j, const TrainReport& r) {
  j = json{{"epochs_run", r.epochs_run},
           {"train_loss", r.train_loss},
           {"val_loss", r.val_loss},
           {"learning_rate", r.learning_rate},
           {"final_learning_rate", r.final_learning_rate},
           {"best_epoch", r.best_epoch},
           {"stopped_early", r.stopped_early}};
  j["best_val_loss"] = r.best_val_loss ? json(*r.best_val_loss) : json(nullptr);
}

CellOutput run_cell(const ExperimentSpec& spec, const EmbeddingDataset& data,
                    const std::string& task, const std::string& encoder,
                    std::size_t layer, std::uint64_t seed) {
  const auto split = split_indices(data.size(), spec.split);
  ProbeConfig config;
  config.input_dim = data.dim;
  config.num_classes = data.schema.num_classes();
  config = spec.probe.apply(config);
  config.seed = seed;

  CellOutput out;
  auto emit = [&](const char* metric, double value) {
    out.results.push_back({spec.name, task, encoder, layer, seed, metric, value});
  };
  const ProbeData train = layer_data(data, layer, split.train);
  if (is_mdl(spec.mode)) {
    const auto report = online_codelength(train, config);
    emit(kMetricMdlBits, report.total_bits);
    emit(kMetricCompression, report.compression);
    out.report = report;
  } else {
    const ProbeData val = layer_data(data, layer, split.val);
    const ProbeData test = layer_data(data, layer, split.test);
    const auto trained = train_probe(train, val, config);
    const auto eval = evaluate(trained.network, test, F1Averaging::kMacro);
    emit(kMetricF1Macro, eval.f1);
    emit(kMetricAccuracy, eval.accuracy);
    out.report = trained.report;
  }
  return out;
}

namespace {

struct Cell {
  std::size_t task;
  std::size_t encoder;
  std::size_t layer;
  std::uint64_t seed;
};

std::string sanitize(std::string s) {
  for (char& c : s) {
    const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '-' ||
                    c == '_' || c == '.';
    if (!ok) c = '_';
  }
  return s;
}

void write_text_atomic(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc | std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << text;
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

}  // namespace

ExperimentOutcome run_experiment(const ExperimentSpec& spec, const RunOptions& options) {
  spec.validate();
  const auto metrics = metrics_for(spec.mode);
  const auto selection = spec.layer_selection();

  // datasets[task][encoder]; files shared between pairs are read once.
  std::map<std::string, std::shared_ptr<const EmbeddingDataset>> by_path;
  std::vector<std::vector<std::shared_ptr<const EmbeddingDataset>>> datasets;
  std::vector<Cell> cells;
  for (std::size_t ti = 0; ti < spec.tasks.size(); ++ti) {
    const auto& task = spec.tasks[ti];
    datasets.emplace_back();
    std::optional<LabelSchema> schema;
    for (std::size_t ei = 0; ei < spec.encoders.size(); ++ei) {
      const auto& enc = spec.encoders[ei];
      const std::string where = "task '" + task.label + "', encoder '" + enc.label + "': ";
      try {
        const fs::path path = spec.resolve_path(task, enc);
        auto& slot = by_path[path.string()];
        if (!slot) {
          auto ds = std::make_shared<EmbeddingDataset>(read_dataset(path));
          ds->validate();
          slot = std::move(ds);
        }
        if (schema && *schema != slot->schema) {
          throw std::runtime_error("label schema differs from other encoders of this task");
        }
        schema = slot->schema;
        datasets.back().push_back(slot);
        for (std::size_t layer : selection.resolve(slot->num_layers)) {
          for (auto seed : spec.seeds) cells.push_back({ti, ei, layer, seed});
        }
      } catch (const std::exception& e) {
        throw std::runtime_error(where + e.what());
      }
    }
  }

  ExperimentOutcome outcome;
  outcome.cells_total = cells.size();
  std::vector<std::optional<std::vector<RunResult>>> done(cells.size());

  fs::path results_path;
  std::ofstream appender;
  if (options.output_dir) {
    fs::create_directories(*options.output_dir);
    results_path = *options.output_dir / "results.csv";
    if (fs::exists(results_path)) {
      std::map<std::tuple<std::string, std::string, std::size_t, std::uint64_t>,
               std::vector<RunResult>>
          previous;
      for (auto& r : read_results_csv(results_path)) {
        if (r.experiment != spec.name) continue;
        previous[{r.task, r.encoder, r.layer, r.seed}].push_back(std::move(r));
      }
      for (std::size_t i = 0; i < cells.size(); ++i) {
        const auto& c = cells[i];
        auto it = previous.find({spec.tasks[c.task].label,
                                 spec.encoders[c.encoder].label, c.layer, c.seed});
        if (it == previous.end()) continue;
        std::vector<RunResult> ordered;
        for (const auto& m : metrics) {
          auto hit = std::find_if(it->second.begin(), it->second.end(),
                                  [&](const RunResult& r) { return r.metric == m; });
          if (hit == it->second.end()) break;
          ordered.push_back(*hit);
        }
        if (ordered.size() == metrics.size()) {
          done[i] = std::move(ordered);
          ++outcome.cells_skipped;
        }
      }
      appender.open(results_path, std::ios::app);
    } else {
      appender.open(results_path, std::ios::trunc);
      appender << kResultsCsvHeader << '\n';
    }
    if (!appender) throw std::runtime_error("cannot write " + results_path.string());
    appender.flush();
  }

  std::mutex mutex;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      if (done[i]) continue;
      const auto& c = cells[i];
      const auto& task = spec.tasks[c.task].label;
      const auto& enc = spec.encoders[c.encoder].label;
      try {
        auto cell = run_cell(spec, *datasets[c.task][c.encoder], task, enc, c.layer, c.seed);
        std::lock_guard lock(mutex);
        if (options.output_dir) {
          const fs::path dir = *options.output_dir / "cells" / sanitize(task) / sanitize(enc);
          fs::create_directories(dir);
          write_text_atomic(dir / ("layer" + std::to_string(c.layer) + "_seed" +
                                   std::to_string(c.seed) + ".json"),
                            cell.report.dump(2) + "\n");
          for (const auto& r : cell.results) appender << format_results_csv_row(r) << '\n';
          appender.flush();
        }
        done[i] = std::move(cell.results);
      } catch (const std::exception& e) {
        std::lock_guard lock(mutex);
        outcome.failures.push_back({task, enc, c.layer, c.seed, e.what()});
      }
    }
  };

  std::size_t workers = options.workers;
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, std::max<std::size_t>(cells.size(), 1));
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
  }
  appender.close();

  for (auto& d : done) {
    if (!d) continue;
    for (auto& r : *d) outcome.results.push_back(std::move(r));
  }
  outcome.aggregates = aggregate_results(outcome.results);

  if (options.output_dir) {
    std::ostringstream csv;
    write_results_csv(csv, outcome.results);
    write_text_atomic(results_path, csv.str());
    write_text_atomic(*options.output_dir / "aggregates.json",
                      aggregates_to_json(spec.name, outcome.aggregates).dump(2) + "\n");
  }
  return outcome;
}

std::vector<SizeGain> compare_encoders(const std::vector<AggregateResult>& aggregates,
                                       const std::vector<EncoderGroup>& ordering) {
  if (ordering.size() < 2) {
    throw std::invalid_argument("need at least two encoders to compare");
  }
  // Highest probed layer per (task, encoder).
  std::map<std::pair<std::string, std::string>, const AggregateResult*> top;
  for (const auto& a : aggregates) {
    if (a.metric != kMetricF1Macro) continue;
    auto& slot = top[{a.task, a.encoder}];
    if (!slot || a.layer > slot->layer) slot = &a;
  }
  std::vector<SizeScores> sizes;
  for (const auto& group : ordering) {
    SizeScores s{group.label, {}};
    for (const auto& enc : group.encoders) {
      bool found = false;
      for (const auto& [key, agg] : top) {
        if (key.second != enc) continue;
        s.task_scores[key.first].push_back(100.0 * agg->mean);
        found = true;
      }
      if (!found) throw std::invalid_argument("encoder '" + enc + "' has no F1 results");
    }
    sizes.push_back(std::move(s));
  }
  return gain_table(sizes);
}

std::vector<SizeGain> compare_encoders(const std::vector<AggregateResult>& aggregates,
                                       const std::vector<std::string>& ordering) {
  std::vector<EncoderGroup> groups;
  for (const auto& e : ordering) groups.push_back({e, {e}});
  return compare_encoders(aggregates, groups);
}

}  // namespace socioprobe
