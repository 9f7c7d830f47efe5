// socioprobe: command-line front end for probing experiments, MDL, cost
// tables, synthetic data and SPEB validation.
//
// Exit codes: 0 success, 1 one or more experiment cells failed, 2 usage or
// input error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "socioprobe/costmodel.hpp"
#include "socioprobe/embstore.hpp"
#include "socioprobe/report.hpp"
#include "socioprobe/runner.hpp"
#include "socioprobe/synth.hpp"

namespace fs = std::filesystem;
using namespace socioprobe;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCellFailed = 1;
constexpr int kExitUsage = 2;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

fs::path default_results_dir() {
  if (const char* env = std::getenv("SOCIOPROBE_RESULTS_DIR"); env && *env) return env;
  return "results";
}

struct ProbeOptions {
  std::string spec_path;
  std::vector<std::string> data;
  std::vector<std::string> encoders;
  std::string layers;
  std::string seeds;
  std::size_t hidden_dim = 0;
  std::size_t max_epochs = 0;
  std::string name;
  std::string out;
  std::size_t workers = 0;
  bool mdl = false;
};

void add_probe_flags(CLI::App* cmd, ProbeOptions& o, bool layerwise) {
  cmd->add_option("--spec", o.spec_path, "Experiment spec JSON file");
  cmd->add_option("--data", o.data,
                  "SPEB (or .jsonl) file for one task; repeatable. The task label is "
                  "the file stem");
  cmd->add_option("--encoder", o.encoders,
                  "Encoder as LABEL=PATH; PATH may contain {task}. Repeatable");
  cmd->add_option("--layers", o.layers,
                  layerwise ? "Layers to probe: all (default), last, or a list like 1,3,5"
                            : "Layers to probe: last (default), all, or a list like 1,3,5");
  cmd->add_option("--seeds", o.seeds, "Comma-separated probe seeds (default 0,1,2,3,4)");
  cmd->add_option("--hidden-dim", o.hidden_dim, "Probe hidden size (default 256)");
  cmd->add_option("--max-epochs", o.max_epochs, "Probe epoch budget (default 50)");
  cmd->add_option("--name", o.name, "Experiment name written to the results");
  cmd->add_option("--out", o.out,
                  "Results directory (default $SOCIOPROBE_RESULTS_DIR or ./results)");
  cmd->add_option("--workers", o.workers,
                  "Parallel cells (default: available hardware threads)");
  if (layerwise) cmd->add_flag("--mdl", o.mdl, "Use MDL probing instead of classic");
}

ExperimentSpec assemble_spec(const ProbeOptions& o, ProbeMode mode) {
  ExperimentSpec spec;
  if (!o.spec_path.empty()) {
    if (!fs::exists(o.spec_path)) throw UsageError("spec file not found: " + o.spec_path);
    spec = read_experiment_spec(o.spec_path);
  } else {
    spec.encoders.clear();
  }
  spec.mode = mode;
  if (!o.data.empty()) {
    spec.tasks.clear();
    for (const auto& d : o.data) {
      if (!fs::exists(d)) throw UsageError("data file not found: " + d);
      spec.tasks.push_back({fs::path(d).stem().string(), d});
    }
  }
  if (!o.encoders.empty()) {
    spec.encoders.clear();
    for (const auto& e : o.encoders) {
      const auto eq = e.find('=');
      if (eq == std::string::npos || eq == 0) {
        throw UsageError("--encoder expects LABEL=PATH, got '" + e + "'");
      }
      spec.encoders.push_back({e.substr(0, eq), e.substr(eq + 1)});
    }
  }
  if (spec.encoders.empty()) spec.encoders.push_back({"default", ""});
  if (spec.tasks.empty()) throw UsageError("no input: pass --data or --spec");
  if (!o.layers.empty()) spec.layers = LayerSelection::parse(o.layers);
  if (!o.seeds.empty()) {
    spec.seeds.clear();
    for (const auto& s : split_list(o.seeds)) spec.seeds.push_back(std::stoull(s));
  }
  if (o.hidden_dim) spec.probe.hidden_dim = o.hidden_dim;
  if (o.max_epochs) spec.probe.max_epochs = o.max_epochs;
  if (!o.name.empty()) spec.name = o.name;
  try {
    spec.validate();
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
  return spec;
}

int run_probe(const ProbeOptions& o, ProbeMode mode) {
  const ExperimentSpec spec = assemble_spec(o, mode);
  RunOptions options;
  options.workers = o.workers;
  options.output_dir = o.out.empty() ? default_results_dir() : fs::path(o.out);

  ExperimentOutcome outcome;
  try {
    outcome = run_experiment(spec, options);
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }

  std::cout << fmt::format("experiment {}: {} cells ({} reused from results file)\n",
                           spec.name, outcome.cells_total, outcome.cells_skipped);
  std::cout << "task,encoder,layer,metric,mean,std,n_seeds\n";
  for (const auto& a : outcome.aggregates) {
    std::cout << fmt::format("{},{},{},{},{:.6f},{:.6f},{}\n", a.task, a.encoder, a.layer,
                             a.metric, a.mean, a.std, a.n_seeds);
  }
  std::cout << "results written to " << options.output_dir->string() << "\n";
  for (const auto& f : outcome.failures) {
    std::cerr << fmt::format("cell failed: task={} encoder={} layer={} seed={}: {}\n",
                             f.task, f.encoder, f.layer, f.seed, f.message);
  }
  return outcome.ok() ? kExitOk : kExitCellFailed;
}

struct CostOptions {
  std::string tokens = "1M,10M,100M,1B,30B";
  std::string f1_path;
  bool csv = false;
};

/// F1 table: header with at least size,task,f1 columns; one row per checkpoint.
std::vector<SizeScores> read_f1_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open F1 file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw UsageError("empty F1 file: " + path);
  const auto header = split_list(line);
  auto column = [&](const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    throw UsageError("F1 file lacks a '" + name + "' column");
  };
  const auto size_col = column("size");
  const auto task_col = column("task");
  const auto f1_col = column("f1");
  std::vector<SizeScores> sizes;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_list(line);
    if (f.size() != header.size()) throw UsageError("bad F1 row: " + line);
    auto it = std::find_if(sizes.begin(), sizes.end(),
                           [&](const SizeScores& s) { return s.size == f[size_col]; });
    if (it == sizes.end()) {
      sizes.push_back({f[size_col], {}});
      it = sizes.end() - 1;
    }
    it->task_scores[f[task_col]].push_back(std::stod(f[f1_col]));
  }
  return sizes;
}

std::vector<SizeScores> order_sizes(std::vector<SizeScores> sizes, const std::string& order) {
  if (order.empty()) return sizes;
  std::vector<SizeScores> out;
  for (const auto& label : split_list(order)) {
    auto it = std::find_if(sizes.begin(), sizes.end(),
                           [&](const SizeScores& s) { return s.size == label; });
    if (it == sizes.end()) throw UsageError("size '" + label + "' not in F1 file");
    out.push_back(*it);
  }
  return out;
}

int run_cost(const CostOptions& o) {
  std::map<std::string, double> gains;
  if (!o.f1_path.empty()) {
    for (const auto& g : gain_table(order_sizes(read_f1_table(o.f1_path), o.tokens))) {
      gains[g.size] = g.gain;
    }
  }
  if (o.csv) {
    std::cout << "tokens,dollars,co2_lbs,mu_gain\n";
  } else {
    std::cout << fmt::format("{:>8}  {:>12}  {:>12}  {:>8}\n", "# Tokens", "Costs ($)",
                             "CO2 (lbs)", "mu_Gain");
  }
  for (const auto& label : split_list(o.tokens)) {
    const auto est = cost_estimate(parse_token_count(label));
    auto g = gains.find(label);
    std::string gain = g == gains.end() ? "--" : fmt::format("{:+.2f}", g->second);
    if (o.csv) {
      std::cout << fmt::format("{},{:.2f},{:.3f},{}\n", label, est.dollars, est.co2_lbs,
                               g == gains.end() ? "" : gain);
    } else {
      std::cout << fmt::format("{:>8}  {:>12.2f}  {:>12.3f}  {:>8}\n", label, est.dollars,
                               est.co2_lbs, gain);
    }
  }
  return kExitOk;
}

struct GainsOptions {
  std::string f1_path;
  std::string results_path;
  std::string order;
};

int run_gains(const GainsOptions& o) {
  std::vector<SizeGain> gains;
  if (!o.f1_path.empty()) {
    gains = gain_table(order_sizes(read_f1_table(o.f1_path), o.order));
  } else if (!o.results_path.empty()) {
    if (!fs::exists(o.results_path)) throw UsageError("results file not found: " + o.results_path);
    if (o.order.empty()) throw UsageError("--results needs --order");
    // Groups are separated by commas; checkpoints within a group by '+'.
    std::vector<EncoderGroup> groups;
    for (const auto& item : split_list(o.order)) {
      EncoderGroup g;
      const auto eq = item.find('=');
      std::string members = item;
      if (eq != std::string::npos) {
        g.label = item.substr(0, eq);
        members = item.substr(eq + 1);
      }
      std::stringstream ss(members);
      std::string enc;
      while (std::getline(ss, enc, '+')) g.encoders.push_back(enc);
      if (g.label.empty()) g.label = members;
      groups.push_back(std::move(g));
    }
    gains = compare_encoders(aggregate_results(read_results_csv(fs::path(o.results_path))),
                             groups);
  } else {
    throw UsageError("pass --f1 or --results");
  }
  std::cout << "size,gain_pp\n";
  for (const auto& g : gains) std::cout << fmt::format("{},{:+.2f}\n", g.size, g.gain);
  return kExitOk;
}

struct SynthOptions {
  std::size_t n = 2048;
  std::size_t dim = 16;
  std::size_t classes = 2;
  std::string delta = "3";
  double noise_fraction = 0.0;
  std::uint64_t seed = 0;
  std::string out;
};

int run_synth(const SynthOptions& o) {
  SynthSpec spec;
  spec.n = o.n;
  spec.dim = o.dim;
  spec.num_classes = o.classes;
  spec.noise_fraction = o.noise_fraction;
  spec.seed = o.seed;
  spec.layer_deltas.clear();
  for (const auto& d : split_list(o.delta)) spec.layer_deltas.push_back(std::stod(d));
  try {
    spec.validate();
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
  const auto ds = generate(spec);
  if (fs::path(o.out).extension() == ".jsonl") {
    write_dataset_jsonl(ds, o.out);
  } else {
    write_dataset(ds, o.out);
  }
  std::cout << fmt::format("wrote {} records, L={}, d={}, K={} to {}\n", ds.size(),
                           ds.num_layers, ds.dim, ds.schema.num_classes(), o.out);
  return kExitOk;
}

struct ReportOptions {
  std::string results_path;
  std::string out;
  std::string formats = "csv,json,svg";
  std::string experiment;
};

int run_report(const ReportOptions& o) {
  if (!fs::exists(o.results_path)) throw UsageError("results file not found: " + o.results_path);
  const auto results = read_results_csv(fs::path(o.results_path));
  if (results.empty()) throw UsageError("results file is empty: " + o.results_path);
  const std::string experiment = o.experiment.empty() ? results.front().experiment : o.experiment;
  const fs::path out = o.out.empty() ? default_results_dir() : fs::path(o.out);
  for (const auto& f : split_list(o.formats)) {
    for (const auto& p : emit_report(experiment, results, parse_report_format(f), out)) {
      std::cout << p.string() << "\n";
    }
  }
  return kExitOk;
}

int run_validate(const std::string& path) {
  if (!fs::exists(path)) throw UsageError("file not found: " + path);
  EmbeddingDataset ds;
  try {
    ds = read_dataset(path);
    ds.validate();
  } catch (const std::exception& e) {
    std::cerr << "invalid: " << e.what() << "\n";
    return kExitUsage;
  }
  std::vector<std::size_t> counts(ds.schema.num_classes(), 0);
  for (const auto& r : ds.records) ++counts[r.label];
  std::cout << fmt::format("n={}\nL={}\nd={}\nK={}\n", ds.size(), ds.num_layers, ds.dim,
                           ds.schema.num_classes());
  for (std::size_t c = 0; c < counts.size(); ++c) {
    std::cout << fmt::format("label {}: {} ({} records)\n", c, ds.schema.class_names[c],
                             counts[c]);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"socioprobe: probe frozen sentence representations for label knowledge"};
  app.require_subcommand(1);

  ProbeOptions classic_opts;
  auto* classic = app.add_subcommand("probe-classic", "Classifier probing (test F1/accuracy)");
  add_probe_flags(classic, classic_opts, false);

  ProbeOptions mdl_opts;
  auto* mdl = app.add_subcommand("probe-mdl", "MDL online-code probing (codelength in bits)");
  add_probe_flags(mdl, mdl_opts, false);

  ProbeOptions layers_opts;
  auto* layers = app.add_subcommand("probe-layers", "Layer-wise probing over every layer");
  add_probe_flags(layers, layers_opts, true);

  CostOptions cost_opts;
  auto* cost = app.add_subcommand("cost", "Pretraining cost / CO2 table with optional gains");
  cost->add_option("--tokens", cost_opts.tokens, "Comma-separated token budgets (1M,10M,...)");
  cost->add_option("--f1", cost_opts.f1_path,
                   "CSV with size,task,f1 columns (sizes named as in --tokens)");
  cost->add_flag("--csv", cost_opts.csv, "Emit CSV instead of an aligned table");

  GainsOptions gains_opts;
  auto* gains = app.add_subcommand("gains", "Mean F1 gain over the next-smaller size");
  gains->add_option("--f1", gains_opts.f1_path, "CSV with size,task,f1 columns");
  gains->add_option("--results", gains_opts.results_path, "results.csv from a probe run");
  gains->add_option("--order", gains_opts.order,
                    "Ascending size order; with --results each item is ENCODER or "
                    "LABEL=ENC1+ENC2 for several checkpoints");

  SynthOptions synth_opts;
  auto* synth = app.add_subcommand("synth", "Write a synthetic Gaussian SPEB dataset");
  synth->add_option("--n", synth_opts.n, "Number of records (default 2048)");
  synth->add_option("--dim", synth_opts.dim, "Vector dimension (default 16)");
  synth->add_option("--classes", synth_opts.classes, "Number of classes (default 2)");
  synth->add_option("--delta", synth_opts.delta,
                    "Comma-separated class-mean distance per layer (default 3)");
  synth->add_option("--noise-frac", synth_opts.noise_fraction,
                    "Fraction of pure-noise dimensions (default 0)");
  synth->add_option("--seed", synth_opts.seed, "Generator seed (default 0)");
  synth->add_option("--out", synth_opts.out, "Output path (.speb or .jsonl)")->required();

  ReportOptions report_opts;
  auto* report = app.add_subcommand("report", "Re-render persisted results");
  report->add_option("--results", report_opts.results_path, "results.csv to read")->required();
  report->add_option("--out", report_opts.out,
                     "Output directory (default $SOCIOPROBE_RESULTS_DIR or ./results)");
  report->add_option("--format", report_opts.formats, "Any of csv,json,svg (default all)");
  report->add_option("--experiment", report_opts.experiment, "Experiment name for JSON output");

  std::string validate_path;
  auto* validate = app.add_subcommand("validate", "Check an SPEB file and print its shape");
  validate->add_option("path", validate_path, "SPEB or .jsonl file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*classic) return run_probe(classic_opts, ProbeMode::kClassic);
    if (*mdl) return run_probe(mdl_opts, ProbeMode::kMdl);
    if (*layers) {
      return run_probe(layers_opts, layers_opts.mdl ? ProbeMode::kLayerwiseMdl
                                                    : ProbeMode::kLayerwiseClassic);
    }
    if (*cost) return run_cost(cost_opts);
    if (*gains) return run_gains(gains_opts);
    if (*synth) return run_synth(synth_opts);
    if (*report) return run_report(report_opts);
    if (*validate) return run_validate(validate_path);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
