#include "socioprobe/report.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include <fmt/format.h>

namespace socioprobe {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> split_csv_line(const std::string& line, std::size_t line_no) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        fields.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else if (c != '\r') {
      fields.back() += c;
    }
  }
  if (quoted) {
    throw std::runtime_error("unterminated quote on line " + std::to_string(line_no));
  }
  return fields;
}

template <typename T>
T parse_number(const std::string& s, std::size_t line_no) {
  T value{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw std::runtime_error("bad number '" + s + "' on line " + std::to_string(line_no));
  }
  return value;
}

std::string fmt_num(double v) { return fmt::format("{:.4f}", v); }

std::string escape_xml(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

constexpr const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                    "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
                                    "#bcbd22", "#17becf"};

const char* color(std::size_t i) { return kPalette[i % std::size(kPalette)]; }

std::string points_attr(const std::vector<Point>& pts) {
  std::string out;
  for (const auto& p : pts) {
    if (!out.empty()) out += ' ';
    out += fmt_num(p.x) + "," + fmt_num(p.y);
  }
  return out;
}

void padded_range(double lo, double hi, double& out_lo, double& out_hi) {
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double pad = 0.05 * (hi - lo);
  out_lo = lo - pad;
  out_hi = hi + pad;
}

std::string svg_open(const ChartFrame& f, const std::string& title) {
  std::string s = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" "
      "viewBox=\"0 0 {} {}\">\n",
      f.width, f.height, f.width, f.height);
  s += fmt::format("<rect width=\"{}\" height=\"{}\" fill=\"white\"/>\n", f.width, f.height);
  s += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
                   f.width / 2, f.top / 2 + 5, escape_xml(title));
  return s;
}

std::string y_axis(const ChartFrame& f) {
  std::string s = fmt::format(
      "<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"black\"/>\n", f.left,
      f.top, f.height - f.bottom);
  s += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"black\"/>\n",
                   f.left, f.height - f.bottom, f.width - f.right);
  for (int i = 0; i <= 4; ++i) {
    const double v = f.y_min + (f.y_max - f.y_min) * i / 4.0;
    s += fmt::format(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"end\" font-size=\"10\">{:.3g}</text>\n",
        f.left - 4, fmt_num(f.py(v) + 3), v);
  }
  return s;
}

// Highest-layer aggregate per (task, encoder) for one metric.
std::map<std::pair<std::string, std::string>, const AggregateResult*> top_layer(
    const std::vector<AggregateResult>& aggregates, const std::string& metric) {
  std::map<std::pair<std::string, std::string>, const AggregateResult*> top;
  for (const auto& a : aggregates) {
    if (a.metric != metric) continue;
    auto& slot = top[{a.task, a.encoder}];
    if (!slot || a.layer > slot->layer) slot = &a;
  }
  return top;
}

}  // namespace

std::string format_results_csv_row(const RunResult& r) {
  return fmt::format("{},{},{},{},{},{},{}", csv_field(r.experiment), csv_field(r.task),
                     csv_field(r.encoder), r.layer, r.seed, csv_field(r.metric), r.value);
}

void write_results_csv(std::ostream& out, const std::vector<RunResult>& results) {
  out << kResultsCsvHeader << '\n';
  for (const auto& r : results) out << format_results_csv_row(r) << '\n';
}

void write_results_csv(const fs::path& path, const std::vector<RunResult>& results) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_results_csv(out, results);
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::vector<RunResult> read_results_csv(std::istream& in) {
  std::vector<RunResult> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line == kResultsCsvHeader) continue;
    const auto f = split_csv_line(line, line_no);
    if (f.size() != 7) {
      throw std::runtime_error("expected 7 columns on line " + std::to_string(line_no));
    }
    RunResult r;
    r.experiment = f[0];
    r.task = f[1];
    r.encoder = f[2];
    r.layer = parse_number<std::size_t>(f[3], line_no);
    r.seed = parse_number<std::uint64_t>(f[4], line_no);
    r.metric = f[5];
    r.value = parse_number<double>(f[6], line_no);
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<RunResult> read_results_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_results_csv(in);
}

json aggregates_to_json(const std::string& experiment,
                        const std::vector<AggregateResult>& aggregates) {
  json rows = json::array();
  for (const auto& a : aggregates) {
    rows.push_back({{"task", a.task},
                    {"encoder", a.encoder},
                    {"layer", a.layer},
                    {"metric", a.metric},
                    {"mean", a.mean},
                    {"std", a.std},
                    {"n_seeds", a.n_seeds}});
  }
  return {{"experiment", experiment}, {"aggregates", rows}};
}

std::vector<AggregateResult> aggregates_from_json(const json& j) {
  std::vector<AggregateResult> out;
  for (const auto& a : j.at("aggregates")) {
    out.push_back({a.at("task").get<std::string>(), a.at("encoder").get<std::string>(),
                   a.at("layer").get<std::size_t>(), a.at("metric").get<std::string>(),
                   a.at("mean").get<double>(), a.at("std").get<double>(),
                   a.at("n_seeds").get<std::size_t>()});
  }
  return out;
}

void write_aggregates_json(const fs::path& path, const std::string& experiment,
                           const std::vector<AggregateResult>& aggregates) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << aggregates_to_json(experiment, aggregates).dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

double ChartFrame::px(double x) const {
  const double span = x_max - x_min;
  const double t = span > 0 ? (x - x_min) / span : 0.5;
  return left + t * (width - left - right);
}

double ChartFrame::py(double y) const {
  const double t = (y - y_min) / (y_max - y_min);
  return height - bottom - t * (height - top - bottom);
}

double ChartFrame::data_y(double pixel_y) const {
  const double t = (height - bottom - pixel_y) / (height - top - bottom);
  return y_min + t * (y_max - y_min);
}

LayerChart layer_chart(const std::vector<AggregateResult>& aggregates,
                       const std::string& task, const std::string& metric) {
  LayerChart chart{task, metric, {}, {}};
  std::map<std::string, std::vector<const AggregateResult*>> by_encoder;
  std::vector<std::string> encoder_order;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  double layer_lo = lo;
  double layer_hi = hi;
  for (const auto& a : aggregates) {
    if (a.task != task || a.metric != metric) continue;
    auto& v = by_encoder[a.encoder];
    if (v.empty()) encoder_order.push_back(a.encoder);
    v.push_back(&a);
    lo = std::min(lo, a.mean - a.std);
    hi = std::max(hi, a.mean + a.std);
    layer_lo = std::min(layer_lo, static_cast<double>(a.layer));
    layer_hi = std::max(layer_hi, static_cast<double>(a.layer));
  }
  if (encoder_order.empty()) {
    throw std::invalid_argument("no aggregates for task '" + task + "' and metric '" +
                                metric + "'");
  }
  auto& f = chart.frame;
  f.x_min = layer_lo;
  f.x_max = layer_hi;
  padded_range(lo, hi, f.y_min, f.y_max);

  for (const auto& enc : encoder_order) {
    auto rows = by_encoder[enc];
    std::sort(rows.begin(), rows.end(),
              [](const auto* a, const auto* b) { return a->layer < b->layer; });
    LayerSeries s;
    s.encoder = enc;
    for (const auto* a : rows) {
      const double x = f.px(static_cast<double>(a->layer));
      s.layers.push_back(a->layer);
      s.line.push_back({x, f.py(a->mean)});
      s.upper.push_back({x, f.py(a->mean + a->std)});
      s.lower.push_back({x, f.py(a->mean - a->std)});
    }
    chart.series.push_back(std::move(s));
  }
  return chart;
}

std::string render_svg(const LayerChart& chart) {
  const auto& f = chart.frame;
  std::string s = svg_open(f, chart.task + " - " + chart.metric + " by layer");
  s += y_axis(f);
  std::set<std::size_t> layers;
  for (const auto& series : chart.series) layers.insert(series.layers.begin(), series.layers.end());
  for (std::size_t l : layers) {
    s += fmt::format(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"10\">{}</text>\n",
        fmt_num(f.px(static_cast<double>(l))), f.height - f.bottom + 14, l);
  }
  s += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"11\">layer</text>\n",
                   (f.left + f.width - f.right) / 2, f.height - f.bottom + 32);
  for (std::size_t i = 0; i < chart.series.size(); ++i) {
    const auto& series = chart.series[i];
    std::vector<Point> band = series.upper;
    band.insert(band.end(), series.lower.rbegin(), series.lower.rend());
    s += fmt::format(
        "<polygon class=\"band\" data-encoder=\"{}\" points=\"{}\" fill=\"{}\" "
        "fill-opacity=\"0.2\" stroke=\"none\"/>\n",
        escape_xml(series.encoder), points_attr(band), color(i));
    s += fmt::format(
        "<polyline class=\"mean\" data-encoder=\"{}\" points=\"{}\" fill=\"none\" "
        "stroke=\"{}\" stroke-width=\"2\"/>\n",
        escape_xml(series.encoder), points_attr(series.line), color(i));
    s += fmt::format(
        "<text x=\"{}\" y=\"{}\" font-size=\"10\" fill=\"{}\">{}</text>\n",
        f.left + 8, f.top + 12 + 12 * static_cast<double>(i), color(i),
        escape_xml(series.encoder));
  }
  s += "</svg>\n";
  return s;
}

std::string render_overview_svg(const std::vector<AggregateResult>& aggregates,
                                const std::string& metric) {
  const auto top = top_layer(aggregates, metric);
  if (top.empty()) throw std::invalid_argument("no aggregates for metric " + metric);
  std::vector<std::string> tasks;
  std::vector<std::string> encoders;
  for (const auto& a : aggregates) {
    if (a.metric != metric) continue;
    if (std::find(tasks.begin(), tasks.end(), a.task) == tasks.end()) tasks.push_back(a.task);
    if (std::find(encoders.begin(), encoders.end(), a.encoder) == encoders.end()) {
      encoders.push_back(a.encoder);
    }
  }
  ChartFrame f;
  f.width = std::max(640.0, 80.0 + 40.0 * static_cast<double>(tasks.size() * encoders.size()));
  double hi = 0.0;
  for (const auto& [key, a] : top) hi = std::max(hi, a->mean + a->std);
  padded_range(0.0, hi, f.y_min, f.y_max);
  f.y_min = 0.0;
  f.x_min = 0.0;
  f.x_max = static_cast<double>(tasks.size());

  std::string s = svg_open(f, metric + " by task");
  s += y_axis(f);
  const double group_w = (f.width - f.left - f.right) / static_cast<double>(tasks.size());
  const double bar_w = 0.8 * group_w / static_cast<double>(encoders.size());
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    const double gx = f.left + group_w * static_cast<double>(t) + 0.1 * group_w;
    s += fmt::format(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"10\">{}</text>\n",
        fmt_num(gx + 0.4 * group_w), f.height - f.bottom + 14, escape_xml(tasks[t]));
    for (std::size_t e = 0; e < encoders.size(); ++e) {
      auto it = top.find({tasks[t], encoders[e]});
      if (it == top.end()) continue;
      const auto* a = it->second;
      const double x = gx + bar_w * static_cast<double>(e);
      const double y = f.py(a->mean);
      s += fmt::format(
          "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\" "
          "data-encoder=\"{}\"/>\n",
          fmt_num(x), fmt_num(y), fmt_num(bar_w * 0.9), fmt_num(f.py(0.0) - y), color(e),
          escape_xml(encoders[e]));
      const double cx = x + bar_w * 0.45;
      s += fmt::format(
          "<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"black\"/>\n",
          fmt_num(cx), fmt_num(f.py(a->mean + a->std)), fmt_num(f.py(a->mean - a->std)));
    }
  }
  for (std::size_t e = 0; e < encoders.size(); ++e) {
    s += fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"10\" fill=\"{}\">{}</text>\n",
                     f.width - f.right - 120, f.top + 12 + 12 * static_cast<double>(e),
                     color(e), escape_xml(encoders[e]));
  }
  s += "</svg>\n";
  return s;
}

ReportFormat parse_report_format(std::string_view name) {
  if (name == "csv") return ReportFormat::kCsv;
  if (name == "json") return ReportFormat::kJson;
  if (name == "svg") return ReportFormat::kSvg;
  throw std::invalid_argument("unknown report format '" + std::string(name) + "'");
}

namespace {
void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::string file_safe(std::string s) {
  for (char& c : s) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_' && c != '.') {
      c = '_';
    }
  }
  return s;
}
}  // namespace

std::vector<fs::path> emit_report(const std::string& experiment,
                                  const std::vector<RunResult>& results,
                                  ReportFormat format, const fs::path& dir) {
  if (results.empty()) throw std::invalid_argument("no results to report");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create " + dir.string() + ": " + ec.message());

  std::vector<fs::path> written;
  switch (format) {
    case ReportFormat::kCsv:
      written.push_back(dir / "results.csv");
      write_results_csv(written.back(), results);
      break;
    case ReportFormat::kJson:
      written.push_back(dir / "aggregates.json");
      write_aggregates_json(written.back(), experiment, aggregate_results(results));
      break;
    case ReportFormat::kSvg: {
      const auto aggregates = aggregate_results(results);
      std::vector<std::string> metrics;
      std::vector<std::string> tasks;
      std::map<std::pair<std::string, std::string>, std::set<std::size_t>> layers;
      for (const auto& a : aggregates) {
        if (std::find(metrics.begin(), metrics.end(), a.metric) == metrics.end()) {
          metrics.push_back(a.metric);
        }
        if (std::find(tasks.begin(), tasks.end(), a.task) == tasks.end()) {
          tasks.push_back(a.task);
        }
        layers[{a.task, a.metric}].insert(a.layer);
      }
      for (const auto& m : metrics) {
        written.push_back(dir / ("overview_" + file_safe(m) + ".svg"));
        write_file(written.back(), render_overview_svg(aggregates, m));
        for (const auto& t : tasks) {
          auto it = layers.find({t, m});
          if (it == layers.end() || it->second.size() < 2) continue;
          written.push_back(dir / ("layers_" + file_safe(t) + "_" + file_safe(m) + ".svg"));
          write_file(written.back(), render_svg(layer_chart(aggregates, t, m)));
        }
      }
      break;
    }
  }
  return written;
}

}  // namespace socioprobe
