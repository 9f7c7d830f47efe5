#pragma once

// Result files: per-run CSV, aggregate JSON and SVG charts.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "socioprobe/runner.hpp"

namespace socioprobe {

inline constexpr const char* kResultsCsvHeader =
    "experiment,task,encoder,layer,seed,metric,value";

/// Values are written in shortest round-trip form, so reading a written
/// file gives back identical doubles.
void write_results_csv(std::ostream& out, const std::vector<RunResult>& results);
void write_results_csv(const std::filesystem::path& path,
                       const std::vector<RunResult>& results);
std::string format_results_csv_row(const RunResult& result);
std::vector<RunResult> read_results_csv(std::istream& in);
std::vector<RunResult> read_results_csv(const std::filesystem::path& path);

nlohmann::json aggregates_to_json(const std::string& experiment,
                                  const std::vector<AggregateResult>& aggregates);
std::vector<AggregateResult> aggregates_from_json(const nlohmann::json& j);
void write_aggregates_json(const std::filesystem::path& path,
                           const std::string& experiment,
                           const std::vector<AggregateResult>& aggregates);

struct Point {
  double x = 0.0;
  double y = 0.0;
};

/// Linear map from data space onto the plot area, y growing downward.
struct ChartFrame {
  double width = 640.0;
  double height = 400.0;
  double left = 64.0;
  double right = 24.0;
  double top = 40.0;
  double bottom = 56.0;
  double x_min = 0.0;
  double x_max = 1.0;
  double y_min = 0.0;
  double y_max = 1.0;

  double px(double x) const;
  double py(double y) const;
  double data_y(double pixel_y) const;
};

struct LayerSeries {
  std::string encoder;
  std::vector<std::size_t> layers;
  std::vector<Point> line;   // mean at each layer
  std::vector<Point> upper;  // mean + std
  std::vector<Point> lower;  // mean - std
};

struct LayerChart {
  std::string task;
  std::string metric;
  ChartFrame frame;
  std::vector<LayerSeries> series;
};

/// Geometry of a per-task line chart over layers for one metric.
LayerChart layer_chart(const std::vector<AggregateResult>& aggregates,
                       const std::string& task, const std::string& metric);
std::string render_svg(const LayerChart& chart);

/// Grouped bars (one group per task, one bar per encoder) with +-1 std
/// whiskers, using each (task, encoder)'s highest layer.
std::string render_overview_svg(const std::vector<AggregateResult>& aggregates,
                                const std::string& metric);

enum class ReportFormat { kCsv, kJson, kSvg };
ReportFormat parse_report_format(std::string_view name);

/// Writes results.csv, aggregates.json, or the SVG set (overview_<metric>.svg,
/// plus layers_<task>_<metric>.svg wherever more than one layer was probed)
/// into `dir`. Returns the files written.
std::vector<std::filesystem::path> emit_report(const std::string& experiment,
                                               const std::vector<RunResult>& results,
                                               ReportFormat format,
                                               const std::filesystem::path& dir);

}  // namespace socioprobe
