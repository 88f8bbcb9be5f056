// Declarative, renderer-independent chart descriptions.
//
// JSON layout (schema "tracebench.plotspec/1"):
//   {"schema", "kind", "title", "x": {"label", "scale"}, "y": {"label", "scale"},
//    "series": [{"name", "role", "style", "x": [...], "y": [...]}], "meta": {...}}
// role is data | fit | reference; style is points | line | bars | steps. For
// bars, x holds the bin edges (one more than y).
#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace tracebench {

inline constexpr const char* kPlotSpecSchema = "tracebench.plotspec/1";

enum class PlotKind : std::uint8_t { density_fit, cdf_fit, qq, pp, ecdf, log_histogram, spline_cdf, timeseries, regression };
enum class AxisScale : std::uint8_t { linear, log };

std::string_view to_string(PlotKind k);
PlotKind plot_kind_from_string(std::string_view s);

struct PlotSeries {
  std::string name;
  std::string role = "data";
  std::string style = "points";
  std::vector<double> x;
  std::vector<double> y;
};

struct PlotSpec {
  PlotKind kind = PlotKind::timeseries;
  std::string title;
  std::string x_label;
  std::string y_label;
  AxisScale x_scale = AxisScale::linear;
  AxisScale y_scale = AxisScale::linear;
  std::vector<PlotSeries> series;
  nlohmann::json meta = nlohmann::json::object();

  // Throws std::invalid_argument if series lengths are inconsistent.
  void check() const;
};

nlohmann::json to_json(const PlotSpec& p);
PlotSpec plotspec_from_json(const nlohmann::json& j);

// Standalone SVG document. Log axes skip nonpositive coordinates.
std::string render_svg(const PlotSpec& p, int width = 640, int height = 420);

}  // namespace tracebench
