#include "tracebench/plotspec.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "tracebench/value.hpp"

namespace tracebench {

namespace {

constexpr std::pair<PlotKind, std::string_view> kKinds[] = {
    {PlotKind::density_fit, "density_fit"},     {PlotKind::cdf_fit, "cdf_fit"},   {PlotKind::qq, "qq"},
    {PlotKind::pp, "pp"},                       {PlotKind::ecdf, "ecdf"},         {PlotKind::log_histogram, "log_histogram"},
    {PlotKind::spline_cdf, "spline_cdf"},       {PlotKind::timeseries, "timeseries"}, {PlotKind::regression, "regression"},
};

std::string_view scale_name(AxisScale s) { return s == AxisScale::log ? "log" : "linear"; }

AxisScale scale_from(const std::string& s) {
  if (s == "log") return AxisScale::log;
  if (s == "linear") return AxisScale::linear;
  throw std::invalid_argument("unknown axis scale '" + s + "'");
}

std::string esc(std::string_view s) {
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

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

struct Axis {
  AxisScale scale;
  double lo = 0, hi = 1;

  bool usable(double v) const { return std::isfinite(v) && (scale == AxisScale::linear || v > 0); }
  double t(double v) const { return scale == AxisScale::log ? std::log10(v) : v; }
  void fit(const std::vector<double>& values, bool& any) {
    for (double v : values) {
      if (!usable(v)) continue;
      const double tv = t(v);
      if (!any) {
        lo = hi = tv;
        any = true;
      }
      lo = std::min(lo, tv);
      hi = std::max(hi, tv);
    }
  }
  void pad() {
    if (hi - lo < 1e-12) {
      lo -= 0.5;
      hi += 0.5;
    }
  }
};

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

}  // namespace

std::string_view to_string(PlotKind k) {
  for (auto [kind, name] : kKinds) {
    if (kind == k) return name;
  }
  return "?";
}

PlotKind plot_kind_from_string(std::string_view s) {
  for (auto [kind, name] : kKinds) {
    if (name == s) return kind;
  }
  throw std::invalid_argument("unknown plot kind '" + std::string(s) + "'");
}

void PlotSpec::check() const {
  for (const auto& s : series) {
    const bool bars = s.style == "bars";
    if (bars ? (s.x.size() != s.y.size() + 1 && !(s.x.empty() && s.y.empty())) : s.x.size() != s.y.size()) {
      throw std::invalid_argument("series '" + s.name + "' has " + std::to_string(s.x.size()) + " x and " +
                                  std::to_string(s.y.size()) + " y values");
    }
  }
}

nlohmann::json to_json(const PlotSpec& p) {
  nlohmann::json series = nlohmann::json::array();
  for (const auto& s : p.series) {
    series.push_back({{"name", s.name}, {"role", s.role}, {"style", s.style}, {"x", s.x}, {"y", s.y}});
  }
  return {{"schema", kPlotSpecSchema},
          {"kind", to_string(p.kind)},
          {"title", p.title},
          {"x", {{"label", p.x_label}, {"scale", scale_name(p.x_scale)}}},
          {"y", {{"label", p.y_label}, {"scale", scale_name(p.y_scale)}}},
          {"series", series},
          {"meta", p.meta}};
}

PlotSpec plotspec_from_json(const nlohmann::json& j) {
  if (j.value("schema", "") != kPlotSpecSchema) {
    throw std::invalid_argument("unsupported plot spec schema '" + j.value("schema", "") + "'");
  }
  PlotSpec p;
  try {
    p.kind = plot_kind_from_string(j.at("kind").get<std::string>());
    p.title = j.value("title", "");
    p.x_label = j.at("x").value("label", "");
    p.y_label = j.at("y").value("label", "");
    p.x_scale = scale_from(j.at("x").value("scale", "linear"));
    p.y_scale = scale_from(j.at("y").value("scale", "linear"));
    for (const auto& s : j.at("series")) {
      p.series.push_back({s.value("name", ""), s.value("role", "data"), s.value("style", "points"),
                          s.at("x").get<std::vector<double>>(), s.at("y").get<std::vector<double>>()});
    }
    if (j.contains("meta")) p.meta = j.at("meta");
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("bad plot spec: ") + e.what());
  }
  p.check();
  return p;
}

std::string render_svg(const PlotSpec& p, int width, int height) {
  const double ml = 64, mr = 16, mt = 32, mb = 48;
  const double pw = width - ml - mr, ph = height - mt - mb;
  Axis ax{p.x_scale}, ay{p.y_scale};
  bool anyx = false, anyy = false;
  for (const auto& s : p.series) {
    ax.fit(s.x, anyx);
    ay.fit(s.y, anyy);
    if (s.style == "bars" && p.y_scale == AxisScale::linear) ay.fit({0.0}, anyy);
  }
  ax.pad();
  ay.pad();
  const auto X = [&](double v) { return ml + (ax.t(v) - ax.lo) / (ax.hi - ax.lo) * pw; };
  const auto Y = [&](double v) { return mt + ph - (ay.t(v) - ay.lo) / (ay.hi - ay.lo) * ph; };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
    << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << width / 2 << "\" y=\"18\" text-anchor=\"middle\" font-size=\"13\">" << esc(p.title) << "</text>\n";
  o << "<rect x=\"" << num(ml) << "\" y=\"" << num(mt) << "\" width=\"" << num(pw) << "\" height=\"" << num(ph)
    << "\" fill=\"none\" stroke=\"#444\"/>\n";

  if (!anyx && !anyy) {
    o << "<text x=\"" << width / 2 << "\" y=\"" << height / 2 << "\" text-anchor=\"middle\">no data</text>\n</svg>\n";
    return o.str();
  }

  // Ticks: five per axis, at transformed-space positions.
  for (int k = 0; k <= 4; ++k) {
    const double tx = ax.lo + (ax.hi - ax.lo) * k / 4, ty = ay.lo + (ay.hi - ay.lo) * k / 4;
    const double vx = ax.scale == AxisScale::log ? std::pow(10, tx) : tx;
    const double vy = ay.scale == AxisScale::log ? std::pow(10, ty) : ty;
    const double px = ml + pw * k / 4, py = mt + ph - ph * k / 4;
    o << "<line x1=\"" << num(px) << "\" y1=\"" << num(mt + ph) << "\" x2=\"" << num(px) << "\" y2=\"" << num(mt + ph + 4)
      << "\" stroke=\"#444\"/><text x=\"" << num(px) << "\" y=\"" << num(mt + ph + 16) << "\" text-anchor=\"middle\">"
      << tick_label(vx) << "</text>\n";
    o << "<line x1=\"" << num(ml - 4) << "\" y1=\"" << num(py) << "\" x2=\"" << num(ml) << "\" y2=\"" << num(py)
      << "\" stroke=\"#444\"/><text x=\"" << num(ml - 6) << "\" y=\"" << num(py + 4) << "\" text-anchor=\"end\">"
      << tick_label(vy) << "</text>\n";
  }
  o << "<text x=\"" << num(ml + pw / 2) << "\" y=\"" << height - 8 << "\" text-anchor=\"middle\">" << esc(p.x_label)
    << (p.x_scale == AxisScale::log ? " (log)" : "") << "</text>\n";
  o << "<text x=\"14\" y=\"" << num(mt + ph / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 14 "
    << num(mt + ph / 2) << ")\">" << esc(p.y_label) << (p.y_scale == AxisScale::log ? " (log)" : "") << "</text>\n";

  std::size_t color = 0;
  for (const auto& s : p.series) {
    const char* c = s.role == "reference" ? "#888" : kPalette[color++ % std::size(kPalette)];
    if (s.style == "bars") {
      const double base = ay.scale == AxisScale::log ? ay.hi : 0;  // log bars hang from the bottom edge
      for (std::size_t i = 0; i < s.y.size(); ++i) {
        if (!ax.usable(s.x[i]) || !ax.usable(s.x[i + 1]) || !ay.usable(s.y[i])) continue;
        const double x0 = X(s.x[i]), x1 = X(s.x[i + 1]), y1 = Y(s.y[i]);
        const double y0 = ay.scale == AxisScale::log ? mt + ph : Y(base);
        o << "<rect x=\"" << num(x0) << "\" y=\"" << num(std::min(y0, y1)) << "\" width=\"" << num(std::max(x1 - x0, 0.5))
          << "\" height=\"" << num(std::fabs(y0 - y1)) << "\" fill=\"" << c << "\" fill-opacity=\"0.5\" stroke=\"" << c
          << "\"/>\n";
      }
    } else if (s.style == "points") {
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        if (!ax.usable(s.x[i]) || !ay.usable(s.y[i])) continue;
        o << "<circle cx=\"" << num(X(s.x[i])) << "\" cy=\"" << num(Y(s.y[i])) << "\" r=\"2.5\" fill=\"none\" stroke=\"" << c
          << "\"/>\n";
      }
    } else {
      o << "<polyline fill=\"none\" stroke=\"" << c << "\" stroke-width=\"1.5\""
        << (s.role == "reference" ? " stroke-dasharray=\"4 3\"" : "") << " points=\"";
      double prev_y = 0;
      bool first = true;
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        if (!ax.usable(s.x[i]) || !ay.usable(s.y[i])) continue;
        if (s.style == "steps" && !first) o << num(X(s.x[i])) << "," << num(prev_y) << " ";
        prev_y = Y(s.y[i]);
        o << num(X(s.x[i])) << "," << num(prev_y) << " ";
        first = false;
      }
      o << "\"/>\n";
    }
  }
  // Legend.
  color = 0;
  double ly = mt + 12;
  for (const auto& s : p.series) {
    const char* c = s.role == "reference" ? "#888" : kPalette[color++ % std::size(kPalette)];
    if (s.name.empty()) continue;
    o << "<rect x=\"" << num(ml + pw - 120) << "\" y=\"" << num(ly - 8) << "\" width=\"10\" height=\"10\" fill=\"" << c
      << "\"/><text x=\"" << num(ml + pw - 106) << "\" y=\"" << num(ly) << "\">" << esc(s.name) << "</text>\n";
    ly += 14;
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace tracebench
