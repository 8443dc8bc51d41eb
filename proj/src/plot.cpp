#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "dscat/io.hpp"

namespace dscat {

namespace {

constexpr double kMarginLeft = 72.0;
constexpr double kMarginRight = 20.0;
constexpr double kMarginTop = 36.0;
constexpr double kMarginBottom = 52.0;

constexpr std::array<const char*, 10> kPalette = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                                  "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string num(double v) {
  std::array<char, 32> buf{};
  std::snprintf(buf.data(), buf.size(), "%.6g", v);
  return buf.data();
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void add(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  bool empty() const { return !(hi >= lo); }
};

/// Maps data coordinates to the SVG canvas; log axes work in log10 space.
struct Frame {
  double x_lo = 0.0, x_hi = 1.0, y_lo = 0.0, y_hi = 1.0;
  bool log = false;
  double width = 640.0, height = 480.0;

  double tx(double v) const { return log ? std::log10(v) : v; }
  double ty(double v) const { return log ? std::log10(v) : v; }
  double px(double v) const {
    return kMarginLeft + (tx(v) - x_lo) / (x_hi - x_lo) * (width - kMarginLeft - kMarginRight);
  }
  double py(double v) const {
    return height - kMarginBottom - (ty(v) - y_lo) / (y_hi - y_lo) * (height - kMarginTop - kMarginBottom);
  }
  bool usable(double x, double y) const {
    return std::isfinite(x) && std::isfinite(y) && (!log || (x > 0.0 && y > 0.0));
  }
};

void settle(double& lo, double& hi, bool pad) {
  if (!(hi >= lo)) {
    lo = 0.0;
    hi = 1.0;
    return;
  }
  if (hi == lo) {
    lo -= 0.5;
    hi += 0.5;
    return;
  }
  if (pad) {
    const double d = 0.04 * (hi - lo);
    lo -= d;
    hi += d;
  }
}

std::vector<double> linear_ticks(double lo, double hi) {
  const double raw = (hi - lo) / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    step = m * mag;
    if (step >= raw) break;
  }
  std::vector<double> out;
  for (double t = std::ceil(lo / step) * step; t <= hi + 1e-9 * step; t += step) out.push_back(std::abs(t) < 1e-12 * step ? 0.0 : t);
  return out;
}

class Canvas {
 public:
  explicit Canvas(const PlotSpec& spec) : spec_(spec) {
    out_ << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(spec.width) << "\" height=\""
         << num(spec.height) << "\" viewBox=\"0 0 " << num(spec.width) << ' ' << num(spec.height) << "\">\n";
    out_ << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  }

  void axes(const Frame& f) {
    const double x0 = kMarginLeft, x1 = spec_.width - kMarginRight;
    const double y0 = spec_.height - kMarginBottom, y1 = kMarginTop;
    out_ << "<g font-family=\"sans-serif\" font-size=\"11\" fill=\"black\">\n";
    out_ << "<rect x=\"" << num(x0) << "\" y=\"" << num(y1) << "\" width=\"" << num(x1 - x0) << "\" height=\""
         << num(y0 - y1) << "\" fill=\"none\" stroke=\"black\"/>\n";
    auto tick_label = [&](double t) { return f.log ? "1e" + num(t) : num(t); };
    for (double t : ticks(f.x_lo, f.x_hi, f.log)) {
      const double px = x0 + (t - f.x_lo) / (f.x_hi - f.x_lo) * (x1 - x0);
      out_ << "<line x1=\"" << num(px) << "\" y1=\"" << num(y0) << "\" x2=\"" << num(px) << "\" y2=\""
           << num(y0 + 5) << "\" stroke=\"black\"/>\n";
      out_ << "<text x=\"" << num(px) << "\" y=\"" << num(y0 + 17) << "\" text-anchor=\"middle\">"
           << tick_label(t) << "</text>\n";
    }
    for (double t : ticks(f.y_lo, f.y_hi, f.log)) {
      const double py = y0 - (t - f.y_lo) / (f.y_hi - f.y_lo) * (y0 - y1);
      out_ << "<line x1=\"" << num(x0 - 5) << "\" y1=\"" << num(py) << "\" x2=\"" << num(x0) << "\" y2=\""
           << num(py) << "\" stroke=\"black\"/>\n";
      out_ << "<text x=\"" << num(x0 - 8) << "\" y=\"" << num(py + 4) << "\" text-anchor=\"end\">" << tick_label(t)
           << "</text>\n";
    }
    out_ << "<text x=\"" << num((x0 + x1) / 2) << "\" y=\"" << num(spec_.height - 12)
         << "\" text-anchor=\"middle\" font-size=\"13\">" << xml_escape(spec_.x_label) << "</text>\n";
    out_ << "<text transform=\"translate(16," << num((y0 + y1) / 2)
         << ") rotate(-90)\" text-anchor=\"middle\" font-size=\"13\">" << xml_escape(spec_.y_label) << "</text>\n";
    if (!spec_.title.empty())
      out_ << "<text x=\"" << num((x0 + x1) / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
           << xml_escape(spec_.title) << "</text>\n";
    out_ << "</g>\n";
    out_ << "<clipPath id=\"plot-area\"><rect x=\"" << num(x0) << "\" y=\"" << num(y1) << "\" width=\""
         << num(x1 - x0) << "\" height=\"" << num(y0 - y1) << "\"/></clipPath>\n";
  }

  std::ostringstream& body() { return out_; }

  std::string finish() {
    out_ << "</svg>\n";
    return out_.str();
  }

 private:
  static std::vector<double> ticks(double lo, double hi, bool log) {
    if (!log) return linear_ticks(lo, hi);
    std::vector<double> out;
    for (double t = std::ceil(lo); t <= hi; t += 1.0) out.push_back(t);
    if (out.size() < 2) return linear_ticks(lo, hi);
    return out;
  }

  const PlotSpec& spec_;
  std::ostringstream out_;
};

Frame frame_for(const PlotSpec& spec, const std::vector<double>& xs, const std::vector<double>& ys, bool log,
                const std::vector<double>& extra_y = {}) {
  Frame f;
  f.log = log;
  f.width = spec.width;
  f.height = spec.height;
  Range rx, ry;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!f.usable(xs[i], ys[i])) continue;
    rx.add(f.tx(xs[i]));
    ry.add(f.ty(ys[i]));
  }
  for (double y : extra_y)
    if (!log || y > 0.0) ry.add(f.ty(y));
  f.x_lo = rx.lo;
  f.x_hi = rx.hi;
  f.y_lo = ry.lo;
  f.y_hi = ry.hi;
  settle(f.x_lo, f.x_hi, true);
  settle(f.y_lo, f.y_hi, true);
  return f;
}

void points(std::ostringstream& out, const Frame& f, const std::vector<double>& xs, const std::vector<double>& ys,
            const char* color, double r) {
  out << "<g clip-path=\"url(#plot-area)\" fill=\"" << color << "\">\n";
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!f.usable(xs[i], ys[i])) continue;
    out << "<circle cx=\"" << num(f.px(xs[i])) << "\" cy=\"" << num(f.py(ys[i])) << "\" r=\"" << num(r) << "\"/>\n";
  }
  out << "</g>\n";
}

void reference_lines(std::ostringstream& out, const PlotSpec& spec, const Frame& f) {
  for (double y : spec.reference_y) {
    if (f.log && y <= 0.0) continue;
    out << "<line x1=\"" << num(kMarginLeft) << "\" y1=\"" << num(f.py(y)) << "\" x2=\""
        << num(spec.width - kMarginRight) << "\" y2=\"" << num(f.py(y))
        << "\" stroke=\"#555555\" stroke-dasharray=\"6,4\"/>\n";
    out << "<text x=\"" << num(spec.width - kMarginRight - 4) << "\" y=\"" << num(f.py(y) - 4)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\" fill=\"#555555\">y = " << num(y)
        << "</text>\n";
  }
}

std::string render_scatter(const PlotSpec& spec, const CsvData& data) {
  const auto xs = data.column(spec.x_column);
  const auto ys = data.column(spec.y_column);
  const Frame f = frame_for(spec, xs, ys, false, spec.reference_y);
  Canvas c(spec);
  c.axes(f);
  points(c.body(), f, xs, ys, kPalette[0], xs.size() > 5000 ? 0.6 : 1.2);
  reference_lines(c.body(), spec, f);
  return c.finish();
}

std::string render_loglog(const PlotSpec& spec, const CsvData& data) {
  const auto xs = data.column(spec.x_column);
  const auto ys = data.column(spec.y_column);
  const Frame f = frame_for(spec, xs, ys, true, spec.reference_y);
  Canvas c(spec);
  c.axes(f);
  auto& out = c.body();
  out << "<polyline clip-path=\"url(#plot-area)\" fill=\"none\" stroke=\"" << kPalette[0] << "\" points=\"";
  bool first = true;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!f.usable(xs[i], ys[i])) continue;
    out << (first ? "" : " ") << num(f.px(xs[i])) << ',' << num(f.py(ys[i]));
    first = false;
  }
  out << "\"/>\n";
  points(out, f, xs, ys, kPalette[0], 1.5);
  reference_lines(out, spec, f);
  if (spec.fit && spec.fit->lo > 0.0 && spec.fit->hi > spec.fit->lo && spec.fit->amplitude > 0.0) {
    const auto& fit = *spec.fit;
    auto model = [&](double t) { return fit.amplitude * std::pow(t, -fit.z); };
    out << "<line clip-path=\"url(#plot-area)\" x1=\"" << num(f.px(fit.lo)) << "\" y1=\"" << num(f.py(model(fit.lo)))
        << "\" x2=\"" << num(f.px(fit.hi)) << "\" y2=\"" << num(f.py(model(fit.hi)))
        << "\" stroke=\"" << kPalette[3] << "\" stroke-width=\"2\"/>\n";
  }
  if (spec.fit) {
    out << "<text x=\"" << num(spec.width - kMarginRight - 8) << "\" y=\"" << num(kMarginTop + 18)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"13\" fill=\"" << kPalette[3]
        << "\">z = " << num(spec.fit->z) << "</text>\n";
  }
  return c.finish();
}

double cell_size(const std::vector<double>& v) {
  std::set<double> u;
  for (double x : v)
    if (std::isfinite(x)) u.insert(x);
  if (u.size() < 2) return 1.0;
  double best = std::numeric_limits<double>::infinity();
  for (auto it = std::next(u.begin()); it != u.end(); ++it) best = std::min(best, *it - *std::prev(it));
  return best;
}

std::string render_heatmap(const PlotSpec& spec, const CsvData& data) {
  const auto xs = data.column(spec.x_column);
  const auto ys = data.column(spec.y_column);
  const auto vs = data.column(spec.value_column);
  const double dx = cell_size(xs), dy = cell_size(ys);
  Frame f;
  f.width = spec.width;
  f.height = spec.height;
  Range rx, ry;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!f.usable(xs[i], ys[i])) continue;
    rx.add(xs[i] - dx / 2);
    rx.add(xs[i] + dx / 2);
    ry.add(ys[i] - dy / 2);
    ry.add(ys[i] + dy / 2);
  }
  f.x_lo = rx.lo;
  f.x_hi = rx.hi;
  f.y_lo = ry.lo;
  f.y_hi = ry.hi;
  settle(f.x_lo, f.x_hi, false);
  settle(f.y_lo, f.y_hi, false);
  Canvas c(spec);
  auto& out = c.body();
  out << "<g shape-rendering=\"crispEdges\">\n";
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!f.usable(xs[i], ys[i])) continue;
    const double v = vs[i];
    const char* color = "#dddddd";
    if (std::isfinite(v) && v >= 0.0) color = kPalette[static_cast<std::size_t>(std::llround(v)) % kPalette.size()];
    const double x0 = f.px(xs[i] - dx / 2), x1 = f.px(xs[i] + dx / 2);
    const double y0 = f.py(ys[i] + dy / 2), y1 = f.py(ys[i] - dy / 2);
    out << "<rect x=\"" << num(x0) << "\" y=\"" << num(y0) << "\" width=\"" << num(x1 - x0) << "\" height=\""
        << num(y1 - y0) << "\" fill=\"" << color << "\"/>\n";
  }
  out << "</g>\n";
  c.axes(f);
  return c.finish();
}

std::string render_overlay(const PlotSpec& spec, const CsvData& data) {
  const auto xs = data.column(spec.x_column);
  const auto ys = data.column(spec.y_column);
  const auto kinds = data.column(spec.value_column);
  const std::vector<double> groups =
      spec.group_column.empty() ? std::vector<double>(xs.size(), 0.0) : data.column(spec.group_column);
  const Frame f = frame_for(spec, xs, ys, false);
  Canvas c(spec);
  c.axes(f);
  std::map<std::pair<double, double>, std::vector<std::size_t>> lines;
  for (std::size_t i = 0; i < xs.size(); ++i)
    if (f.usable(xs[i], ys[i])) lines[{groups[i], kinds[i]}].push_back(i);
  auto& out = c.body();
  for (const auto& [key, idx] : lines) {
    const int kind = std::isfinite(key.second) ? static_cast<int>(key.second) : -1;
    const char* color = kind == 0 ? "black" : kind == 1 ? "#d62728" : "#1f77b4";
    out << "<" << (kind == 2 ? "polygon" : "polyline") << " clip-path=\"url(#plot-area)\" fill=\"none\" stroke=\""
        << color << "\" stroke-width=\"" << (kind == 2 ? "1.5" : "0.8") << "\" points=\"";
    for (std::size_t k = 0; k < idx.size(); ++k)
      out << (k ? " " : "") << num(f.px(xs[idx[k]])) << ',' << num(f.py(ys[idx[k]]));
    out << "\"/>\n";
  }
  return c.finish();
}

}  // namespace

const char* to_string(PlotKind k) {
  switch (k) {
    case PlotKind::ScatterXY: return "scatter_xy";
    case PlotKind::LogLog: return "loglog";
    case PlotKind::GridHeatmap: return "grid_heatmap";
    case PlotKind::ManifoldOverlay: return "manifold_overlay";
  }
  return "?";
}

PlotKind plot_kind_from_string(const std::string& s) {
  for (PlotKind k : {PlotKind::ScatterXY, PlotKind::LogLog, PlotKind::GridHeatmap, PlotKind::ManifoldOverlay})
    if (s == to_string(k)) return k;
  throw ValidationError("unknown plot kind '" + s + "'");
}

std::string render_svg(const PlotSpec& spec, const CsvData& input) {
  CsvData empty;
  if (input.columns.empty() && input.rows.empty()) {
    for (const auto* c : {&spec.x_column, &spec.y_column, &spec.value_column, &spec.group_column})
      if (!c->empty()) empty.columns.push_back(*c);
  }
  const CsvData& data = input.columns.empty() ? empty : input;
  switch (spec.kind) {
    case PlotKind::ScatterXY: return render_scatter(spec, data);
    case PlotKind::LogLog: return render_loglog(spec, data);
    case PlotKind::GridHeatmap: return render_heatmap(spec, data);
    case PlotKind::ManifoldOverlay: return render_overlay(spec, data);
  }
  throw ValidationError("unknown plot kind");
}

void emit_plot(const PlotSpec& spec, const CsvData& data, const std::filesystem::path& out) {
  const std::string svg = render_svg(spec, data);
  std::ofstream f(out, std::ios::binary);
  if (!f) throw Error("cannot write " + out.string());
  f << svg;
}

std::string gnuplot_script(const PlotSpec& spec, const std::filesystem::path& csv,
                           const std::filesystem::path& image) {
  std::ostringstream s;
  s << "set terminal svg size " << num(spec.width) << ',' << num(spec.height) << "\n";
  s << "set output '" << image.string() << "'\n";
  s << "set datafile separator ','\n";
  if (!spec.title.empty()) s << "set title \"" << spec.title << "\"\n";
  s << "set xlabel \"" << spec.x_label << "\"\nset ylabel \"" << spec.y_label << "\"\n";
  const std::string file = "'" + csv.string() + "'";
  const std::string cols = "(column('" + spec.x_column + "')):(column('" + spec.y_column + "'))";
  switch (spec.kind) {
    case PlotKind::ScatterXY: {
      s << "plot " << file << " using " << cols << " with dots notitle";
      for (double y : spec.reference_y) s << ", " << num(y) << " with lines dashtype 2 title 'y = " << num(y) << "'";
      s << "\n";
      break;
    }
    case PlotKind::LogLog:
      s << "set logscale xy\n";
      s << "plot " << file << " using " << cols << " with linespoints notitle";
      if (spec.fit)
        s << ", " << num(spec.fit->amplitude) << "*x**(-" << num(spec.fit->z) << ") title 'z = " << num(spec.fit->z)
          << "'";
      s << "\n";
      break;
    case PlotKind::GridHeatmap:
      s << "plot " << file << " using " << cols << ":(column('" << spec.value_column
        << "')) with image notitle\n";
      break;
    case PlotKind::ManifoldOverlay:
      s << "plot " << file << " using " << cols << ":(column('" << spec.value_column
        << "')) with points pointtype 7 pointsize 0.2 palette notitle\n";
      break;
  }
  return s.str();
}

}  // namespace dscat
