#include "tunelens/svg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "tunelens/csv.hpp"
#include "tunelens/error.hpp"
#include "tunelens/rng.hpp"

namespace tunelens {

namespace {

std::string num(double v) { return csv::fixed(v, 2); }

std::string escape(std::string_view text) {
  std::string out;
  for (char c : text) {
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

struct Rgb {
  double r, g, b;
};

std::string hex(Rgb c) {
  const auto byte = [](double v) {
    return static_cast<int>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
  };
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", byte(c.r), byte(c.g), byte(c.b));
  return buf;
}

Rgb mix(Rgb a, Rgb b, double t) {
  return {a.r + (b.r - a.r) * t, a.g + (b.g - a.g) * t, a.b + (b.b - a.b) * t};
}

// -1 blue, 0 white, +1 red.
std::string diverging(double v) {
  const Rgb blue{0.23, 0.30, 0.75}, white{0.97, 0.97, 0.97}, red{0.71, 0.02, 0.15};
  v = std::clamp(v, -1.0, 1.0);
  return hex(v < 0 ? mix(white, blue, -v) : mix(white, red, v));
}

// 0 dark purple .. 1 yellow.
std::string sequential(double t) {
  static const Rgb stops[] = {{0.27, 0.00, 0.33}, {0.23, 0.32, 0.55}, {0.13, 0.57, 0.55},
                              {0.37, 0.79, 0.38}, {0.99, 0.91, 0.14}};
  t = std::clamp(t, 0.0, 1.0) * 4.0;
  const int i = std::min(3, static_cast<int>(t));
  return hex(mix(stops[i], stops[i + 1], t - i));
}

// Low feature values blue, high red.
std::string low_high(double t) { return hex(mix({0.0, 0.54, 0.90}, {1.0, 0.0, 0.32}, std::clamp(t, 0.0, 1.0))); }

class Canvas {
 public:
  Canvas(int width, int height) : width_(width), height_(height) {}

  void raw(std::string_view s) { body_ += s; }

  void rect(double x, double y, double w, double h, std::string_view fill,
            std::string_view extra = {}) {
    body_ += "<rect x=\"" + num(x) + "\" y=\"" + num(y) + "\" width=\"" + num(w) +
             "\" height=\"" + num(h) + "\" fill=\"" + std::string(fill) + "\"";
    if (!extra.empty()) body_ += " " + std::string(extra);
    body_ += "/>\n";
  }

  void line(double x1, double y1, double x2, double y2, std::string_view stroke,
            double width = 1.0) {
    body_ += "<line x1=\"" + num(x1) + "\" y1=\"" + num(y1) + "\" x2=\"" + num(x2) + "\" y2=\"" +
             num(y2) + "\" stroke=\"" + std::string(stroke) + "\" stroke-width=\"" + num(width) +
             "\"/>\n";
  }

  void circle(double cx, double cy, double r, std::string_view fill) {
    body_ += "<circle cx=\"" + num(cx) + "\" cy=\"" + num(cy) + "\" r=\"" + num(r) +
             "\" fill=\"" + std::string(fill) + "\" fill-opacity=\"0.75\"/>\n";
  }

  void text(double x, double y, std::string_view s, int size = 11,
            std::string_view anchor = "start", std::string_view extra = {}) {
    body_ += "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" font-size=\"" +
             std::to_string(size) + "\" text-anchor=\"" + std::string(anchor) + "\"";
    if (!extra.empty()) body_ += " " + std::string(extra);
    body_ += ">" + escape(s) + "</text>\n";
  }

  void cross(double cx, double cy, double r, std::string_view stroke) {
    line(cx - r, cy - r, cx + r, cy + r, stroke, 2.0);
    line(cx - r, cy + r, cx + r, cy - r, stroke, 2.0);
  }

  std::string finish(std::string_view defs = {}) const {
    std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
                      std::to_string(width_) + "\" height=\"" + std::to_string(height_) +
                      "\" viewBox=\"0 0 " + std::to_string(width_) + " " +
                      std::to_string(height_) + "\" font-family=\"sans-serif\">\n";
    if (!defs.empty()) out += "<defs>\n" + std::string(defs) + "</defs>\n";
    out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out += body_;
    out += "</svg>\n";
    return out;
  }

 private:
  int width_;
  int height_;
  std::string body_;
};

std::pair<double, double> finite_range(const std::vector<double>& v) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (double x : v)
    if (std::isfinite(x)) {
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
  if (!(lo <= hi)) return {0.0, 1.0};
  if (lo == hi) return {lo - 0.5, hi + 0.5};
  return {lo, hi};
}

void axes(Canvas& c, double x0, double y0, double w, double h) {
  c.line(x0, y0 + h, x0 + w, y0 + h, "#333");
  c.line(x0, y0, x0, y0 + h, "#333");
}

}  // namespace

std::string render_histogram_svg(const HistogramStats& h) {
  const int width = 520, height = 340;
  const double x0 = 60, y0 = 40, w = 430, hh = 240;
  Canvas c(width, height);
  c.text(width / 2.0, 22, h.column + "  (n=" + std::to_string(h.n) + ", skew=" + num(h.skew) +
                              ", uniform p=" + csv::fixed(h.uniform_p, 3) + ")",
         13, "middle");
  const auto max_count = std::max<std::size_t>(1, *std::max_element(h.counts.begin(), h.counts.end()));
  const double bw = w / static_cast<double>(h.counts.size());
  for (std::size_t i = 0; i < h.counts.size(); ++i) {
    const double bh = hh * static_cast<double>(h.counts[i]) / static_cast<double>(max_count);
    c.rect(x0 + i * bw + 1, y0 + hh - bh, bw - 2, bh, "#4c72b0");
  }
  axes(c, x0, y0, w, hh);
  c.text(x0, y0 + hh + 16, num(h.edges.front()), 10, "middle");
  c.text(x0 + w / 2, y0 + hh + 16, num(0.5 * (h.edges.front() + h.edges.back())), 10, "middle");
  c.text(x0 + w, y0 + hh + 16, num(h.edges.back()), 10, "middle");
  c.text(x0 - 6, y0 + 4, std::to_string(max_count), 10, "end");
  c.text(x0 - 6, y0 + hh, "0", 10, "end");
  return c.finish();
}

std::string render_matrix_svg(const CorrelationMatrix& m, std::string_view title,
                              const ExtremePairs* marks) {
  const std::size_t p = m.p();
  const double cell = p > 12 ? 32.0 : 44.0;
  const double x0 = 150, y0 = 50;
  const int width = static_cast<int>(x0 + cell * p + 40);
  const int height = static_cast<int>(y0 + cell * p + 130);
  Canvas c(width, height);
  c.text(width / 2.0, 24, title, 13, "middle");
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = 0; j < p; ++j) {
      const double x = x0 + j * cell, y = y0 + i * cell;
      if (m.defined(i, j)) {
        const double r = m.at(i, j);
        c.rect(x, y, cell, cell, diverging(r), "stroke=\"white\"");
        c.text(x + cell / 2, y + cell / 2 + 4, num(r), 10, "middle",
               std::abs(r) > 0.6 ? "fill=\"white\"" : "");
      } else {
        c.rect(x, y, cell, cell, "#bbbbbb", "stroke=\"white\"");
        c.text(x + cell / 2, y + cell / 2 + 4, "n/a", 10, "middle");
      }
    }
    c.text(x0 - 6, y0 + i * cell + cell / 2 + 4, m.columns[i], 10, "end");
    const double lx = x0 + i * cell + cell / 2, ly = y0 + p * cell + 8;
    c.text(lx, ly, m.columns[i], 10, "end",
           "transform=\"rotate(-60 " + num(lx) + " " + num(ly) + ")\"");
  }
  if (marks) {
    const auto mark = [&](const std::vector<CorrelatedPair>& pairs, std::string_view color) {
      for (const auto& pr : pairs) {
        for (auto [i, j] : {std::pair{pr.a, pr.b}, std::pair{pr.b, pr.a}})
          c.cross(x0 + j * cell + cell / 2, y0 + i * cell + cell / 2, cell * 0.3, color);
      }
    };
    mark(marks->positive, "black");
    mark(marks->negative, "white");
  }
  return c.finish();
}

std::string render_surface_svg(const SurfaceGrid& g) {
  const double size = 400;
  const double x0 = 80, y0 = 40;
  const int width = 600, height = 520;
  const double cell = size / g.resolution;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& v : g.cell_mean)
    if (v) {
      lo = std::min(lo, *v);
      hi = std::max(hi, *v);
    }
  if (!(lo < hi)) {
    if (!(lo <= hi)) lo = hi = 0.0;
    lo -= 0.5;
    hi += 0.5;
  }
  Canvas c(width, height);
  c.text(width / 2.0, 22, g.x_param + " vs " + g.y_param + " (mean objective)", 13, "middle");
  for (int iy = 0; iy < g.resolution; ++iy) {
    for (int ix = 0; ix < g.resolution; ++ix) {
      const auto idx = g.cell(ix, iy);
      const double x = x0 + ix * cell;
      const double y = y0 + size - (iy + 1) * cell;  // y grows upward
      if (g.cell_mean[idx])
        c.rect(x, y, cell, cell, sequential((*g.cell_mean[idx] - lo) / (hi - lo)));
      else
        c.rect(x, y, cell, cell, "url(#nodata)", "stroke=\"#dddddd\" stroke-width=\"0.5\"");
    }
  }
  axes(c, x0, y0, size, size);
  c.text(x0, y0 + size + 16, num(g.x_edges.front()), 10, "middle");
  c.text(x0 + size, y0 + size + 16, num(g.x_edges.back()), 10, "middle");
  c.text(x0 + size / 2, y0 + size + 34, g.x_param, 12, "middle");
  c.text(x0 - 6, y0 + size, num(g.y_edges.front()), 10, "end");
  c.text(x0 - 6, y0 + 8, num(g.y_edges.back()), 10, "end");
  c.text(20, y0 + size / 2, g.y_param, 12, "middle",
         "transform=\"rotate(-90 20 " + num(y0 + size / 2) + ")\"");
  // legend
  const double lx = x0 + size + 30;
  for (int i = 0; i < 20; ++i)
    c.rect(lx, y0 + size - (i + 1) * size / 20, 16, size / 20, sequential(i / 19.0));
  c.text(lx + 20, y0 + size, num(lo), 10);
  c.text(lx + 20, y0 + 10, num(hi), 10);
  c.rect(lx, y0 + size + 20, 16, 16, "url(#nodata)", "stroke=\"#999\"");
  c.text(lx + 20, y0 + size + 32, "no data", 10);
  return c.finish(
      "<pattern id=\"nodata\" width=\"6\" height=\"6\" patternUnits=\"userSpaceOnUse\" "
      "patternTransform=\"rotate(45)\"><rect width=\"6\" height=\"6\" fill=\"#f4f4f4\"/>"
      "<line x1=\"0\" y1=\"0\" x2=\"0\" y2=\"6\" stroke=\"#aaaaaa\" stroke-width=\"2\"/></pattern>\n");
}

std::string render_shap_summary_svg(const ShapMatrix& m,
                                    const std::vector<FeatureImportance>& ranking) {
  const double row_h = 34, x0 = 170, w = 420, y0 = 40;
  const int width = 660;
  const int height = static_cast<int>(y0 + row_h * ranking.size() + 60);
  std::vector<double> all;
  for (const auto& r : m.rows) all.insert(all.end(), r.attributions.begin(), r.attributions.end());
  auto [lo, hi] = finite_range(all);
  const double span = std::max(std::abs(lo), std::abs(hi));
  lo = -span;
  hi = span;
  const auto sx = [&](double v) { return x0 + (v - lo) / (hi - lo) * w; };
  Canvas c(width, height);
  c.text(width / 2.0, 22, "SHAP summary (ordered by mean |SHAP|)", 13, "middle");
  c.line(sx(0), y0 - 6, sx(0), y0 + row_h * ranking.size(), "#999");
  for (std::size_t k = 0; k < ranking.size(); ++k) {
    const auto col = ranking[k].index;
    const double cy = y0 + row_h * k + row_h / 2;
    c.text(x0 - 10, cy + 4, ranking[k].column, 11, "end");
    std::vector<double> values(m.n());
    for (std::size_t r = 0; r < m.n(); ++r) values[r] = m.feature_value(r, col);
    const auto [vlo, vhi] = finite_range(values);
    for (std::size_t r = 0; r < m.n(); ++r) {
      // deterministic jitter from the row index
      const double jitter = (static_cast<double>(mix_seed(r * 131 + col) >> 11) * 0x1.0p-53 - 0.5) * row_h * 0.6;
      c.circle(sx(m.rows[r].attributions[col]), cy + jitter, 2.2,
               low_high((values[r] - vlo) / (vhi - vlo)));
    }
  }
  const double ay = y0 + row_h * ranking.size() + 8;
  c.line(x0, ay, x0 + w, ay, "#333");
  c.text(x0, ay + 16, csv::fixed(lo, 3), 10, "middle");
  c.text(sx(0), ay + 16, "0", 10, "middle");
  c.text(x0 + w, ay + 16, csv::fixed(hi, 3), 10, "middle");
  c.text(x0 + w / 2, ay + 34, "SHAP value (impact on objective)", 11, "middle");
  c.text(x0 + w + 20, y0 + 10, "high", 10);
  c.text(x0 + w + 20, y0 + row_h * ranking.size(), "low", 10);
  for (int i = 0; i < 10; ++i)
    c.rect(x0 + w + 50, y0 + (row_h * ranking.size()) * (9 - i) / 10.0, 10,
           row_h * ranking.size() / 10.0, low_high(i / 9.0));
  return c.finish();
}

std::string render_dependence_svg(const DependenceSeries& d) {
  const double x0 = 70, y0 = 40, w = 420, h = 300;
  const int width = 600, height = 400;
  std::vector<double> xs, ys, zs;
  for (const auto& p : d.points) {
    xs.push_back(p.feature_value);
    ys.push_back(p.shap_value);
    zs.push_back(p.interaction_value);
  }
  const auto [xlo, xhi] = finite_range(xs);
  const auto [ylo, yhi] = finite_range(ys);
  const auto [zlo, zhi] = finite_range(zs);
  Canvas c(width, height);
  c.text(width / 2.0, 22, d.feature + " (colour: " + d.interaction + ")", 13, "middle");
  if (ylo < 0 && yhi > 0) {
    const double zy = y0 + h - (0 - ylo) / (yhi - ylo) * h;
    c.line(x0, zy, x0 + w, zy, "#bbb");
  }
  for (const auto& p : d.points)
    c.circle(x0 + (p.feature_value - xlo) / (xhi - xlo) * w,
             y0 + h - (p.shap_value - ylo) / (yhi - ylo) * h, 2.5,
             low_high((p.interaction_value - zlo) / (zhi - zlo)));
  axes(c, x0, y0, w, h);
  c.text(x0, y0 + h + 16, num(xlo), 10, "middle");
  c.text(x0 + w, y0 + h + 16, num(xhi), 10, "middle");
  c.text(x0 + w / 2, y0 + h + 34, d.feature, 12, "middle");
  c.text(x0 - 6, y0 + h, csv::fixed(ylo, 3), 10, "end");
  c.text(x0 - 6, y0 + 8, csv::fixed(yhi, 3), 10, "end");
  c.text(x0 + w + 20, y0 + 10, d.interaction + " high", 10);
  c.text(x0 + w + 20, y0 + h, d.interaction + " low", 10);
  return c.finish();
}

std::string render_bar_svg(const std::vector<std::string>& labels,
                           const std::vector<std::optional<double>>& values,
                           std::string_view title) {
  const double row_h = 22, x0 = 180, w = 360, y0 = 40;
  const int width = 600;
  const int height = static_cast<int>(y0 + row_h * labels.size() + 30);
  const double mid = x0 + w / 2;
  Canvas c(width, height);
  c.text(width / 2.0, 22, title, 13, "middle");
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double y = y0 + i * row_h;
    c.text(x0 - 8, y + row_h / 2 + 4, labels[i], 11, "end");
    if (!values[i]) {
      c.text(mid + 6, y + row_h / 2 + 4, "n/a", 10);
      continue;
    }
    const double v = std::clamp(*values[i], -1.0, 1.0);
    const double bw = std::abs(v) * w / 2;
    c.rect(v < 0 ? mid - bw : mid, y + 3, bw, row_h - 6, diverging(v));
    c.text(v < 0 ? mid - bw - 4 : mid + bw + 4, y + row_h / 2 + 4, num(v), 10,
           v < 0 ? "end" : "start");
  }
  c.line(mid, y0, mid, y0 + row_h * labels.size(), "#333");
  return c.finish();
}

void write_text_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  out.flush();
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

void emit_svg(const HistogramStats& h, const std::filesystem::path& path) {
  write_text_file(path, render_histogram_svg(h));
}

void emit_svg(const CorrelationMatrix& c, const std::filesystem::path& path) {
  write_text_file(path, render_matrix_svg(c, "Pearson correlation"));
}

void emit_svg(const SurfaceGrid& g, const std::filesystem::path& path) {
  write_text_file(path, render_surface_svg(g));
}

void emit_svg(const ShapMatrix& m, const std::filesystem::path& path) {
  write_text_file(path, render_shap_summary_svg(m, rank_features(m)));
}

void emit_svg(const DependenceSeries& d, const std::filesystem::path& path) {
  write_text_file(path, render_dependence_svg(d));
}

}  // namespace tunelens
