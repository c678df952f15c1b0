#include "tunelens/artifacts.hpp"

#include <cmath>
#include <map>
#include <string>

#include "tunelens/csv.hpp"
#include "tunelens/error.hpp"
#include "tunelens/svg.hpp"

namespace tunelens {

namespace {

std::map<std::string, std::string> comment_fields(const csv::Table& t) {
  std::map<std::string, std::string> out;
  for (const auto& line : t.comments) {
    for (const auto& f : csv::split(line)) {
      const auto eq = f.find('=');
      if (eq != std::string::npos) out[f.substr(0, eq)] = f.substr(eq + 1);
    }
  }
  return out;
}

std::size_t to_count(const std::string& text) {
  const double v = csv::to_double(text);
  if (!(v >= 0.0) || v != std::floor(v)) throw ParseError("bad count '" + text + "'");
  return static_cast<std::size_t>(v);
}

void expect_header(const csv::Table& t, std::initializer_list<std::string_view> names) {
  for (auto n : names) t.column(n);
}

}  // namespace

HistogramStats read_histogram_csv(std::istream& in) {
  const auto t = csv::read(in);
  expect_header(t, {"bin_lower", "bin_upper", "count"});
  const auto meta = comment_fields(t);
  HistogramStats h;
  if (auto it = meta.find("column"); it != meta.end()) h.column = it->second;
  if (auto it = meta.find("skew"); it != meta.end()) h.skew = csv::to_double(it->second);
  if (auto it = meta.find("uniform_p"); it != meta.end()) h.uniform_p = csv::to_double(it->second);
  if (t.rows.empty()) throw ParseError("histogram has no bins");
  const auto lo = t.column("bin_lower"), hi = t.column("bin_upper"), ct = t.column("count");
  for (const auto& row : t.rows) {
    if (h.edges.empty()) h.edges.push_back(csv::to_double(row[lo]));
    h.edges.push_back(csv::to_double(row[hi]));
    h.counts.push_back(to_count(row[ct]));
    h.n += h.counts.back();
  }
  return h;
}

CorrelationMatrix read_matrix_csv(std::istream& in) {
  const auto t = csv::read(in);
  if (t.header.empty() || t.header[0] != "column") throw ParseError("matrix header must start with 'column'");
  CorrelationMatrix c;
  c.columns.assign(t.header.begin() + 1, t.header.end());
  if (t.rows.size() != c.p()) throw ParseError("matrix is not square");
  for (std::size_t i = 0; i < c.p(); ++i) {
    if (t.rows[i][0] != c.columns[i]) throw ParseError("row label '" + t.rows[i][0] + "' out of order");
    for (std::size_t j = 0; j < c.p(); ++j) c.r.push_back(csv::to_double(t.rows[i][j + 1]));
  }
  return c;
}

SurfaceGrid read_surface_csv(std::istream& in) {
  const auto t = csv::read(in);
  expect_header(t, {"x_lower", "x_upper", "y_lower", "y_upper", "count", "mean_objective"});
  const auto meta = comment_fields(t);
  SurfaceGrid g;
  if (auto it = meta.find("x"); it != meta.end()) g.x_param = it->second;
  if (auto it = meta.find("y"); it != meta.end()) g.y_param = it->second;
  const auto n = t.rows.size();
  const auto res = static_cast<int>(std::lround(std::sqrt(static_cast<double>(n))));
  if (res < 2 || static_cast<std::size_t>(res) * static_cast<std::size_t>(res) != n)
    throw ParseError("surface grid must have resolution^2 cells");
  g.resolution = res;
  const auto xl = t.column("x_lower"), xu = t.column("x_upper"), yl = t.column("y_lower"),
             yu = t.column("y_upper"), ct = t.column("count"), mo = t.column("mean_objective");
  for (int iy = 0; iy < res; ++iy) {
    for (int ix = 0; ix < res; ++ix) {
      const auto& row = t.rows[g.cell(ix, iy)];
      if (iy == 0) {
        if (ix == 0) g.x_edges.push_back(csv::to_double(row[xl]));
        g.x_edges.push_back(csv::to_double(row[xu]));
      }
      if (ix == 0) {
        if (iy == 0) g.y_edges.push_back(csv::to_double(row[yl]));
        g.y_edges.push_back(csv::to_double(row[yu]));
      }
      g.cell_count.push_back(to_count(row[ct]));
      if (row[mo].empty())
        g.cell_mean.push_back(std::nullopt);
      else
        g.cell_mean.push_back(csv::to_double(row[mo]));
    }
  }
  return g;
}

ShapMatrix read_shap_csv(std::istream& in) {
  const auto t = csv::read(in);
  expect_header(t, {"trial_id", "base", "prediction"});
  ShapMatrix m;
  std::vector<std::size_t> shap_cols, value_cols;
  for (std::size_t i = 0; i < t.header.size(); ++i) {
    const auto& h = t.header[i];
    if (h.rfind("shap:", 0) == 0) {
      m.columns.push_back(h.substr(5));
      shap_cols.push_back(i);
    }
  }
  for (const auto& c : m.columns) value_cols.push_back(t.column("value:" + c));
  const auto id = t.column("trial_id"), base = t.column("base"), pred = t.column("prediction");
  for (const auto& row : t.rows) {
    m.trial_ids.push_back(row[id]);
    ShapRow r;
    r.base = csv::to_double(row[base]);
    r.prediction = csv::to_double(row[pred]);
    for (auto c : shap_cols) r.attributions.push_back(csv::to_double(row[c]));
    for (auto c : value_cols) m.feature_values.push_back(csv::to_double(row[c]));
    m.rows.push_back(std::move(r));
  }
  return m;
}

DependenceSeries read_dependence_csv(std::istream& in) {
  const auto t = csv::read(in);
  expect_header(t, {"feature_value", "shap_value", "interaction_value"});
  const auto meta = comment_fields(t);
  DependenceSeries d;
  if (auto it = meta.find("feature"); it != meta.end()) d.feature = it->second;
  if (auto it = meta.find("interaction"); it != meta.end()) d.interaction = it->second;
  const auto f = t.column("feature_value"), s = t.column("shap_value"),
             i = t.column("interaction_value");
  for (const auto& row : t.rows)
    d.points.push_back(
        {csv::to_double(row[f]), csv::to_double(row[s]), csv::to_double(row[i])});
  return d;
}

ArtifactKind parse_artifact_kind(std::string_view text) {
  if (text == "histogram") return ArtifactKind::histogram;
  if (text == "matrix") return ArtifactKind::matrix;
  if (text == "surface") return ArtifactKind::surface;
  if (text == "shap-summary") return ArtifactKind::shap_summary;
  if (text == "dependence") return ArtifactKind::dependence;
  throw ValidationError("unknown artifact kind '" + std::string(text) +
                        "' (histogram, matrix, surface, shap-summary, dependence)");
}

std::string render_csv(ArtifactKind kind, std::istream& in) {
  switch (kind) {
    case ArtifactKind::histogram:
      return render_histogram_svg(read_histogram_csv(in));
    case ArtifactKind::matrix:
      return render_matrix_svg(read_matrix_csv(in), "Pearson correlation");
    case ArtifactKind::surface:
      return render_surface_svg(read_surface_csv(in));
    case ArtifactKind::shap_summary: {
      const auto m = read_shap_csv(in);
      return render_shap_summary_svg(m, rank_features(m));
    }
    case ArtifactKind::dependence:
      return render_dependence_svg(read_dependence_csv(in));
  }
  throw ValidationError("unknown artifact kind");
}

}  // namespace tunelens
