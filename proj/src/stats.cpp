#include "tunelens/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <ostream>
#include <tuple>

#include "tunelens/csv.hpp"
#include "tunelens/error.hpp"

namespace tunelens {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

bool is_constant(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
}

std::vector<double> column_of(MatrixRef x, std::size_t c) {
  std::vector<double> out(x.rows);
  for (std::size_t r = 0; r < x.rows; ++r) out[r] = x.at(r, c);
  return out;
}

}  // namespace

double skewness(std::span<const double> values) {
  if (values.empty()) throw ValidationError("skewness of an empty sample");
  const double m = mean_of(values);
  double m2 = 0.0, m3 = 0.0;
  for (double v : values) {
    const double d = v - m;
    m2 += d * d;
    m3 += d * d * d;
  }
  const auto n = static_cast<double>(values.size());
  m2 /= n;
  m3 /= n;
  if (m2 <= 0.0 || is_constant(values)) return 0.0;
  return m3 / std::pow(m2, 1.5);
}

double kolmogorov_survival(double lambda) {
  if (lambda <= 0.0) return 1.0;
  if (lambda < 1.18) {
    // Jacobi-theta form converges fast for small lambda.
    const double k = std::numbers::pi * std::numbers::pi / (8.0 * lambda * lambda);
    double sum = 0.0;
    for (int j = 1; j <= 50; ++j) {
      const double t = static_cast<double>(2 * j - 1);
      sum += std::exp(-t * t * k);
    }
    return std::clamp(1.0 - std::sqrt(2.0 * std::numbers::pi) / lambda * sum, 0.0, 1.0);
  }
  double sum = 0.0;
  for (int j = 1; j <= 100; ++j) {
    const double term = std::exp(-2.0 * j * j * lambda * lambda);
    sum += (j % 2 ? 1.0 : -1.0) * term;
    if (term < 1e-300) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

double ks_uniform_pvalue(std::span<const double> values, double lower, double upper,
                         bool discrete) {
  if (values.empty()) throw ValidationError("KS test on an empty sample");
  if (!(upper > lower)) throw ValidationError("KS test needs lower < upper");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const auto n = static_cast<double>(v.size());
  double d = 0.0;
  if (discrete) {
    const double lo = std::round(lower);
    const double hi = std::round(upper);
    const double levels = hi - lo + 1.0;
    std::size_t below = 0;
    for (double k = lo; k <= hi; k += 1.0) {
      while (below < v.size() && v[below] <= k + 0.5) ++below;
      const double empirical = static_cast<double>(below) / n;
      const double reference = (k - lo + 1.0) / levels;
      d = std::max(d, std::abs(empirical - reference));
    }
  } else {
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double f = std::clamp((v[i] - lower) / (upper - lower), 0.0, 1.0);
      d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
    }
  }
  const double sn = std::sqrt(n);
  return kolmogorov_survival((sn + 0.12 + 0.11 / sn) * d);
}

HistogramStats histogram(std::span<const double> values, const Column& column, int n_bins) {
  if (values.empty()) throw ValidationError("histogram of column '" + column.name + "' is empty");
  if (n_bins < 2) throw ValidationError("histogram needs at least two bins");
  const double lo = column.lower;
  const double hi = column.upper;
  HistogramStats h;
  h.column = column.name;
  h.n = values.size();
  h.edges.resize(static_cast<std::size_t>(n_bins) + 1);
  for (int i = 0; i <= n_bins; ++i)
    h.edges[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / n_bins;
  h.edges.back() = hi;
  h.counts.assign(static_cast<std::size_t>(n_bins), 0);
  for (double v : values) {
    if (!(v >= lo && v <= hi))
      throw ValidationError("value outside the bounds of column '" + column.name + "'");
    const auto bin = std::min(n_bins - 1, static_cast<int>((v - lo) / (hi - lo) * n_bins));
    ++h.counts[static_cast<std::size_t>(bin)];
  }
  h.skew = skewness(values);
  h.uniform_p = ks_uniform_pvalue(values, lo, hi, column.discrete());
  return h;
}

HistogramStats histogram(std::span<const double> values, const ParamDef& def, int n_bins) {
  const Column c{def.name, 0, 0, def.kind, def.encoded_lower(), def.encoded_upper(), def.log_scale};
  return histogram(values, c, n_bins);
}

std::optional<double> pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ValidationError("correlation of unequal-length vectors");
  if (a.size() < 2 || is_constant(a) || is_constant(b)) return std::nullopt;
  const double ma = mean_of(a);
  const double mb = mean_of(b);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

bool CorrelationMatrix::defined(std::size_t i, std::size_t j) const {
  return !std::isnan(at(i, j));
}

CorrelationMatrix pearson_matrix(MatrixRef x, std::vector<std::string> columns) {
  if (x.rows < 2) throw ValidationError("correlation matrix needs at least two rows");
  if (columns.empty())
    for (std::size_t c = 0; c < x.cols; ++c) columns.push_back("x" + std::to_string(c));
  if (columns.size() != x.cols) throw ValidationError("column names do not match matrix width");
  CorrelationMatrix m;
  m.columns = std::move(columns);
  const std::size_t p = x.cols;
  m.r.assign(p * p, kNaN);
  std::vector<std::vector<double>> cols(p);
  for (std::size_t c = 0; c < p; ++c) cols[c] = column_of(x, c);
  for (std::size_t i = 0; i < p; ++i) {
    if (!is_constant(cols[i])) m.r[i * p + i] = 1.0;
    for (std::size_t j = i + 1; j < p; ++j) {
      const auto r = pearson(cols[i], cols[j]);
      m.r[i * p + j] = m.r[j * p + i] = r.value_or(kNaN);
    }
  }
  return m;
}

std::vector<std::optional<double>> objective_correlation(MatrixRef x, std::span<const double> y) {
  if (x.rows < 2) throw ValidationError("objective correlation needs at least two rows");
  if (y.size() != x.rows) throw ValidationError("objective length does not match row count");
  std::vector<std::optional<double>> out;
  for (std::size_t c = 0; c < x.cols; ++c) out.push_back(pearson(column_of(x, c), y));
  return out;
}

ExtremePairs extreme_pairs(const CorrelationMatrix& c, std::size_t k) {
  if (c.p() < 2) throw ValidationError("extreme pairs need at least two columns");
  std::vector<CorrelatedPair> pairs;
  for (std::size_t i = 0; i < c.p(); ++i)
    for (std::size_t j = i + 1; j < c.p(); ++j)
      if (c.defined(i, j)) pairs.push_back({i, j, c.at(i, j)});
  ExtremePairs out;
  out.positive = pairs;
  std::stable_sort(out.positive.begin(), out.positive.end(),
                   [](const auto& a, const auto& b) { return a.r > b.r; });
  out.negative = pairs;
  std::stable_sort(out.negative.begin(), out.negative.end(),
                   [](const auto& a, const auto& b) { return a.r < b.r; });
  if (out.positive.size() > k) out.positive.resize(k);
  if (out.negative.size() > k) out.negative.resize(k);
  return out;
}

SurfaceGrid surface_grid(const EncodedMatrix& m, std::string_view x_param,
                         std::string_view y_param, int resolution) {
  if (resolution < 2) throw ValidationError("surface resolution must be >= 2");
  if (x_param == y_param) throw ValidationError("surface axes must be distinct parameters");
  const auto xi = m.column_index(x_param);
  const auto yi = m.column_index(y_param);
  const auto& xc = m.columns[xi];
  const auto& yc = m.columns[yi];
  if (xc.kind == ParamKind::categorical || yc.kind == ParamKind::categorical)
    throw ValidationError("surface grids are not supported for categorical parameters");

  SurfaceGrid g;
  g.x_param = xc.name;
  g.y_param = yc.name;
  g.resolution = resolution;
  const auto edges = [resolution](double lo, double hi) {
    std::vector<double> e(static_cast<std::size_t>(resolution) + 1);
    for (int i = 0; i <= resolution; ++i) e[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / resolution;
    e.back() = hi;
    return e;
  };
  g.x_edges = edges(xc.lower, xc.upper);
  g.y_edges = edges(yc.lower, yc.upper);
  const auto cells = static_cast<std::size_t>(resolution) * static_cast<std::size_t>(resolution);
  std::vector<double> sums(cells, 0.0);
  g.cell_count.assign(cells, 0);
  const auto bin = [resolution](double v, double lo, double hi) {
    return std::clamp(static_cast<int>((v - lo) / (hi - lo) * resolution), 0, resolution - 1);
  };
  for (std::size_t r = 0; r < m.rows; ++r) {
    const auto idx = g.cell(bin(m.at(r, xi), xc.lower, xc.upper), bin(m.at(r, yi), yc.lower, yc.upper));
    sums[idx] += m.y[r];
    ++g.cell_count[idx];
  }
  g.cell_mean.resize(cells);
  for (std::size_t i = 0; i < cells; ++i)
    if (g.cell_count[i]) g.cell_mean[i] = sums[i] / static_cast<double>(g.cell_count[i]);
  return g;
}

SurfaceGrid surface_grid(const Study& study, std::string_view x_param, std::string_view y_param,
                         int resolution) {
  return surface_grid(encode(study), x_param, y_param, resolution);
}

void write_histogram_csv(std::ostream& out, const HistogramStats& h) {
  out << "# " << csv::field("column=" + h.column) << ",n=" << h.n << ",skew=" << csv::number(h.skew)
      << ",uniform_p=" << csv::number(h.uniform_p) << '\n';
  out << "bin_lower,bin_upper,count\n";
  for (std::size_t i = 0; i < h.counts.size(); ++i)
    out << csv::number(h.edges[i]) << ',' << csv::number(h.edges[i + 1]) << ',' << h.counts[i]
        << '\n';
}

void write_matrix_csv(std::ostream& out, const CorrelationMatrix& c) {
  out << "column";
  for (const auto& name : c.columns) out << ',' << csv::field(name);
  out << '\n';
  for (std::size_t i = 0; i < c.p(); ++i) {
    out << csv::field(c.columns[i]);
    for (std::size_t j = 0; j < c.p(); ++j) out << ',' << csv::number(c.at(i, j));
    out << '\n';
  }
}

void write_surface_csv(std::ostream& out, const SurfaceGrid& g) {
  out << "# " << csv::field("x=" + g.x_param) << ',' << csv::field("y=" + g.y_param) << '\n';
  out << "x_lower,x_upper,y_lower,y_upper,count,mean_objective\n";
  for (int iy = 0; iy < g.resolution; ++iy) {
    for (int ix = 0; ix < g.resolution; ++ix) {
      const auto idx = g.cell(ix, iy);
      out << csv::number(g.x_edges[static_cast<std::size_t>(ix)]) << ','
          << csv::number(g.x_edges[static_cast<std::size_t>(ix) + 1]) << ','
          << csv::number(g.y_edges[static_cast<std::size_t>(iy)]) << ','
          << csv::number(g.y_edges[static_cast<std::size_t>(iy) + 1]) << ','
          << g.cell_count[idx] << ','
          << (g.cell_mean[idx] ? csv::number(*g.cell_mean[idx]) : std::string()) << '\n';
    }
  }
}

}  // namespace tunelens
