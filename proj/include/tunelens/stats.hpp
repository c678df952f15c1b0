#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tunelens/forest.hpp"
#include "tunelens/space.hpp"
#include "tunelens/study.hpp"

namespace tunelens {

struct HistogramStats {
  std::string column;
  std::vector<double> edges;          // n_bins + 1, spanning the declared bounds
  std::vector<std::size_t> counts;
  std::size_t n = 0;
  double skew = 0.0;                  // Fisher-Pearson g1
  double uniform_p = 1.0;             // KS p-value against uniform on the bounds
};

/// Fisher-Pearson g1 = m3 / m2^(3/2); zero for constant samples.
double skewness(std::span<const double> values);

/// Kolmogorov survival function Q(lambda) = P(K > lambda).
double kolmogorov_survival(double lambda);

/// One-sample KS test against the uniform law on [lower, upper]. With
/// `discrete`, the reference is the uniform law on the integers in range.
/// Returns the asymptotic p-value (Stephens' small-sample correction).
double ks_uniform_pvalue(std::span<const double> values, double lower, double upper,
                         bool discrete = false);

/// Equal-width histogram over the column's encoded bounds.
HistogramStats histogram(std::span<const double> values, const Column& column, int n_bins);
HistogramStats histogram(std::span<const double> values, const ParamDef& def, int n_bins);

/// Sample Pearson r; nullopt when either side is constant or n < 2.
std::optional<double> pearson(std::span<const double> a, std::span<const double> b);

struct CorrelationMatrix {
  std::vector<std::string> columns;
  std::vector<double> r;  // p x p, NaN where undefined

  std::size_t p() const { return columns.size(); }
  double at(std::size_t i, std::size_t j) const { return r[i * p() + j]; }
  bool defined(std::size_t i, std::size_t j) const;
};

CorrelationMatrix pearson_matrix(MatrixRef x, std::vector<std::string> columns = {});
std::vector<std::optional<double>> objective_correlation(MatrixRef x, std::span<const double> y);

struct CorrelatedPair {
  std::size_t a = 0;  // a < b
  std::size_t b = 0;
  double r = 0.0;
};

struct ExtremePairs {
  std::vector<CorrelatedPair> positive;  // descending r
  std::vector<CorrelatedPair> negative;  // ascending r
};

/// Top-k defined off-diagonal pairs by r and by -r; ties by (a, b).
ExtremePairs extreme_pairs(const CorrelationMatrix& c, std::size_t k);

struct SurfaceGrid {
  std::string x_param;
  std::string y_param;
  std::vector<double> x_edges;
  std::vector<double> y_edges;
  int resolution = 0;
  // resolution x resolution, indexed [iy * resolution + ix]; empty cells
  // have count 0 and no mean.
  std::vector<std::optional<double>> cell_mean;
  std::vector<std::size_t> cell_count;

  std::size_t cell(int ix, int iy) const {
    return static_cast<std::size_t>(iy) * static_cast<std::size_t>(resolution) +
           static_cast<std::size_t>(ix);
  }
};

/// Mean objective per cell of a resolution^2 grid over two numeric columns.
SurfaceGrid surface_grid(const EncodedMatrix& m, std::string_view x_param,
                         std::string_view y_param, int resolution);
SurfaceGrid surface_grid(const Study& study, std::string_view x_param, std::string_view y_param,
                         int resolution);

void write_histogram_csv(std::ostream& out, const HistogramStats& h);
void write_matrix_csv(std::ostream& out, const CorrelationMatrix& c);
void write_surface_csv(std::ostream& out, const SurfaceGrid& g);

}  // namespace tunelens
