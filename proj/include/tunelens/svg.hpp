#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tunelens/shap.hpp"
#include "tunelens/stats.hpp"

namespace tunelens {

// Static, self-contained SVG renderings. Output bytes depend only on the
// input values; numbers are printed with fixed precision.

std::string render_histogram_svg(const HistogramStats& h);
/// Correlation heat map. When `marks` is given, the strongest positive pairs
/// get black crosses and the strongest negative pairs white crosses.
std::string render_matrix_svg(const CorrelationMatrix& c, std::string_view title,
                              const ExtremePairs* marks = nullptr);
/// Empty cells are hatched and labelled "no data".
std::string render_surface_svg(const SurfaceGrid& g);
/// Beeswarm-style summary, features top-to-bottom in `ranking` order.
std::string render_shap_summary_svg(const ShapMatrix& m,
                                    const std::vector<FeatureImportance>& ranking);
std::string render_dependence_svg(const DependenceSeries& d);
std::string render_bar_svg(const std::vector<std::string>& labels,
                           const std::vector<std::optional<double>>& values,
                           std::string_view title);

/// Writes bytes to `path`; throws IoError when the file cannot be written.
void write_text_file(const std::filesystem::path& path, std::string_view content);

void emit_svg(const HistogramStats& h, const std::filesystem::path& path);
void emit_svg(const CorrelationMatrix& c, const std::filesystem::path& path);
void emit_svg(const SurfaceGrid& g, const std::filesystem::path& path);
void emit_svg(const ShapMatrix& m, const std::filesystem::path& path);
void emit_svg(const DependenceSeries& d, const std::filesystem::path& path);

}  // namespace tunelens
