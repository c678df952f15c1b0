#pragma once

#include <istream>
#include <string_view>

#include "tunelens/shap.hpp"
#include "tunelens/stats.hpp"

namespace tunelens {

// Readers for the CSV files the report bundle writes, so that any emitted
// table can be re-rendered later. Numbers round-trip exactly.

HistogramStats read_histogram_csv(std::istream& in);
CorrelationMatrix read_matrix_csv(std::istream& in);
SurfaceGrid read_surface_csv(std::istream& in);
ShapMatrix read_shap_csv(std::istream& in);
DependenceSeries read_dependence_csv(std::istream& in);

enum class ArtifactKind { histogram, matrix, surface, shap_summary, dependence };
ArtifactKind parse_artifact_kind(std::string_view text);

/// Reads a CSV of the given kind and renders it as SVG.
std::string render_csv(ArtifactKind kind, std::istream& in);

}  // namespace tunelens
