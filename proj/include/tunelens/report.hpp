#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "tunelens/advisor.hpp"
#include "tunelens/forest.hpp"
#include "tunelens/shap.hpp"
#include "tunelens/stats.hpp"
#include "tunelens/study.hpp"

namespace tunelens {

inline constexpr std::string_view kToolVersion = "0.1.0";

/// Filter thresholds used for the two histogram passes of a refinement round.
inline constexpr double kExploratoryThreshold = 0.7;
inline constexpr double kRefinedThreshold = 0.8;

struct AnalyzeOptions {
  double filter_threshold = kRefinedThreshold;
  std::size_t min_trials = 50;
  double test_fraction = 0.2;
  bool aggregate = true;
  std::size_t top_pairs = 2;
  std::uint64_t seed = 0;
  unsigned n_threads = 0;  // never affects results
  ForestParams forest;     // forest.seed is derived from `seed`
  AdvisorThresholds thresholds;

  void validate() const;
  nlohmann::json to_json() const;
};

struct SurrogateMetrics {
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  double train_mse = 0.0;
  double test_mse = 0.0;
  double test_r2 = 0.0;
};

/// Everything the pipeline computes, before anything is written.
struct Analysis {
  AnalyzeOptions options;
  SearchSpace space;
  std::size_t n_input = 0;
  std::size_t n_aggregated = 0;
  std::size_t n_filtered = 0;

  EncodedMatrix all;       // aggregated, unfiltered
  EncodedMatrix filtered;  // aggregated, objective > threshold

  RegressionForest forest;
  SurrogateMetrics metrics;
  ShapMatrix shap;
  std::vector<FeatureImportance> ranking;
  std::vector<InteractionChoice> partners;  // per column
  std::vector<DependenceSeries> dependence;  // per column

  std::vector<HistogramStats> histograms;  // per column, filtered trials
  CorrelationMatrix correlation_filtered;
  CorrelationMatrix correlation_unfiltered;
  std::vector<std::optional<double>> objective_r;  // unfiltered
  ExtremePairs pairs;
  std::vector<SurfaceGrid> surfaces;

  std::vector<BoundRecommendation> recommendations;
};

/// aggregate -> filter -> encode -> 80:20 split -> forest -> test MSE ->
/// SHAP -> ranking -> dependence -> histograms -> correlations -> extreme
/// pairs -> surfaces -> advice. Throws InsufficientDataError when fewer than
/// min_trials survive the filter.
Analysis analyze_study(const Study& study, const AnalyzeOptions& options);

struct ManifestEntry {
  std::string path;  // relative to the bundle directory
  std::string sha256;
  std::size_t bytes = 0;
};

struct ReportBundle {
  std::filesystem::path directory;
  std::vector<ManifestEntry> files;  // sorted by path; excludes manifest.json
  nlohmann::json manifest;
};

ReportBundle write_bundle(const Analysis& analysis, const std::filesystem::path& directory);
ReportBundle run_analyze(const Study& study, const AnalyzeOptions& options,
                         const std::filesystem::path& directory);

/// Column name -> file-system friendly stem.
std::string file_stem(std::string_view column);

}  // namespace tunelens
