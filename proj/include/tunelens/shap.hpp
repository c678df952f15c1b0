#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "tunelens/forest.hpp"

namespace tunelens {

/// Attribution of one prediction: base + sum(attributions) == prediction.
struct ShapRow {
  std::vector<double> attributions;
  double base = 0.0;
  double prediction = 0.0;
};

struct ShapMatrix {
  std::vector<std::string> columns;
  std::vector<std::string> trial_ids;  // may be empty
  std::vector<ShapRow> rows;
  std::vector<double> feature_values;  // rows x columns, encoded values

  std::size_t n() const { return rows.size(); }
  std::size_t p() const { return columns.size(); }
  double feature_value(std::size_t r, std::size_t c) const { return feature_values[r * p() + c]; }
  std::size_t column_index(std::string_view name) const;  // throws ValidationError
};

struct DependencePoint {
  double feature_value = 0.0;
  double shap_value = 0.0;
  double interaction_value = 0.0;
};

struct DependenceSeries {
  std::string feature;
  std::string interaction;
  std::vector<DependencePoint> points;
};

struct FeatureImportance {
  std::string column;
  std::size_t index = 0;
  double mean_abs_shap = 0.0;
};

struct InteractionChoice {
  std::size_t column = 0;
  double r = 0.0;
  bool low_confidence = false;  // max |r| below 0.1
};

/// Largest feature count the exhaustive oracle accepts.
inline constexpr std::size_t kMaxBruteforceFeatures = 20;

/// v(S) for a coalition given as a bitmask over features.
using CoalitionGame = std::function<double(std::uint32_t coalition)>;

/// Exact Shapley values of an arbitrary p-player game by full enumeration.
ShapRow shapley_from_game(std::size_t p, const CoalitionGame& game);

/// Interventional Shapley values: v(S) averages the model over background
/// rows with the features outside S taken from the background.
ShapRow shapley_bruteforce(const std::function<double(std::span<const double>)>& model,
                           MatrixRef background, std::span<const double> x);

/// E[tree(x) | x_S] under the training-sample flow recorded in node covers.
double path_dependent_expectation(const RegressionTree& tree, std::span<const double> x,
                                  std::uint32_t coalition);

/// Exhaustive Shapley values of the path-dependent game (tests/oracles).
ShapRow shapley_bruteforce(const RegressionTree& tree, std::size_t p, std::span<const double> x);
ShapRow shapley_bruteforce(const RegressionForest& forest, std::span<const double> x);

/// Polynomial-time path-dependent TreeSHAP.
ShapRow tree_shap(const RegressionTree& tree, std::size_t p, std::span<const double> x);
ShapRow tree_shap(const RegressionForest& forest, std::span<const double> x);

ShapMatrix explain_all(const RegressionForest& forest, MatrixRef x,
                       std::vector<std::string> trial_ids = {}, unsigned n_threads = 0);

/// Descending mean |phi|; ties keep column order.
std::vector<FeatureImportance> rank_features(const ShapMatrix& m);

/// Column (other than `feature`) with the largest |Pearson r| to it.
/// Constant columns are skipped. Throws when no partner is defined.
InteractionChoice select_interaction(MatrixRef x, std::size_t feature);

DependenceSeries dependence_series(const ShapMatrix& m, std::string_view feature,
                                   std::string_view interaction);

/// CSV: trial_id, base, prediction, phi per column, raw value per column.
void write_shap_csv(std::ostream& out, const ShapMatrix& m);
/// CSV: feature_value, shap_value, interaction_value.
void write_dependence_csv(std::ostream& out, const DependenceSeries& d);

}  // namespace tunelens
