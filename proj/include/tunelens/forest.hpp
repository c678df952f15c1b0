#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "tunelens/rng.hpp"
#include "tunelens/study.hpp"

namespace tunelens {

/// Row-major read-only matrix.
struct MatrixRef {
  std::span<const double> data;
  std::size_t rows = 0;
  std::size_t cols = 0;

  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<const double> row(std::size_t r) const { return data.subspan(r * cols, cols); }
};

inline MatrixRef matrix_ref(const EncodedMatrix& m) { return {m.x, m.rows, m.cols()}; }

struct ForestParams {
  static constexpr int kThirdOfColumns = -1;
  static constexpr int kAllColumns = 0;

  int n_trees = 200;
  int max_depth = 0;  // 0 = unlimited
  int min_samples_leaf = 2;
  int max_features = kThirdOfColumns;  // or kAllColumns, or an explicit count
  bool bootstrap = true;
  std::uint64_t seed = 0;
  unsigned n_threads = 0;  // 0 = hardware concurrency; never affects results

  void validate() const;
  std::size_t features_per_split(std::size_t p) const;
};

/// CART regression tree in flat node arrays. Node 0 is the root; a leaf has
/// feature == -1. Internal nodes send x[feature] <= threshold to `left`.
struct RegressionTree {
  std::vector<int> feature;
  std::vector<double> threshold;
  std::vector<int> left;
  std::vector<int> right;
  std::vector<double> value;  // mean training target below the node
  std::vector<double> cover;  // training samples reaching the node

  std::size_t size() const { return feature.size(); }
  bool is_leaf(std::size_t node) const { return feature[node] < 0; }
  double predict(std::span<const double> row) const;
  int depth() const;
  /// Cover-weighted mean of the leaves: the tree's expected output.
  double expected_value() const;
};

struct RegressionForest {
  std::vector<RegressionTree> trees;
  ForestParams params;
  std::vector<std::string> columns;
  double base_value = 0.0;  // mean training target

  std::size_t n_features() const { return columns.size(); }
  /// Mean over trees of RegressionTree::expected_value (the SHAP base).
  double expected_value() const;
};

/// Uniform partition without replacement; |test| = round(fraction * n),
/// clamped so both sides are non-empty. Row order is preserved on each side.
std::pair<EncodedMatrix, EncodedMatrix> train_test_split(const EncodedMatrix& m,
                                                        double test_fraction, Rng& rng);

/// Grows one tree on `samples` (row indices into x, repeats allowed).
RegressionTree fit_tree(MatrixRef x, std::span<const double> y,
                        std::span<const std::size_t> samples, const ForestParams& params,
                        Rng& rng);
RegressionTree fit_tree(MatrixRef x, std::span<const double> y, const ForestParams& params,
                        Rng& rng);

RegressionForest fit_forest(MatrixRef x, std::span<const double> y, const ForestParams& params,
                            std::vector<std::string> columns = {});
RegressionForest fit_forest(const EncodedMatrix& m, const ForestParams& params);

double predict(const RegressionForest& forest, std::span<const double> row);
std::vector<double> predict(const RegressionForest& forest, MatrixRef x);

double mse(std::span<const double> predictions, std::span<const double> targets);
/// Coefficient of determination against the targets' own mean.
double r_squared(std::span<const double> predictions, std::span<const double> targets);

nlohmann::json forest_to_json(const RegressionForest& forest);
RegressionForest forest_from_json(const nlohmann::json& doc);
void save_forest(const RegressionForest& forest, const std::string& path);
RegressionForest load_forest(const std::string& path);

}  // namespace tunelens
