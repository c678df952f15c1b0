#include "tunelens/forest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>

#include <nlohmann/json.hpp>

#include "tunelens/error.hpp"
#include "tunelens/parallel.hpp"

namespace tunelens {

using nlohmann::json;

namespace {

constexpr int kForestFormatVersion = 1;

std::uint64_t tree_seed(std::uint64_t master, std::size_t index) {
  return mix_seed(master ^ mix_seed(0x7ee5u + index));
}

struct SplitCandidate {
  int feature = -1;
  double threshold = 0.0;
  double score = -std::numeric_limits<double>::infinity();
};

class TreeBuilder {
 public:
  TreeBuilder(MatrixRef x, std::span<const double> y, const ForestParams& params, Rng& rng)
      : x_(x), y_(y), params_(params), rng_(rng), mtry_(params.features_per_split(x.cols)) {}

  RegressionTree build(std::vector<std::size_t> samples) {
    grow(std::move(samples), 0);
    return std::move(tree_);
  }

 private:
  int add_node(double value, double cover) {
    tree_.feature.push_back(-1);
    tree_.threshold.push_back(0.0);
    tree_.left.push_back(-1);
    tree_.right.push_back(-1);
    tree_.value.push_back(value);
    tree_.cover.push_back(cover);
    return static_cast<int>(tree_.size() - 1);
  }

  // Targets summed in sorted order so the result does not depend on the
  // order rows arrive in.
  double node_mean(const std::vector<std::size_t>& samples) const {
    std::vector<double> t(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) t[i] = y_[samples[i]];
    std::sort(t.begin(), t.end());
    if (t.front() == t.back()) return t.front();
    return std::accumulate(t.begin(), t.end(), 0.0) / static_cast<double>(t.size());
  }

  std::vector<std::size_t> candidate_features() {
    std::vector<std::size_t> features(x_.cols);
    std::iota(features.begin(), features.end(), 0);
    if (mtry_ < x_.cols) {
      for (std::size_t i = 0; i < mtry_; ++i) {
        const auto j = i + static_cast<std::size_t>(rng_.below(x_.cols - i));
        std::swap(features[i], features[j]);
      }
      features.resize(mtry_);
      std::sort(features.begin(), features.end());
    }
    return features;
  }

  SplitCandidate best_split(const std::vector<std::size_t>& samples) {
    SplitCandidate best;
    const std::size_t n = samples.size();
    const auto min_leaf = static_cast<std::size_t>(params_.min_samples_leaf);
    std::vector<std::pair<double, double>> pairs(n);
    for (auto f : candidate_features()) {
      for (std::size_t i = 0; i < n; ++i) pairs[i] = {x_.at(samples[i], f), y_[samples[i]]};
      std::sort(pairs.begin(), pairs.end());
      if (pairs.front().first == pairs.back().first) continue;
      double total = 0.0;
      for (const auto& p : pairs) total += p.second;
      double left_sum = 0.0;
      for (std::size_t i = 0; i + 1 < n; ++i) {
        left_sum += pairs[i].second;
        const std::size_t n_left = i + 1;
        if (pairs[i].first == pairs[i + 1].first) continue;
        if (n_left < min_leaf || n - n_left < min_leaf) continue;
        const double right_sum = total - left_sum;
        const double score = left_sum * left_sum / static_cast<double>(n_left) +
                             right_sum * right_sum / static_cast<double>(n - n_left);
        if (score > best.score) {
          double mid = 0.5 * (pairs[i].first + pairs[i + 1].first);
          if (!(mid < pairs[i + 1].first)) mid = pairs[i].first;
          best = {static_cast<int>(f), mid, score};
        }
      }
    }
    return best;
  }

  int grow(std::vector<std::size_t> samples, int depth) {
    const int node = add_node(node_mean(samples), static_cast<double>(samples.size()));
    const bool depth_limited = params_.max_depth > 0 && depth >= params_.max_depth;
    const bool too_small =
        samples.size() < 2 * static_cast<std::size_t>(params_.min_samples_leaf);
    const double first = y_[samples.front()];
    const bool pure = std::all_of(samples.begin(), samples.end(),
                                  [&](std::size_t s) { return y_[s] == first; });
    if (depth_limited || too_small || pure) return node;

    const auto split = best_split(samples);
    if (split.feature < 0) return node;

    std::vector<std::size_t> left, right;
    for (auto s : samples)
      (x_.at(s, static_cast<std::size_t>(split.feature)) <= split.threshold ? left : right)
          .push_back(s);
    samples.clear();
    samples.shrink_to_fit();

    tree_.feature[node] = split.feature;
    tree_.threshold[node] = split.threshold;
    const int l = grow(std::move(left), depth + 1);
    tree_.left[node] = l;
    const int r = grow(std::move(right), depth + 1);
    tree_.right[node] = r;
    return node;
  }

  MatrixRef x_;
  std::span<const double> y_;
  const ForestParams& params_;
  Rng& rng_;
  std::size_t mtry_;
  RegressionTree tree_;
};

void check_training_data(MatrixRef x, std::span<const double> y) {
  if (x.rows == 0 || x.cols == 0) throw ValidationError("training matrix is empty");
  if (y.size() != x.rows) throw ValidationError("target length does not match row count");
  if (x.data.size() != x.rows * x.cols) throw ValidationError("matrix data has the wrong size");
  for (double v : x.data)
    if (!std::isfinite(v)) throw ValidationError("training matrix contains non-finite values");
  for (double v : y)
    if (!std::isfinite(v)) throw ValidationError("training targets contain non-finite values");
}

}  // namespace

void ForestParams::validate() const {
  if (n_trees < 1) throw ValidationError("forest needs at least one tree");
  if (min_samples_leaf < 1) throw ValidationError("min_samples_leaf must be >= 1");
  if (max_depth < 0) throw ValidationError("max_depth must be >= 0 (0 = unlimited)");
  if (max_features < kThirdOfColumns) throw ValidationError("invalid max_features");
}

std::size_t ForestParams::features_per_split(std::size_t p) const {
  if (max_features == kAllColumns) return p;
  if (max_features == kThirdOfColumns) return std::max<std::size_t>(1, (p + 2) / 3);
  return std::min(p, static_cast<std::size_t>(max_features));
}

double RegressionTree::predict(std::span<const double> row) const {
  std::size_t node = 0;
  while (!is_leaf(node)) {
    const auto f = static_cast<std::size_t>(feature[node]);
    node = static_cast<std::size_t>(row[f] <= threshold[node] ? left[node] : right[node]);
  }
  return value[node];
}

int RegressionTree::depth() const {
  std::function<int(std::size_t)> rec = [&](std::size_t node) -> int {
    if (is_leaf(node)) return 0;
    return 1 + std::max(rec(static_cast<std::size_t>(left[node])),
                        rec(static_cast<std::size_t>(right[node])));
  };
  return size() ? rec(0) : 0;
}

double RegressionTree::expected_value() const {
  if (is_leaf(0)) return value[0];
  double sum = 0.0;
  for (std::size_t i = 0; i < size(); ++i)
    if (is_leaf(i)) sum += value[i] * cover[i];
  return sum / cover[0];
}

double RegressionForest::expected_value() const {
  double sum = 0.0;
  for (const auto& t : trees) sum += t.expected_value();
  return sum / static_cast<double>(trees.size());
}

std::pair<EncodedMatrix, EncodedMatrix> train_test_split(const EncodedMatrix& m,
                                                        double test_fraction, Rng& rng) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw ValidationError("test fraction must lie in (0, 1)");
  if (m.rows < 2) throw ValidationError("train/test split needs at least two rows");
  const auto n_test = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(m.rows))), 1,
      m.rows - 1);
  std::vector<std::size_t> order(m.rows);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = 0; i + 1 < order.size(); ++i) {
    const auto j = i + static_cast<std::size_t>(rng.below(order.size() - i));
    std::swap(order[i], order[j]);
  }
  std::vector<bool> is_test(m.rows, false);
  for (std::size_t i = 0; i < n_test; ++i) is_test[order[i]] = true;

  EncodedMatrix train, test;
  train.columns = test.columns = m.columns;
  for (std::size_t r = 0; r < m.rows; ++r) {
    auto& dst = is_test[r] ? test : train;
    const auto row = m.row(r);
    dst.x.insert(dst.x.end(), row.begin(), row.end());
    dst.y.push_back(m.y[r]);
    if (r < m.trial_ids.size()) dst.trial_ids.push_back(m.trial_ids[r]);
    ++dst.rows;
  }
  return {std::move(train), std::move(test)};
}

RegressionTree fit_tree(MatrixRef x, std::span<const double> y,
                        std::span<const std::size_t> samples, const ForestParams& params,
                        Rng& rng) {
  check_training_data(x, y);
  params.validate();
  if (samples.empty()) throw ValidationError("tree needs at least one sample");
  TreeBuilder builder(x, y, params, rng);
  return builder.build({samples.begin(), samples.end()});
}

RegressionTree fit_tree(MatrixRef x, std::span<const double> y, const ForestParams& params,
                        Rng& rng) {
  std::vector<std::size_t> all(x.rows);
  std::iota(all.begin(), all.end(), 0);
  return fit_tree(x, y, all, params, rng);
}

RegressionForest fit_forest(MatrixRef x, std::span<const double> y, const ForestParams& params,
                            std::vector<std::string> columns) {
  check_training_data(x, y);
  params.validate();
  if (columns.empty())
    for (std::size_t c = 0; c < x.cols; ++c) columns.push_back("x" + std::to_string(c));
  if (columns.size() != x.cols) throw ValidationError("column names do not match matrix width");

  RegressionForest forest;
  forest.params = params;
  forest.columns = std::move(columns);
  forest.base_value = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
  forest.trees.resize(static_cast<std::size_t>(params.n_trees));

  parallel_for(forest.trees.size(), params.n_threads, [&](std::size_t t) {
    Rng rng(tree_seed(params.seed, t));
    std::vector<std::size_t> samples(x.rows);
    if (params.bootstrap) {
      for (auto& s : samples) s = static_cast<std::size_t>(rng.below(x.rows));
    } else {
      std::iota(samples.begin(), samples.end(), 0);
    }
    TreeBuilder builder(x, y, params, rng);
    forest.trees[t] = builder.build(std::move(samples));
  });
  return forest;
}

RegressionForest fit_forest(const EncodedMatrix& m, const ForestParams& params) {
  std::vector<std::string> names;
  for (const auto& c : m.columns) names.push_back(c.name);
  return fit_forest(matrix_ref(m), m.y, params, std::move(names));
}

double predict(const RegressionForest& forest, std::span<const double> row) {
  if (row.size() != forest.n_features())
    throw ValidationError("row has " + std::to_string(row.size()) + " features, forest expects " +
                          std::to_string(forest.n_features()));
  double sum = 0.0;
  for (const auto& t : forest.trees) sum += t.predict(row);
  return sum / static_cast<double>(forest.trees.size());
}

std::vector<double> predict(const RegressionForest& forest, MatrixRef x) {
  std::vector<double> out(x.rows);
  for (std::size_t r = 0; r < x.rows; ++r) out[r] = predict(forest, x.row(r));
  return out;
}

double mse(std::span<const double> predictions, std::span<const double> targets) {
  if (predictions.size() != targets.size())
    throw ValidationError("prediction and target lengths differ");
  if (predictions.empty()) throw ValidationError("mse of empty vectors");
  double sum = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double d = predictions[i] - targets[i];
    sum += d * d;
  }
  return sum / static_cast<double>(predictions.size());
}

double r_squared(std::span<const double> predictions, std::span<const double> targets) {
  const double err = mse(predictions, targets);
  const double mean =
      std::accumulate(targets.begin(), targets.end(), 0.0) / static_cast<double>(targets.size());
  double var = 0.0;
  for (double t : targets) var += (t - mean) * (t - mean);
  var /= static_cast<double>(targets.size());
  return var > 0.0 ? 1.0 - err / var : 0.0;
}

json forest_to_json(const RegressionForest& forest) {
  const auto& p = forest.params;
  json trees = json::array();
  for (const auto& t : forest.trees) {
    trees.push_back({{"feature", t.feature},
                     {"threshold", t.threshold},
                     {"left", t.left},
                     {"right", t.right},
                     {"value", t.value},
                     {"cover", t.cover}});
  }
  return json{{"format", "tunelens.forest"},
              {"version", kForestFormatVersion},
              {"params",
               {{"n_trees", p.n_trees},
                {"max_depth", p.max_depth},
                {"min_samples_leaf", p.min_samples_leaf},
                {"max_features", p.max_features},
                {"bootstrap", p.bootstrap},
                {"seed", p.seed}}},
              {"columns", forest.columns},
              {"base_value", forest.base_value},
              {"trees", std::move(trees)}};
}

RegressionForest forest_from_json(const json& doc) {
  try {
    if (doc.at("format") != "tunelens.forest") throw ParseError("not a forest document");
    if (doc.at("version").get<int>() != kForestFormatVersion)
      throw ParseError("unsupported forest format version");
    RegressionForest f;
    const auto& p = doc.at("params");
    f.params.n_trees = p.at("n_trees").get<int>();
    f.params.max_depth = p.at("max_depth").get<int>();
    f.params.min_samples_leaf = p.at("min_samples_leaf").get<int>();
    f.params.max_features = p.at("max_features").get<int>();
    f.params.bootstrap = p.at("bootstrap").get<bool>();
    f.params.seed = p.at("seed").get<std::uint64_t>();
    f.columns = doc.at("columns").get<std::vector<std::string>>();
    f.base_value = doc.at("base_value").get<double>();
    for (const auto& j : doc.at("trees")) {
      RegressionTree t;
      t.feature = j.at("feature").get<std::vector<int>>();
      t.threshold = j.at("threshold").get<std::vector<double>>();
      t.left = j.at("left").get<std::vector<int>>();
      t.right = j.at("right").get<std::vector<int>>();
      t.value = j.at("value").get<std::vector<double>>();
      t.cover = j.at("cover").get<std::vector<double>>();
      const auto n = t.feature.size();
      if (n == 0 || t.threshold.size() != n || t.left.size() != n || t.right.size() != n ||
          t.value.size() != n || t.cover.size() != n)
        throw ParseError("inconsistent tree node arrays");
      for (std::size_t i = 0; i < n; ++i) {
        if (t.feature[i] < 0) continue;
        if (t.feature[i] >= static_cast<int>(f.columns.size()) || t.left[i] <= 0 ||
            t.right[i] <= 0 || t.left[i] >= static_cast<int>(n) || t.right[i] >= static_cast<int>(n))
          throw ParseError("tree node references out of range");
      }
      f.trees.push_back(std::move(t));
    }
    if (f.trees.empty()) throw ParseError("forest has no trees");
    return f;
  } catch (const json::exception& e) {
    throw ParseError(std::string("forest document: ") + e.what());
  }
}

void save_forest(const RegressionForest& forest, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << forest_to_json(forest).dump() << '\n';
}

RegressionForest load_forest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open forest file '" + path + "'");
  try {
    return forest_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw ParseError(e.what());
  }
}

}  // namespace tunelens
