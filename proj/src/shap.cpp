#include "tunelens/shap.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <optional>
#include <ostream>

#include "tunelens/csv.hpp"
#include "tunelens/error.hpp"
#include "tunelens/parallel.hpp"
#include "tunelens/stats.hpp"

namespace tunelens {

std::size_t ShapMatrix::column_index(std::string_view name) const {
  for (std::size_t c = 0; c < columns.size(); ++c)
    if (columns[c] == name) return c;
  throw ValidationError("unknown column '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// Exhaustive oracle

ShapRow shapley_from_game(std::size_t p, const CoalitionGame& game) {
  if (p > kMaxBruteforceFeatures)
    throw ValidationError("exhaustive Shapley values are limited to " +
                          std::to_string(kMaxBruteforceFeatures) + " features");
  const std::uint32_t n_coalitions = 1u << p;
  std::vector<double> v(n_coalitions);
  for (std::uint32_t s = 0; s < n_coalitions; ++s) v[s] = game(s);

  // weight(|S|) = |S|! (p - |S| - 1)! / p! = 1 / (p * C(p - 1, |S|))
  std::vector<double> weight(p, 0.0);
  for (std::size_t s = 0; s < p; ++s) {
    double binom = 1.0;
    for (std::size_t k = 1; k <= s; ++k)
      binom = binom * static_cast<double>(p - 1 - s + k) / static_cast<double>(k);
    weight[s] = 1.0 / (static_cast<double>(p) * binom);
  }

  ShapRow row;
  row.attributions.assign(p, 0.0);
  for (std::size_t i = 0; i < p; ++i) {
    const std::uint32_t bit = 1u << i;
    double phi = 0.0;
    for (std::uint32_t s = 0; s < n_coalitions; ++s) {
      if (s & bit) continue;
      phi += weight[static_cast<std::size_t>(std::popcount(s))] * (v[s | bit] - v[s]);
    }
    row.attributions[i] = phi;
  }
  row.base = v[0];
  row.prediction = v[n_coalitions - 1];
  return row;
}

ShapRow shapley_bruteforce(const std::function<double(std::span<const double>)>& model,
                           MatrixRef background, std::span<const double> x) {
  if (background.rows == 0) throw ValidationError("background dataset is empty");
  if (background.cols != x.size()) throw ValidationError("background width does not match row");
  const std::size_t p = x.size();
  std::vector<double> z(p);
  auto row = shapley_from_game(p, [&](std::uint32_t s) {
    double sum = 0.0;
    for (std::size_t b = 0; b < background.rows; ++b) {
      for (std::size_t j = 0; j < p; ++j) z[j] = (s >> j) & 1u ? x[j] : background.at(b, j);
      sum += model(z);
    }
    return sum / static_cast<double>(background.rows);
  });
  row.prediction = model(x);
  return row;
}

double path_dependent_expectation(const RegressionTree& tree, std::span<const double> x,
                                  std::uint32_t coalition) {
  const auto rec = [&](const auto& self, std::size_t node) -> double {
    if (tree.is_leaf(node)) return tree.value[node];
    const auto f = static_cast<std::size_t>(tree.feature[node]);
    const auto l = static_cast<std::size_t>(tree.left[node]);
    const auto r = static_cast<std::size_t>(tree.right[node]);
    if ((coalition >> f) & 1u) return self(self, x[f] <= tree.threshold[node] ? l : r);
    return (tree.cover[l] * self(self, l) + tree.cover[r] * self(self, r)) / tree.cover[node];
  };
  return rec(rec, 0);
}

ShapRow shapley_bruteforce(const RegressionTree& tree, std::size_t p, std::span<const double> x) {
  if (x.size() != p) throw ValidationError("row width does not match feature count");
  auto row = shapley_from_game(
      p, [&](std::uint32_t s) { return path_dependent_expectation(tree, x, s); });
  row.prediction = tree.predict(x);
  return row;
}

ShapRow shapley_bruteforce(const RegressionForest& forest, std::span<const double> x) {
  const std::size_t p = forest.n_features();
  if (x.size() != p) throw ValidationError("row width does not match feature count");
  ShapRow total;
  total.attributions.assign(p, 0.0);
  for (const auto& tree : forest.trees) {
    const auto r = shapley_bruteforce(tree, p, x);
    for (std::size_t i = 0; i < p; ++i) total.attributions[i] += r.attributions[i];
    total.base += r.base;
  }
  const auto t = static_cast<double>(forest.trees.size());
  for (auto& a : total.attributions) a /= t;
  total.base /= t;
  total.prediction = predict(forest, x);
  return total;
}

// ---------------------------------------------------------------------------
// Path-dependent TreeSHAP: walks every root-to-leaf path once while tracking,
// for the unique features on the path, the proportion of coalitions of each
// size that reach the current node.

namespace {

struct PathElement {
  int feature = -1;
  double zero_fraction = 0.0;  // share of training flow when the feature is absent
  double one_fraction = 0.0;   // 1 if x follows this branch, else 0
  double weight = 0.0;
};

void extend_path(PathElement* path, int depth, double zero_fraction, double one_fraction,
                 int feature) {
  path[depth] = {feature, zero_fraction, one_fraction, depth == 0 ? 1.0 : 0.0};
  for (int i = depth - 1; i >= 0; --i) {
    path[i + 1].weight += one_fraction * path[i].weight * (i + 1) / static_cast<double>(depth + 1);
    path[i].weight = zero_fraction * path[i].weight * (depth - i) / static_cast<double>(depth + 1);
  }
}

void unwind_path(PathElement* path, int depth, int index) {
  const double one = path[index].one_fraction;
  const double zero = path[index].zero_fraction;
  double next_one_portion = path[depth].weight;
  for (int i = depth - 1; i >= 0; --i) {
    if (one != 0.0) {
      const double tmp = path[i].weight;
      path[i].weight = next_one_portion * (depth + 1) / ((i + 1) * one);
      next_one_portion = tmp - path[i].weight * zero * (depth - i) / static_cast<double>(depth + 1);
    } else {
      path[i].weight = path[i].weight * (depth + 1) / (zero * (depth - i));
    }
  }
  for (int i = index; i < depth; ++i) {
    path[i].feature = path[i + 1].feature;
    path[i].zero_fraction = path[i + 1].zero_fraction;
    path[i].one_fraction = path[i + 1].one_fraction;
  }
}

// Total weight of the path with element `index` removed.
double unwound_path_sum(const PathElement* path, int depth, int index) {
  const double one = path[index].one_fraction;
  const double zero = path[index].zero_fraction;
  double next_one_portion = path[depth].weight;
  double total = 0.0;
  for (int i = depth - 1; i >= 0; --i) {
    if (one != 0.0) {
      const double tmp = next_one_portion * (depth + 1) / ((i + 1) * one);
      total += tmp;
      next_one_portion = path[i].weight - tmp * zero * (depth - i) / static_cast<double>(depth + 1);
    } else {
      total += path[i].weight / zero / ((depth - i) / static_cast<double>(depth + 1));
    }
  }
  return total;
}

class TreeShapWalker {
 public:
  TreeShapWalker(const RegressionTree& tree, std::span<const double> x, std::vector<double>& phi)
      : tree_(tree), x_(x), phi_(phi) {
    const int d = tree.depth() + 2;
    buffer_.resize(static_cast<std::size_t>(d * (d + 1) / 2 + d));
  }

  void run() { recurse(0, buffer_.data(), 0, 1.0, 1.0, -1); }

 private:
  void recurse(std::size_t node, PathElement* parent_path, int depth, double zero_fraction,
               double one_fraction, int feature) {
    PathElement* path = parent_path + depth;
    if (depth > 0) std::copy(parent_path, parent_path + depth, path);
    extend_path(path, depth, zero_fraction, one_fraction, feature);

    if (tree_.is_leaf(node)) {
      for (int i = 1; i <= depth; ++i) {
        const double w = unwound_path_sum(path, depth, i);
        const auto& el = path[i];
        phi_[static_cast<std::size_t>(el.feature)] +=
            w * (el.one_fraction - el.zero_fraction) * tree_.value[node];
      }
      return;
    }

    const int split = tree_.feature[node];
    const auto f = static_cast<std::size_t>(split);
    const auto left = static_cast<std::size_t>(tree_.left[node]);
    const auto right = static_cast<std::size_t>(tree_.right[node]);
    const std::size_t hot = x_[f] <= tree_.threshold[node] ? left : right;
    const std::size_t cold = hot == left ? right : left;

    double incoming_zero = 1.0;
    double incoming_one = 1.0;
    int k = 0;
    for (; k <= depth; ++k)
      if (path[k].feature == split) break;
    if (k <= depth) {
      incoming_zero = path[k].zero_fraction;
      incoming_one = path[k].one_fraction;
      unwind_path(path, depth, k);
      --depth;
    }

    const double cover = tree_.cover[node];
    recurse(hot, path, depth + 1, tree_.cover[hot] / cover * incoming_zero, incoming_one, split);
    recurse(cold, path, depth + 1, tree_.cover[cold] / cover * incoming_zero, 0.0, split);
  }

  const RegressionTree& tree_;
  std::span<const double> x_;
  std::vector<double>& phi_;
  std::vector<PathElement> buffer_;
};

void accumulate_tree_shap(const RegressionTree& tree, std::span<const double> x,
                          std::vector<double>& phi) {
  if (tree.is_leaf(0)) return;
  TreeShapWalker(tree, x, phi).run();
}

}  // namespace

ShapRow tree_shap(const RegressionTree& tree, std::size_t p, std::span<const double> x) {
  if (x.size() != p) throw ValidationError("row width does not match feature count");
  ShapRow row;
  row.attributions.assign(p, 0.0);
  accumulate_tree_shap(tree, x, row.attributions);
  row.base = tree.expected_value();
  row.prediction = tree.predict(x);
  return row;
}

ShapRow tree_shap(const RegressionForest& forest, std::span<const double> x) {
  const std::size_t p = forest.n_features();
  if (x.size() != p)
    throw ValidationError("row has " + std::to_string(x.size()) + " features, forest expects " +
                          std::to_string(p));
  ShapRow row;
  row.attributions.assign(p, 0.0);
  for (const auto& tree : forest.trees) accumulate_tree_shap(tree, x, row.attributions);
  const auto t = static_cast<double>(forest.trees.size());
  for (auto& a : row.attributions) a /= t;
  row.base = forest.expected_value();
  row.prediction = predict(forest, x);
  return row;
}

ShapMatrix explain_all(const RegressionForest& forest, MatrixRef x,
                       std::vector<std::string> trial_ids, unsigned n_threads) {
  if (x.rows > 0 && x.cols != forest.n_features())
    throw ValidationError("matrix width does not match the forest's columns");
  if (!trial_ids.empty() && trial_ids.size() != x.rows)
    throw ValidationError("trial id count does not match row count");
  ShapMatrix m;
  m.columns = forest.columns;
  m.trial_ids = std::move(trial_ids);
  m.feature_values.assign(x.data.begin(), x.data.begin() + static_cast<std::ptrdiff_t>(x.rows * x.cols));
  m.rows.resize(x.rows);
  parallel_for(x.rows, n_threads, [&](std::size_t r) { m.rows[r] = tree_shap(forest, x.row(r)); });
  return m;
}

std::vector<FeatureImportance> rank_features(const ShapMatrix& m) {
  if (m.n() == 0) throw ValidationError("cannot rank features of an empty SHAP matrix");
  std::vector<FeatureImportance> out;
  for (std::size_t c = 0; c < m.p(); ++c) {
    double sum = 0.0;
    for (const auto& row : m.rows) sum += std::abs(row.attributions[c]);
    out.push_back({m.columns[c], c, sum / static_cast<double>(m.n())});
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.mean_abs_shap > b.mean_abs_shap;
  });
  return out;
}

InteractionChoice select_interaction(MatrixRef x, std::size_t feature) {
  if (x.cols < 2) throw ValidationError("interaction selection needs at least two columns");
  if (feature >= x.cols) throw ValidationError("feature index out of range");
  std::vector<double> target(x.rows), other(x.rows);
  for (std::size_t r = 0; r < x.rows; ++r) target[r] = x.at(r, feature);
  std::optional<InteractionChoice> best;
  for (std::size_t c = 0; c < x.cols; ++c) {
    if (c == feature) continue;
    for (std::size_t r = 0; r < x.rows; ++r) other[r] = x.at(r, c);
    const auto r = pearson(target, other);
    if (!r) continue;
    if (!best || std::abs(*r) > std::abs(best->r)) best = InteractionChoice{c, *r, false};
  }
  if (!best) throw ValidationError("no column has a defined correlation with the feature");
  best->low_confidence = std::abs(best->r) < 0.1;
  return *best;
}

DependenceSeries dependence_series(const ShapMatrix& m, std::string_view feature,
                                   std::string_view interaction) {
  const auto f = m.column_index(feature);
  const auto g = m.column_index(interaction);
  DependenceSeries d;
  d.feature = m.columns[f];
  d.interaction = m.columns[g];
  d.points.reserve(m.n());
  for (std::size_t r = 0; r < m.n(); ++r)
    d.points.push_back({m.feature_value(r, f), m.rows[r].attributions[f], m.feature_value(r, g)});
  return d;
}

void write_shap_csv(std::ostream& out, const ShapMatrix& m) {
  std::vector<std::string> header{"trial_id", "base", "prediction"};
  for (const auto& c : m.columns) header.push_back(csv::field("shap:" + c));
  for (const auto& c : m.columns) header.push_back(csv::field("value:" + c));
  out << csv::join(header) << '\n';
  for (std::size_t r = 0; r < m.n(); ++r) {
    std::vector<std::string> f;
    f.push_back(csv::field(r < m.trial_ids.size() ? m.trial_ids[r] : std::to_string(r)));
    f.push_back(csv::number(m.rows[r].base));
    f.push_back(csv::number(m.rows[r].prediction));
    for (double a : m.rows[r].attributions) f.push_back(csv::number(a));
    for (std::size_t c = 0; c < m.p(); ++c) f.push_back(csv::number(m.feature_value(r, c)));
    out << csv::join(f) << '\n';
  }
}

void write_dependence_csv(std::ostream& out, const DependenceSeries& d) {
  out << "# " << csv::field("feature=" + d.feature) << ','
      << csv::field("interaction=" + d.interaction) << '\n';
  out << "feature_value,shap_value,interaction_value\n";
  for (const auto& p : d.points)
    out << csv::number(p.feature_value) << ',' << csv::number(p.shap_value) << ','
        << csv::number(p.interaction_value) << '\n';
}

}  // namespace tunelens
