#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "support.hpp"
#include "tunelens/error.hpp"
#include "tunelens/shap.hpp"
#include "tunelens/stats.hpp"
#include "tunelens/synthetic.hpp"

using namespace tunelens;

namespace {

RegressionTree leaf(double v, double cover = 10) {
  RegressionTree t;
  t.feature = {-1};
  t.threshold = {0};
  t.left = {-1};
  t.right = {-1};
  t.value = {v};
  t.cover = {cover};
  return t;
}

// Node arrays for a tree given in pre-order by the caller.
struct TreeBuilder {
  RegressionTree t;
  int add(int feature, double threshold, double value, double cover) {
    t.feature.push_back(feature);
    t.threshold.push_back(threshold);
    t.left.push_back(-1);
    t.right.push_back(-1);
    t.value.push_back(value);
    t.cover.push_back(cover);
    return static_cast<int>(t.feature.size()) - 1;
  }
  void link(int node, int l, int r) {
    t.left[node] = l;
    t.right[node] = r;
  }
};

RegressionTree stump(int feature, double threshold, double lo, double hi, double cl, double cr) {
  TreeBuilder b;
  const int root = b.add(feature, threshold, (lo * cl + hi * cr) / (cl + cr), cl + cr);
  const int l = b.add(-1, 0, lo, cl);
  const int r = b.add(-1, 0, hi, cr);
  b.link(root, l, r);
  return b.t;
}

double spearman(std::vector<double> a, std::vector<double> b) {
  const auto ranks = [](const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](auto i, auto j) { return v[i] < v[j]; });
    std::vector<double> r(v.size());
    for (std::size_t k = 0; k < idx.size(); ++k) r[idx[k]] = static_cast<double>(k);
    return r;
  };
  return *pearson(ranks(a), ranks(b));
}

}  // namespace

TEST_CASE("shapley axioms on a generic game") {
  // v(S) = |S|^2 over 4 players is symmetric: everyone gets v(N)/4.
  const auto row = shapley_from_game(4, [](std::uint32_t s) {
    const double k = std::popcount(s);
    return k * k;
  });
  for (double a : row.attributions) CHECK(a == doctest::Approx(4.0));
  CHECK(row.base == 0.0);
  CHECK(row.prediction == 16.0);
}

TEST_CASE("interventional oracle: additivity, dummy and the stump example") {
  const auto additive = [](std::span<const double> x) { return x[0] + x[1]; };
  const std::vector<double> zeros{0.0, 0.0};
  const std::vector<double> x{0.7, -1.3};
  const auto a = shapley_bruteforce(additive, MatrixRef{zeros, 1, 2}, x);
  CHECK(a.attributions[0] == doctest::Approx(0.7).epsilon(1e-15));
  CHECK(a.attributions[1] == doctest::Approx(-1.3).epsilon(1e-15));

  const auto ignores_second = [](std::span<const double> v) { return std::sin(v[0]) * 3.0; };
  const std::vector<double> bg{0.1, 0.2, 0.5, 0.9, -0.4, 2.0};
  const auto d = shapley_bruteforce(ignores_second, MatrixRef{bg, 3, 2}, x);
  CHECK(d.attributions[1] == 0.0);

  const auto stump_model = [](std::span<const double> v) { return v[0] > 0 ? 1.0 : 0.0; };
  const std::vector<double> background{-1.0, 0.0};
  const auto s = shapley_bruteforce(stump_model, MatrixRef{background, 1, 2}, std::vector<double>{1, 5});
  CHECK(s.attributions[0] == doctest::Approx(1.0));
  CHECK(s.attributions[1] == doctest::Approx(0.0));
  CHECK(s.base == 0.0);
  CHECK(s.prediction == 1.0);

  std::vector<double> wide(21, 0.0);
  CHECK_THROWS_AS(shapley_bruteforce(stump_model, MatrixRef{wide, 1, 21}, wide), ValidationError);
}

TEST_CASE("single leaf tree attributes nothing") {
  const auto t = leaf(0.42);
  const auto row = tree_shap(t, 3, std::vector<double>{1, 2, 3});
  CHECK(row.base == 0.42);
  CHECK(row.prediction == 0.42);
  for (double a : row.attributions) CHECK(a == 0.0);
}

TEST_CASE("stump matches the path-dependent oracle") {
  const auto t = stump(1, 0.5, -2.0, 3.0, 30, 10);
  for (double v : {0.2, 0.8}) {
    const std::vector<double> x{9.0, v};
    const auto fast = tree_shap(t, 2, x);
    const auto slow = shapley_bruteforce(t, 2, x);
    CHECK(fast.attributions[0] == 0.0);
    CHECK(std::abs(fast.attributions[1] - slow.attributions[1]) <= 1e-9);
    CHECK(fast.base == doctest::Approx(0.25 * 3 + 0.75 * -2).epsilon(1e-15));
  }
}

TEST_CASE("tree_shap equals brute force on random forests") {
  Rng rng(101);
  for (int f = 0; f < 15; ++f) {
    const auto forest = testing::random_forest(rng, 8, 6, 5);
    const auto p = forest.n_features();
    for (int i = 0; i < 10; ++i) {
      std::vector<double> x(p);
      for (auto& v : x) v = rng.uniform(-0.1, 1.1);
      const auto fast = tree_shap(forest, x);
      const auto slow = shapley_bruteforce(forest, x);
      CHECK(std::abs(fast.base - slow.base) <= 1e-9);
      for (std::size_t c = 0; c < p; ++c) CHECK(std::abs(fast.attributions[c] - slow.attributions[c]) <= 1e-9);
      const double sum = std::accumulate(fast.attributions.begin(), fast.attributions.end(), fast.base);
      CHECK(std::abs(sum - predict(forest, x)) <= 1e-9);
    }
  }
}

TEST_CASE("path-dependent expectation of the empty and full coalitions") {
  Rng rng(5);
  const auto forest = testing::random_forest(rng, 5, 1, 4);
  const auto& t = forest.trees[0];
  const std::vector<double> x(forest.n_features(), 0.4);
  CHECK(path_dependent_expectation(t, x, 0) == doctest::Approx(t.expected_value()).epsilon(1e-14));
  const auto full = (1u << forest.n_features()) - 1;
  CHECK(path_dependent_expectation(t, x, full) == t.predict(x));
}

TEST_CASE("symmetric tree gives equal attributions at a diagonal point") {
  // f(x0, x1) depends on the pair symmetrically and every branch carries
  // the same share of the training flow.
  TreeBuilder b;
  const int root = b.add(0, 0.5, 0, 100);
  const int l = b.add(1, 0.5, 0, 50);
  const int ll = b.add(-1, 0, 0.1, 25);
  const int lr = b.add(-1, 0, 0.6, 25);
  const int r = b.add(1, 0.5, 0, 50);
  const int rl = b.add(-1, 0, 0.6, 25);
  const int rr = b.add(-1, 0, 2.0, 25);
  b.link(root, l, r);
  b.link(l, ll, lr);
  b.link(r, rl, rr);
  for (double v : {0.2, 0.9}) {
    const std::vector<double> x{v, v, 0.3};
    const auto slow = shapley_bruteforce(b.t, 3, x);
    const auto fast = tree_shap(b.t, 3, x);
    CHECK(slow.attributions[0] == doctest::Approx(slow.attributions[1]).epsilon(1e-14));
    CHECK(fast.attributions[0] == doctest::Approx(fast.attributions[1]).epsilon(1e-12));
    CHECK(fast.attributions[2] == 0.0);
  }
}

TEST_CASE("features never split on receive zero") {
  Rng rng(7);
  for (int rep = 0; rep < 20; ++rep) {
    const auto forest = testing::random_forest(rng, 6, 5, 4);
    std::vector<bool> used(forest.n_features(), false);
    for (const auto& t : forest.trees)
      for (int f : t.feature)
        if (f >= 0) used[static_cast<std::size_t>(f)] = true;
    std::vector<double> x(forest.n_features());
    for (auto& v : x) v = rng.uniform();
    const auto row = tree_shap(forest, x);
    for (std::size_t c = 0; c < x.size(); ++c)
      if (!used[c]) CHECK(row.attributions[c] == 0.0);
  }
}

TEST_CASE("forest attributions are the mean of tree attributions") {
  Rng rng(9);
  const auto forest = testing::random_forest(rng, 6, 8, 5);
  const auto p = forest.n_features();
  std::vector<double> x(p);
  for (auto& v : x) v = rng.uniform();
  std::vector<double> mean(p, 0.0);
  double base = 0.0;
  for (const auto& t : forest.trees) {
    const auto r = tree_shap(t, p, x);
    for (std::size_t c = 0; c < p; ++c) mean[c] += r.attributions[c] / forest.trees.size();
    base += r.base / forest.trees.size();
  }
  const auto row = tree_shap(forest, x);
  CHECK(row.base == doctest::Approx(base).epsilon(1e-12));
  CHECK(row.base == doctest::Approx(forest.expected_value()).epsilon(1e-12));
  for (std::size_t c = 0; c < p; ++c) CHECK(row.attributions[c] == doctest::Approx(mean[c]).epsilon(1e-12));
}

TEST_CASE("explain_all: empty input, order, local accuracy, thread invariance") {
  Rng rng(11);
  const auto d = testing::random_data(200, 5, rng);
  ForestParams params;
  params.n_trees = 30;
  params.seed = 1;
  const auto forest = fit_forest(d.ref(), d.y, params);

  const auto empty = explain_all(forest, MatrixRef{{}, 0, 5});
  CHECK(empty.n() == 0);
  CHECK(empty.p() == 5);

  auto x = d.x;
  std::copy_n(x.begin(), 5, x.begin() + 5);  // rows 0 and 1 identical
  const auto one = explain_all(forest, MatrixRef{x, d.rows, 5}, {}, 1);
  const auto many = explain_all(forest, MatrixRef{x, d.rows, 5}, {}, 4);
  REQUIRE(one.n() == d.rows);
  CHECK(one.rows[0].attributions == one.rows[1].attributions);
  for (std::size_t r = 0; r < d.rows; ++r) {
    CHECK(one.rows[r].attributions == many.rows[r].attributions);
    CHECK(one.rows[r].prediction == predict(forest, std::span(x).subspan(r * 5, 5)));
    const double sum =
        std::accumulate(one.rows[r].attributions.begin(), one.rows[r].attributions.end(), one.rows[r].base);
    CHECK(std::abs(sum - one.rows[r].prediction) <= 1e-9);
    for (std::size_t c = 0; c < 5; ++c) CHECK(one.feature_value(r, c) == x[r * 5 + c]);
  }
  CHECK_THROWS_AS(explain_all(forest, MatrixRef{x, d.rows / 5, 25}), ValidationError);
}

TEST_CASE("rank_features orders by mean absolute attribution") {
  ShapMatrix m;
  m.columns = {"a", "b", "c", "d"};
  m.rows = {{{0.1, -0.5, 0.0, 0.5}, 0, 0}, {{-0.3, 0.5, 0.0, -0.5}, 0, 0}};
  m.feature_values.assign(8, 0.0);
  const auto r = rank_features(m);
  REQUIRE(r.size() == 4);
  CHECK(r[0].column == "b");  // tie with d, earlier column first
  CHECK(r[1].column == "d");
  CHECK(r[2].column == "a");
  CHECK(r[2].mean_abs_shap == doctest::Approx(0.2));
  CHECK(r[3].column == "c");
  CHECK(r[3].mean_abs_shap == 0.0);

  ShapMatrix single;
  single.columns = {"x"};
  single.rows = {{{0.5}, 0, 0}, {{-1.5}, 0, 0}};
  single.feature_values = {0, 0};
  const auto s = rank_features(single);
  CHECK(s[0].column == "x");
  CHECK(s[0].mean_abs_shap == 1.0);
}

TEST_CASE("select_interaction picks the most correlated column") {
  Rng rng(3);
  std::vector<double> x;
  const std::size_t n = 2000;
  for (std::size_t r = 0; r < n; ++r) {
    const double a = rng.normal();
    x.insert(x.end(), {a, rng.normal(), 2 * a + 1e-9 * rng.normal(), 0.5});
  }
  const MatrixRef m{x, n, 4};
  const auto c = select_interaction(m, 0);
  CHECK(c.column == 2);
  CHECK_FALSE(c.low_confidence);
  CHECK(select_interaction(m, 2).column == 0);

  std::vector<double> indep;
  for (std::size_t r = 0; r < n; ++r) indep.insert(indep.end(), {rng.normal(), rng.normal(), rng.normal(), 1.0});
  const auto weak = select_interaction(MatrixRef{indep, n, 4}, 0);
  CHECK(weak.column != 0);
  CHECK(weak.column != 3);  // constant column excluded
  CHECK(weak.low_confidence);

  std::vector<double> only_const;
  for (std::size_t r = 0; r < 10; ++r) only_const.insert(only_const.end(), {double(r), 3.0});
  CHECK_THROWS_AS(select_interaction(MatrixRef{only_const, 10, 2}, 0), ValidationError);
  std::vector<double> narrow{1, 2, 3};
  CHECK_THROWS_AS(select_interaction(MatrixRef{narrow, 3, 1}, 0), ValidationError);
}

TEST_CASE("dependence series keep order and allow self colouring") {
  ShapMatrix m;
  m.columns = {"a", "b"};
  m.rows = {{{0.1, 0.2}, 0, 0}, {{0.3, 0.4}, 0, 0}, {{0.5, 0.6}, 0, 0}};
  m.feature_values = {1, 2, 3, 4, 5, 6};
  const auto d = dependence_series(m, "a", "b");
  REQUIRE(d.points.size() == 3);
  CHECK(d.points[1].feature_value == 3);
  CHECK(d.points[1].shap_value == 0.3);
  CHECK(d.points[1].interaction_value == 4);
  const auto self = dependence_series(m, "b", "b");
  for (const auto& p : self.points) CHECK(p.interaction_value == p.feature_value);
  CHECK_THROWS_AS(dependence_series(m, "a", "zz"), ValidationError);
}

TEST_CASE("monotone planted effect gives increasing attributions") {
  const auto spec = preset_spec("planted", 3);
  const auto study = simulate_study(spec, SamplerKind::random, 400, 3);
  const auto m = encode(study);
  ForestParams params;
  params.seed = 3;
  params.n_trees = 60;
  const auto forest = fit_forest(m, params);
  const auto shap = explain_all(forest, matrix_ref(m));
  const auto up = dependence_series(shap, "A", "A");
  const auto down = dependence_series(shap, "B", "B");
  std::vector<double> fv, sv;
  for (const auto& p : up.points) fv.push_back(p.feature_value), sv.push_back(p.shap_value);
  CHECK(spearman(fv, sv) > 0.5);
  fv.clear(), sv.clear();
  for (const auto& p : down.points) fv.push_back(p.feature_value), sv.push_back(p.shap_value);
  CHECK(spearman(fv, sv) < -0.5);
}
