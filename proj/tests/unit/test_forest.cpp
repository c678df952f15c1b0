#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "support.hpp"
#include "tunelens/error.hpp"
#include "tunelens/forest.hpp"
#include "tunelens/synthetic.hpp"

using namespace tunelens;

namespace {

ForestParams exact_params() {
  ForestParams p;
  p.n_trees = 1;
  p.bootstrap = false;
  p.max_features = ForestParams::kAllColumns;
  p.min_samples_leaf = 1;
  return p;
}

EncodedMatrix matrix_of(const testing::RandomData& d) {
  EncodedMatrix m;
  m.rows = d.rows;
  m.x = d.x;
  m.y = d.y;
  for (std::size_t c = 0; c < d.cols; ++c) {
    m.columns.push_back({"c" + std::to_string(c), c, 0, ParamKind::continuous, 0.0, 1.0, false});
  }
  for (std::size_t r = 0; r < d.rows; ++r) m.trial_ids.push_back("r" + std::to_string(r));
  return m;
}

// Exhaustive root split: minimizes summed child squared error over every
// feature and every midpoint between distinct sorted values.
struct Split {
  std::size_t feature = 0;
  double threshold = 0.0;
  double sse = INFINITY;
};

Split best_split(const testing::RandomData& d, std::size_t min_leaf) {
  Split best;
  for (std::size_t f = 0; f < d.cols; ++f) {
    std::vector<double> vals;
    for (std::size_t r = 0; r < d.rows; ++r) vals.push_back(d.x[r * d.cols + f]);
    std::set<double> uniq(vals.begin(), vals.end());
    std::vector<double> u(uniq.begin(), uniq.end());
    for (std::size_t i = 0; i + 1 < u.size(); ++i) {
      const double t = 0.5 * (u[i] + u[i + 1]);
      double sl = 0, sr = 0, ql = 0, qr = 0;
      std::size_t nl = 0, nr = 0;
      for (std::size_t r = 0; r < d.rows; ++r) {
        const double y = d.y[r];
        if (vals[r] <= t) {
          sl += y, ql += y * y, ++nl;
        } else {
          sr += y, qr += y * y, ++nr;
        }
      }
      if (nl < min_leaf || nr < min_leaf) continue;
      const double sse = (ql - sl * sl / nl) + (qr - sr * sr / nr);
      if (sse < best.sse - 1e-12) best = {f, t, sse};
    }
  }
  return best;
}

}  // namespace

TEST_CASE("train_test_split sizes and determinism") {
  Rng data_rng(1);
  const auto m = matrix_of(testing::random_data(800, 3, data_rng));
  Rng a(7), b(7);
  auto [train, test] = train_test_split(m, 0.2, a);
  CHECK(train.rows == 640);
  CHECK(test.rows == 160);
  auto [train2, test2] = train_test_split(m, 0.2, b);
  CHECK(train.trial_ids == train2.trial_ids);
  CHECK(test.trial_ids == test2.trial_ids);
  std::set<std::string> ids(train.trial_ids.begin(), train.trial_ids.end());
  for (const auto& id : test.trial_ids) CHECK(ids.insert(id).second);
  CHECK(ids.size() == 800);
  for (std::size_t r = 0; r < test.rows; ++r) {
    const auto orig = m.column_index("c0");
    const auto idx = std::stoul(test.trial_ids[r].substr(1));
    CHECK(test.at(r, orig) == m.at(idx, orig));
    CHECK(test.y[r] == m.y[idx]);
  }

  const auto two = matrix_of(testing::random_data(2, 1, data_rng));
  Rng c(3);
  auto [tr, te] = train_test_split(two, 0.2, c);
  CHECK(tr.rows == 1);
  CHECK(te.rows == 1);

  const auto one = matrix_of(testing::random_data(1, 1, data_rng));
  CHECK_THROWS_AS(train_test_split(one, 0.2, c), ValidationError);
  CHECK_THROWS_AS(train_test_split(m, 1.0, c), ValidationError);
}

TEST_CASE("constant target grows a single leaf") {
  Rng rng(2);
  auto d = testing::random_data(50, 3, rng);
  std::fill(d.y.begin(), d.y.end(), 0.37);
  Rng fit_rng(0);
  const auto tree = fit_tree(d.ref(), d.y, exact_params(), fit_rng);
  CHECK(tree.size() == 1);
  CHECK(tree.value[0] == 0.37);
  const auto forest = fit_forest(d.ref(), d.y, ForestParams{});
  for (std::size_t r = 0; r < d.rows; ++r) CHECK(predict(forest, std::span(d.x).subspan(r * 3, 3)) == doctest::Approx(0.37).epsilon(1e-15));
}

TEST_CASE("depth-one tree finds the step") {
  Rng rng(3);
  testing::RandomData d;
  d.rows = 200;
  d.cols = 3;
  for (std::size_t r = 0; r < d.rows; ++r) {
    for (std::size_t c = 0; c < 3; ++c) d.x.push_back(rng.uniform());
    d.y.push_back(d.x[r * 3 + 1] > 0.5 ? 1.0 : 0.0);
  }
  auto params = exact_params();
  params.max_depth = 1;
  Rng fit_rng(0);
  const auto tree = fit_tree(d.ref(), d.y, params, fit_rng);
  REQUIRE(tree.size() == 3);
  const auto oracle = best_split(d, 1);
  CHECK(tree.feature[0] == static_cast<int>(oracle.feature));
  CHECK(tree.feature[0] == 1);
  CHECK(tree.threshold[0] == oracle.threshold);
  double below = 0, above = 1;
  for (std::size_t r = 0; r < d.rows; ++r) {
    const double v = d.x[r * 3 + 1];
    if (v <= 0.5) below = std::max(below, v);
    if (v > 0.5) above = std::min(above, v);
  }
  CHECK(tree.threshold[0] > below);
  CHECK(tree.threshold[0] < above);
}

TEST_CASE("root split agrees with the exhaustive oracle on random data") {
  Rng rng(4);
  for (int rep = 0; rep < 30; ++rep) {
    const auto d = testing::random_data(20 + rng.below(60), 1 + rng.below(5), rng);
    auto params = exact_params();
    params.max_depth = 1;
    params.min_samples_leaf = 1 + static_cast<int>(rng.below(4));
    Rng fit_rng(0);
    const auto tree = fit_tree(d.ref(), d.y, params, fit_rng);
    const auto oracle = best_split(d, static_cast<std::size_t>(params.min_samples_leaf));
    REQUIRE(tree.size() == 3);
    CHECK(tree.feature[0] == static_cast<int>(oracle.feature));
    CHECK(tree.threshold[0] == doctest::Approx(oracle.threshold).epsilon(1e-15));
  }
}

TEST_CASE("unlimited depth interpolates distinct rows") {
  Rng rng(5);
  const auto d = testing::random_data(120, 4, rng);
  Rng fit_rng(0);
  const auto tree = fit_tree(d.ref(), d.y, exact_params(), fit_rng);
  for (std::size_t r = 0; r < d.rows; ++r) CHECK(tree.predict(std::span(d.x).subspan(r * 4, 4)) == d.y[r]);
}

TEST_CASE("structural limits hold") {
  Rng rng(6);
  const auto d = testing::random_data(300, 5, rng);
  ForestParams p;
  p.n_trees = 20;
  p.max_depth = 4;
  p.min_samples_leaf = 5;
  p.seed = 3;
  const auto forest = fit_forest(d.ref(), d.y, p);
  CHECK(forest.trees.size() == 20);
  for (const auto& t : forest.trees) {
    CHECK(t.depth() <= 4);
    for (std::size_t n = 0; n < t.size(); ++n) {
      if (t.is_leaf(n)) {
        CHECK(t.cover[n] >= 5);
      } else {
        CHECK(t.cover[n] == t.cover[t.left[n]] + t.cover[t.right[n]]);
      }
    }
  }
  double mean_y = std::accumulate(d.y.begin(), d.y.end(), 0.0) / d.rows;
  CHECK(forest.base_value == doctest::Approx(mean_y).epsilon(1e-12));
}

TEST_CASE("single tree forest without bootstrap equals fit_tree") {
  Rng rng(7);
  const auto d = testing::random_data(100, 3, rng);
  auto p = exact_params();
  p.min_samples_leaf = 2;
  const auto forest = fit_forest(d.ref(), d.y, p);
  Rng fit_rng(123);
  const auto tree = fit_tree(d.ref(), d.y, p, fit_rng);
  REQUIRE(forest.trees.size() == 1);
  CHECK(forest.trees[0].feature == tree.feature);
  CHECK(forest.trees[0].threshold == tree.threshold);
  CHECK(forest.trees[0].value == tree.value);
}

TEST_CASE("forest prediction is the mean of its trees") {
  Rng rng(8);
  const auto d = testing::random_data(150, 4, rng);
  ForestParams p;
  p.n_trees = 25;
  p.seed = 9;
  const auto forest = fit_forest(d.ref(), d.y, p);
  for (std::size_t r = 0; r < 20; ++r) {
    const auto row = std::span(d.x).subspan(r * 4, 4);
    double sum = 0;
    for (const auto& t : forest.trees) sum += t.predict(row);
    CHECK(predict(forest, row) == doctest::Approx(sum / 25).epsilon(1e-14));
  }
  RegressionForest two;
  two.columns = {"x"};
  RegressionTree a, b;
  for (auto* t : {&a, &b}) {
    t->feature = {-1};
    t->threshold = {0};
    t->left = {-1};
    t->right = {-1};
    t->cover = {1};
  }
  a.value = {0.2};
  b.value = {0.8};
  two.trees = {a};
  CHECK(predict(two, std::vector<double>{0.1}) == 0.2);
  two.trees = {a, b};
  CHECK(predict(two, std::vector<double>{0.1}) == 0.5);
  CHECK_THROWS_AS(predict(two, std::vector<double>{0.1, 0.2}), ValidationError);
}

TEST_CASE("thread count never changes the fitted forest") {
  Rng rng(9);
  const auto d = testing::random_data(200, 6, rng);
  ForestParams p;
  p.n_trees = 40;
  p.seed = 77;
  p.n_threads = 1;
  const auto serial = forest_to_json(fit_forest(d.ref(), d.y, p)).dump();
  p.n_threads = 4;
  const auto threaded = forest_to_json(fit_forest(d.ref(), d.y, p)).dump();
  CHECK(serial == threaded);
  p.seed = 78;
  CHECK(forest_to_json(fit_forest(d.ref(), d.y, p)).dump() != serial);
}

TEST_CASE("predictions are invariant to tree order and training row order") {
  Rng rng(10);
  const auto d = testing::random_data(120, 4, rng);
  ForestParams p;
  p.n_trees = 15;
  p.seed = 5;
  auto forest = fit_forest(d.ref(), d.y, p);
  auto reversed = forest;
  std::reverse(reversed.trees.begin(), reversed.trees.end());
  for (std::size_t r = 0; r < d.rows; ++r) {
    const auto row = std::span(d.x).subspan(r * 4, 4);
    CHECK(predict(forest, row) == doctest::Approx(predict(reversed, row)).epsilon(1e-14));
  }

  // Without bootstrap the per-tree draws do not touch rows, so permuting the
  // training data must leave every tree unchanged.
  auto exact = exact_params();
  exact.n_trees = 3;
  exact.min_samples_leaf = 3;
  const auto f1 = fit_forest(d.ref(), d.y, exact);
  std::vector<std::size_t> perm(d.rows);
  std::iota(perm.begin(), perm.end(), 0);
  Rng shuffle(11);
  for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[shuffle.below(i)]);
  testing::RandomData shuffled = d;
  for (std::size_t r = 0; r < d.rows; ++r) {
    std::copy_n(d.x.begin() + perm[r] * 4, 4, shuffled.x.begin() + r * 4);
    shuffled.y[r] = d.y[perm[r]];
  }
  const auto f2 = fit_forest(shuffled.ref(), shuffled.y, exact);
  for (std::size_t r = 0; r < d.rows; ++r) {
    const auto row = std::span(d.x).subspan(r * 4, 4);
    CHECK(predict(f1, row) == predict(f2, row));
  }
}

TEST_CASE("an all-constant column never changes predictions") {
  Rng rng(12);
  const auto d = testing::random_data(150, 3, rng);
  ForestParams p;
  p.n_trees = 10;
  p.seed = 4;
  p.max_features = ForestParams::kAllColumns;
  const auto base = fit_forest(d.ref(), d.y, p);
  for (std::size_t pos : {0u, 1u, 3u}) {
    testing::RandomData wide;
    wide.rows = d.rows;
    wide.cols = 4;
    wide.y = d.y;
    for (std::size_t r = 0; r < d.rows; ++r) {
      for (std::size_t c = 0, src = 0; c < 4; ++c)
        wide.x.push_back(c == pos ? 0.5 : d.x[r * 3 + src++]);
    }
    const auto f = fit_forest(wide.ref(), wide.y, p);
    for (std::size_t r = 0; r < d.rows; ++r)
      CHECK(predict(f, std::span(wide.x).subspan(r * 4, 4)) ==
            predict(base, std::span(d.x).subspan(r * 3, 3)));
  }
}

TEST_CASE("mse and r squared") {
  CHECK(mse(std::vector<double>{1, 2}, std::vector<double>{1, 2}) == 0.0);
  CHECK(mse(std::vector<double>{0, 1}, std::vector<double>{1, 0}) == 1.0);
  CHECK(mse(std::vector<double>{0.5, 0.5}, std::vector<double>{0, 1}) == 0.25);
  CHECK_THROWS_AS(mse(std::vector<double>{0.5}, std::vector<double>{0, 1}), ValidationError);
  CHECK(r_squared(std::vector<double>{0.5, 0.5}, std::vector<double>{0, 1}) == doctest::Approx(0.0));
  CHECK(r_squared(std::vector<double>{0, 1}, std::vector<double>{0, 1}) == 1.0);
}

TEST_CASE("no spurious fit on pure noise") {
  int better_than_variance = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    auto d = testing::random_data(400, 4, rng);
    for (auto& y : d.y) y = rng.normal();
    const auto m = matrix_of(d);
    Rng split_rng(seed + 100);
    auto [train, test] = train_test_split(m, 0.2, split_rng);
    ForestParams p;
    p.n_trees = 50;
    p.seed = seed;
    const auto f = fit_forest(train, p);
    const double mean = std::accumulate(test.y.begin(), test.y.end(), 0.0) / test.rows;
    double var = 0;
    for (double y : test.y) var += (y - mean) * (y - mean);
    var /= test.rows;
    if (mse(predict(f, matrix_ref(test)), test.y) < var) ++better_than_variance;
  }
  // one-sided sign test at 5%: 15 or more of 20 would be significant
  CHECK(better_than_variance < 15);
}

TEST_CASE("planted structure is learned") {
  const auto spec = preset_spec("planted", 1);
  const auto study = simulate_study(spec, SamplerKind::random, 800, 1);
  const auto m = encode(study);
  Rng split_rng(2);
  auto [train, test] = train_test_split(m, 0.2, split_rng);
  ForestParams p;
  p.seed = 1;
  const auto f = fit_forest(train, p);
  CHECK(r_squared(predict(f, matrix_ref(test)), test.y) >= 0.5);
}

TEST_CASE("serialization reloads bit-exactly") {
  Rng rng(13);
  const auto d = testing::random_data(100, 3, rng);
  ForestParams p;
  p.n_trees = 8;
  p.seed = 2;
  const auto f = fit_forest(d.ref(), d.y, p, {"a", "b", "c"});
  const auto doc = forest_to_json(f);
  const auto g = forest_from_json(nlohmann::json::parse(doc.dump()));
  CHECK(forest_to_json(g) == doc);
  for (std::size_t r = 0; r < d.rows; ++r) {
    const auto row = std::span(d.x).subspan(r * 3, 3);
    CHECK(predict(f, row) == predict(g, row));
  }
  CHECK(g.columns == std::vector<std::string>{"a", "b", "c"});

  auto broken = doc;
  broken["version"] = 99;
  CHECK_THROWS_AS(forest_from_json(broken), ParseError);
  broken = doc;
  broken["trees"][0]["left"][0] = 1000;
  CHECK_THROWS_AS(forest_from_json(broken), ParseError);
  CHECK_THROWS_AS(save_forest(f, "/nonexistent-dir/forest.json"), IoError);
}

TEST_CASE("invalid inputs are rejected") {
  ForestParams p;
  p.n_trees = 0;
  CHECK_THROWS_AS(p.validate(), ValidationError);
  p = {};
  p.min_samples_leaf = 0;
  CHECK_THROWS_AS(p.validate(), ValidationError);
  std::vector<double> x{1.0, NAN}, y{0.0, 1.0};
  CHECK_THROWS_AS(fit_forest(MatrixRef{x, 2, 1}, y, ForestParams{}), ValidationError);
  CHECK(ForestParams{}.features_per_split(7) == 3);
  CHECK(ForestParams{}.features_per_split(1) == 1);
}
