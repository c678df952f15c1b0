#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "tunelens/forest.hpp"
#include "tunelens/rng.hpp"
#include "tunelens/space.hpp"
#include "tunelens/study.hpp"

namespace testing {

inline tunelens::ParamDef real_param(std::string name, double lo, double hi, bool log = false) {
  tunelens::ParamDef p;
  p.name = std::move(name);
  p.lower = lo;
  p.upper = hi;
  p.log_scale = log;
  return p;
}

inline tunelens::ParamDef int_param(std::string name, double lo, double hi, int amin = 1,
                                    int amax = 1) {
  auto p = real_param(std::move(name), lo, hi);
  p.kind = tunelens::ParamKind::integer;
  p.arity_min = amin;
  p.arity_max = amax;
  return p;
}

inline tunelens::ParamDef cat_param(std::string name, std::vector<std::string> choices) {
  tunelens::ParamDef p;
  p.name = std::move(name);
  p.kind = tunelens::ParamKind::categorical;
  p.choices = std::move(choices);
  return p;
}

inline tunelens::TrialRecord trial(std::string id, tunelens::Config config, double objective) {
  return {std::move(id), std::move(config), objective, nlohmann::json::object()};
}

// Study over `p` continuous [0,1] columns with uniform random configs.
inline tunelens::Study uniform_study(std::size_t p, std::size_t n, std::uint64_t seed) {
  tunelens::Study s;
  for (std::size_t c = 0; c < p; ++c) s.space.params.push_back(real_param("x" + std::to_string(c), 0, 1));
  tunelens::Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    tunelens::Config cfg;
    for (std::size_t c = 0; c < p; ++c) cfg.push_back({rng.uniform()});
    s.trials.push_back(trial("t" + std::to_string(i), cfg, rng.uniform()));
  }
  return s;
}

// Row-major random matrix with an arbitrary target; a few columns are
// quantized so trees see repeated values and ties.
struct RandomData {
  std::vector<double> x;
  std::vector<double> y;
  std::size_t rows = 0;
  std::size_t cols = 0;
  tunelens::MatrixRef ref() const { return {x, rows, cols}; }
};

inline RandomData random_data(std::size_t rows, std::size_t cols, tunelens::Rng& rng) {
  RandomData d;
  d.rows = rows;
  d.cols = cols;
  for (std::size_t r = 0; r < rows; ++r) {
    double t = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      double v = rng.uniform();
      if (c % 3 == 2) v = std::floor(v * 4.0) / 4.0;
      d.x.push_back(v);
      t += (c % 2 ? -1.0 : 1.0) * v * static_cast<double>(c + 1);
    }
    d.y.push_back(t + 0.3 * rng.normal());
  }
  return d;
}

}  // namespace testing

namespace testing {

// Forest grown on random data with random hyper-parameters; used as a
// source of arbitrary tree shapes for attribution checks.
inline tunelens::RegressionForest random_forest(tunelens::Rng& rng, std::size_t max_p,
                                                int max_trees, int max_depth) {
  const std::size_t p = 1 + rng.below(max_p);
  const auto d = random_data(40 + rng.below(120), p, rng);
  tunelens::ForestParams params;
  params.n_trees = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_trees)));
  params.max_depth = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_depth)));
  params.min_samples_leaf = 1 + static_cast<int>(rng.below(3));
  params.max_features = rng.uniform() < 0.5 ? tunelens::ForestParams::kAllColumns
                                            : tunelens::ForestParams::kThirdOfColumns;
  params.bootstrap = rng.uniform() < 0.7;
  params.seed = rng.next_u64();
  params.n_threads = 1;
  return tunelens::fit_forest(d.ref(), d.y, params);
}

}  // namespace testing
