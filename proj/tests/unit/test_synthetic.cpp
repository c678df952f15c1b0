#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include <nlohmann/json.hpp>

#include "tunelens/error.hpp"
#include "tunelens/forest.hpp"
#include "tunelens/shap.hpp"
#include "tunelens/stats.hpp"
#include "tunelens/synthetic.hpp"

using namespace tunelens;

namespace {

SyntheticSpec one_param(std::vector<Effect> effects) {
  SyntheticSpec s;
  ParamDef x;
  x.name = "x";
  x.lower = -2.0;
  x.upper = 6.0;
  s.space.params = {x};
  s.effects = std::move(effects);
  return s;
}

SyntheticSpec pair_only() {
  SyntheticSpec s;
  ParamDef a, b;
  a.name = "a";
  b.name = "b";
  s.space.params = {a, b};
  s.interactions = {{"a", "b", 2.0}};
  return s;
}

}  // namespace

TEST_CASE("zero weights and no noise give the midpoint") {
  auto s = one_param({{"x", EffectShape::monotone_up, 0.0}});
  CHECK(eval_synthetic(s, {{1.0}}) == 0.5);
  s.effects.clear();
  CHECK(eval_synthetic(s, {{5.0}}) == 0.5);
}

TEST_CASE("a monotone effect peaks at its upper bound") {
  const auto up = one_param({{"x", EffectShape::monotone_up, 2.0}});
  CHECK(eval_synthetic(up, {{6.0}}) == doctest::Approx(1.0));
  CHECK(eval_synthetic(up, {{-2.0}}) == doctest::Approx(0.0));
  for (double v = -2.0; v < 6.0; v += 0.5) CHECK(eval_synthetic(up, {{v}}) <= eval_synthetic(up, {{6.0}}));

  const auto down = one_param({{"x", EffectShape::monotone_down, 1.0}});
  CHECK(eval_synthetic(down, {{-2.0}}) == doctest::Approx(1.0));

  const auto step = one_param({{"x", EffectShape::step, 1.0, 0.5, 1.0, 0.25}});
  CHECK(eval_synthetic(step, {{-1.0}}) == 0.0);
  CHECK(eval_synthetic(step, {{1.0}}) == 1.0);
}

TEST_CASE("an interaction rewards matching corners") {
  const auto s = pair_only();
  CHECK(eval_synthetic(s, {{1.0}, {1.0}}) > eval_synthetic(s, {{1.0}, {0.0}}));
  CHECK(eval_synthetic(s, {{0.0}, {0.0}}) == doctest::Approx(1.0));
  CHECK(eval_synthetic(s, {{0.5}, {0.9}}) == doctest::Approx(0.5));
}

TEST_CASE("the quadratic preset is 1 - (x - 0.3)^2") {
  const auto s = preset_spec("quadratic");
  for (double x = 0.0; x <= 1.0; x += 0.05)
    CHECK(eval_synthetic(s, {{x}}) == doctest::Approx(1.0 - (x - 0.3) * (x - 0.3)));
}

TEST_CASE("noise depends only on the objective seed and the config") {
  auto s = preset_spec("planted", 11);
  const Config c{{0.2}, {0.4}, {0.6}, {0.8}};
  const double v = eval_synthetic(s, c);
  CHECK(eval_synthetic(s, c) == v);
  CHECK(eval_synthetic(preset_spec("planted", 11), c) == v);
  CHECK(eval_synthetic(preset_spec("planted", 12), c) != v);
  s.noise_sigma = 5.0;
  for (double a = 0.0; a <= 1.0; a += 0.1) {
    const double f = eval_synthetic(s, {{a}, {0.4}, {0.6}, {0.8}});
    CHECK(f >= 0.0);
    CHECK(f <= 1.0);
  }
}

TEST_CASE("simulated studies are deterministic and in bounds") {
  for (const auto& name : preset_names()) {
    CAPTURE(name);
    const auto spec = preset_spec(name, 3);
    const auto a = simulate_study(spec, SamplerKind::random, 800, 9);
    const auto b = simulate_study(spec, SamplerKind::random, 800, 9);
    REQUIRE(a.trials.size() == 800);
    for (std::size_t i = 0; i < a.trials.size(); ++i) {
      CHECK_NOTHROW(validate_config(spec.space, a.trials[i].config, a.trials[i].trial_id));
      CHECK(a.trials[i].config == b.trials[i].config);
      CHECK(a.trials[i].objective == b.trials[i].objective);
      CHECK(a.trials[i].objective >= 0.0);
      CHECK(a.trials[i].objective <= 1.0);
    }
    const auto c = simulate_study(spec, SamplerKind::random, 800, 10);
    CHECK(c.trials[0].config != a.trials[0].config);
  }
  const auto spec = preset_spec("quadratic", 1);
  TpeConfig tpe;
  tpe.n_startup = 10;
  const auto t1 = simulate_study(spec, SamplerKind::tpe, 40, 2, tpe);
  const auto t2 = simulate_study(spec, SamplerKind::tpe, 40, 2, tpe);
  for (std::size_t i = 0; i < 40; ++i) CHECK(t1.trials[i].config == t2.trials[i].config);
}

TEST_CASE("specs round trip through JSON and reject bad input") {
  const auto spec = preset_spec("pcl", 5);
  const auto back = synthetic_spec_from_json(synthetic_spec_to_json(spec));
  CHECK(synthetic_spec_to_json(back) == synthetic_spec_to_json(spec));
  const Config c = simulate_study(spec, SamplerKind::random, 1, 4).trials[0].config;
  CHECK(eval_synthetic(back, c) == eval_synthetic(spec, c));

  auto doc = synthetic_spec_to_json(pair_only());
  doc["interactions"][0]["param_b"] = "missing";
  CHECK_THROWS_AS(synthetic_spec_from_json(doc), ValidationError);
  auto bad_shape = synthetic_spec_to_json(one_param({{"x", EffectShape::peak, 1.0}}));
  bad_shape["effects"][0]["shape"] = "wiggle";
  CHECK_THROWS(synthetic_spec_from_json(bad_shape));
  CHECK_THROWS_AS(synthetic_spec_from_json(nlohmann::json{{"effects", 3}}), ParseError);
  CHECK_THROWS_AS(preset_spec("nope"), ValidationError);
  CHECK_THROWS_AS(simulate_study(pair_only(), SamplerKind::random, 0, 1), ValidationError);
  CHECK_THROWS_AS(eval_synthetic(pair_only(), {{0.5}}), ValidationError);
}

// Reduced-size versions of the recovery checks; the acceptance binary runs
// the full 20-seed protocol at default forest settings.
TEST_CASE("planted weights are recovered by SHAP ranking and correlation signs") {
  int a_first = 0, signs_ok = 0;
  const int seeds = 6;
  for (int s = 0; s < seeds; ++s) {
    const auto spec = preset_spec("planted", static_cast<std::uint64_t>(s));
    const auto m = encode(simulate_study(spec, SamplerKind::random, 800, 100 + s));
    ForestParams params;
    params.n_trees = 40;
    params.seed = static_cast<std::uint64_t>(s);
    const auto forest = fit_forest(m, params);
    const auto ranking = rank_features(explain_all(forest, matrix_ref(m), m.trial_ids));
    if (ranking[0].column == "A") ++a_first;
    const auto r = objective_correlation(matrix_ref(m), m.y);
    if (r[0] && *r[0] > 0 && r[1] && *r[1] < 0 && r[2] && *r[2] > 0) ++signs_ok;
  }
  CHECK(a_first == seeds);
  CHECK(signs_ok == seeds);
}

TEST_CASE("a planted interaction is found as the dependence partner") {
  int hits = 0;
  const int seeds = 20;
  for (int s = 0; s < seeds; ++s) {
    const auto spec = preset_spec("interaction", static_cast<std::uint64_t>(s));
    const auto study = simulate_study(spec, SamplerKind::random, 800, 500 + s);
    const auto m = encode(filter_by_objective(study, 0.8));
    if (select_interaction(matrix_ref(m), m.column_index("a")).column == m.column_index("b")) ++hits;
  }
  CHECK(hits >= 18);
}
