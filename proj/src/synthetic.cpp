#include "tunelens/synthetic.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "tunelens/error.hpp"

namespace tunelens {

using nlohmann::json;

std::string_view to_string(EffectShape shape) {
  switch (shape) {
    case EffectShape::monotone_up: return "monotone_up";
    case EffectShape::monotone_down: return "monotone_down";
    case EffectShape::peak: return "peak";
    case EffectShape::step: return "step";
  }
  return "monotone_up";
}

EffectShape parse_effect_shape(std::string_view text) {
  if (text == "monotone_up") return EffectShape::monotone_up;
  if (text == "monotone_down") return EffectShape::monotone_down;
  if (text == "peak") return EffectShape::peak;
  if (text == "step") return EffectShape::step;
  throw ValidationError("unknown effect shape '" + std::string(text) + "'");
}

SamplerKind parse_sampler(std::string_view text) {
  if (text == "random") return SamplerKind::random;
  if (text == "tpe") return SamplerKind::tpe;
  throw ValidationError("unknown sampler '" + std::string(text) + "'");
}

std::string_view to_string(SamplerKind kind) {
  return kind == SamplerKind::tpe ? "tpe" : "random";
}

namespace {

std::size_t column_of(const std::vector<Column>& columns, const std::string& name) {
  for (std::size_t i = 0; i < columns.size(); ++i)
    if (columns[i].name == name) return i;
  throw ValidationError("synthetic spec references unknown column '" + name + "'");
}

double position(const Column& c, double encoded) {
  return c.upper > c.lower ? std::clamp((encoded - c.lower) / (c.upper - c.lower), 0.0, 1.0) : 0.5;
}

double shape_value(const Effect& e, double u) {
  switch (e.shape) {
    case EffectShape::monotone_up: return 2.0 * u - 1.0;
    case EffectShape::monotone_down: return 1.0 - 2.0 * u;
    case EffectShape::peak: {
      const double z = (u - e.center) / e.width;
      return 1.0 - 2.0 * z * z;
    }
    case EffectShape::step: return u > e.threshold ? 1.0 : -1.0;
  }
  return 0.0;
}

std::uint64_t config_hash(std::uint64_t seed, const std::vector<double>& row) {
  std::uint64_t h = 0xcbf29ce484222325ULL ^ mix_seed(seed);
  for (double v : row) {
    const auto bits = std::bit_cast<std::uint64_t>(v == 0.0 ? 0.0 : v);
    for (int b = 0; b < 8; ++b) {
      h ^= (bits >> (8 * b)) & 0xffu;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

ParamDef continuous(std::string name, double lo, double hi, bool log = false) {
  ParamDef p;
  p.name = std::move(name);
  p.lower = lo;
  p.upper = hi;
  p.log_scale = log;
  return p;
}

ParamDef integer(std::string name, double lo, double hi, int arity_min = 1, int arity_max = 1) {
  ParamDef p = continuous(std::move(name), lo, hi);
  p.kind = ParamKind::integer;
  p.arity_min = arity_min;
  p.arity_max = arity_max;
  return p;
}

}  // namespace

void SyntheticSpec::validate() const {
  space.validate();
  const auto columns = space.columns();
  double total = 0.0;
  for (const auto& e : effects) {
    column_of(columns, e.column);
    if (!std::isfinite(e.weight)) throw ValidationError("effect weight must be finite");
    if (e.shape == EffectShape::peak && !(e.width > 0.0))
      throw ValidationError("peak width must be positive");
    total += std::abs(e.weight);
  }
  for (const auto& i : interactions) {
    column_of(columns, i.column_a);
    column_of(columns, i.column_b);
    if (!std::isfinite(i.weight)) throw ValidationError("interaction weight must be finite");
    total += std::abs(i.weight);
  }
  if (!std::isfinite(total)) throw ValidationError("effect weights overflow");
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma))
    throw ValidationError("noise_sigma must be a finite non-negative number");
}

SyntheticSpec synthetic_spec_from_json(const json& doc) {
  SyntheticSpec spec;
  try {
    spec.space = space_from_json(doc.at("space"));
    for (const auto& j : doc.value("effects", json::array())) {
      Effect e;
      e.column = j.at("param").get<std::string>();
      e.shape = parse_effect_shape(j.at("shape").get<std::string>());
      e.weight = j.value("weight", 1.0);
      e.center = j.value("center", 0.5);
      e.width = j.value("width", 1.0);
      e.threshold = j.value("threshold", 0.5);
      spec.effects.push_back(std::move(e));
    }
    for (const auto& j : doc.value("interactions", json::array()))
      spec.interactions.push_back({j.at("param_a").get<std::string>(),
                                   j.at("param_b").get<std::string>(), j.value("weight", 1.0)});
    spec.noise_sigma = doc.value("noise_sigma", 0.0);
    spec.seed = doc.value("seed", std::uint64_t{0});
  } catch (const json::exception& e) {
    throw ParseError(std::string("synthetic spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

json synthetic_spec_to_json(const SyntheticSpec& spec) {
  json effects = json::array();
  for (const auto& e : spec.effects) {
    json j{{"param", e.column}, {"shape", std::string(to_string(e.shape))}, {"weight", e.weight}};
    if (e.shape == EffectShape::peak) {
      j["center"] = e.center;
      j["width"] = e.width;
    }
    if (e.shape == EffectShape::step) j["threshold"] = e.threshold;
    effects.push_back(std::move(j));
  }
  json interactions = json::array();
  for (const auto& i : spec.interactions)
    interactions.push_back({{"param_a", i.column_a}, {"param_b", i.column_b}, {"weight", i.weight}});
  return json{{"space", space_to_json(spec.space)},
              {"effects", std::move(effects)},
              {"interactions", std::move(interactions)},
              {"noise_sigma", spec.noise_sigma},
              {"seed", spec.seed}};
}

SyntheticSpec load_synthetic_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open synthetic spec '" + path + "'");
  try {
    return synthetic_spec_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw ParseError("synthetic spec '" + path + "': " + e.what());
  }
}

std::vector<std::string> preset_names() { return {"quadratic", "planted", "interaction", "pcl"}; }

SyntheticSpec preset_spec(std::string_view name, std::uint64_t seed) {
  SyntheticSpec s;
  s.seed = seed;
  if (name == "quadratic") {
    s.space.params = {continuous("x", 0.0, 1.0)};
    s.effects = {{"x", EffectShape::peak, 1.0, 0.3, 1.0, 0.5}};
  } else if (name == "planted") {
    s.space.params = {continuous("A", 0.0, 1.0), continuous("B", 0.0, 1.0),
                      continuous("C", 0.0, 1.0), continuous("D", 0.0, 1.0)};
    s.effects = {{"A", EffectShape::monotone_up, 10.0},
                 {"B", EffectShape::monotone_down, 3.0},
                 {"C", EffectShape::monotone_up, 1.0}};
    s.noise_sigma = 0.01;
  } else if (name == "interaction") {
    s.space.params = {continuous("a", 0.0, 1.0), continuous("b", 0.0, 1.0),
                      continuous("c", 0.0, 1.0), continuous("d", 0.0, 1.0)};
    s.interactions = {{"a", "b", 4.0}};
    s.effects = {{"c", EffectShape::monotone_up, 1.0}};
    s.noise_sigma = 0.01;
  } else if (name == "pcl") {
    auto q_lower = continuous("q_lower", 0.5, 0.8);
    q_lower.hard_lower = 0.0;
    q_lower.hard_upper = 1.0;
    auto q_upper = continuous("q_upper", 0.8, 0.99);
    q_upper.hard_lower = 0.0;
    q_upper.hard_upper = 1.0;
    auto lr = continuous("learning_rate", 1e-5, 0.1, true);
    lr.hard_lower = 0.0;
    auto sac_lr = continuous("sac_learning_rate", 5e-6, 5e-5, true);
    sac_lr.hard_lower = 0.0;
    s.space.params = {integer("num_mixtures", 1, 10),
                      integer("hidden_layers", 64, 512, 1, 3),
                      lr,
                      continuous("lambda_1", 0.8, 1.0),
                      integer("number_of_samples", 100, 1000),
                      q_lower,
                      q_upper,
                      integer("sac_hidden_layers", 64, 1024, 2, 3),
                      sac_lr};
    s.effects = {{"q_lower", EffectShape::monotone_up, 6.0},
                 {"sac_learning_rate", EffectShape::monotone_up, 3.0},
                 {"hidden_layers.len", EffectShape::monotone_up, 2.0},
                 {"q_upper", EffectShape::peak, 1.5, 0.3, 0.8, 0.5},
                 {"learning_rate", EffectShape::peak, 1.0, 0.6, 0.7, 0.5}};
    s.interactions = {{"q_lower", "number_of_samples", 1.5}};
    s.noise_sigma = 0.03;
  } else {
    throw ValidationError("unknown preset '" + std::string(name) + "'");
  }
  s.validate();
  return s;
}

double eval_synthetic(const SyntheticSpec& spec, const Config& config) {
  validate_config(spec.space, config, "synthetic");
  const auto columns = spec.space.columns();
  const auto row = encode_config(spec.space, config);
  const auto u = [&](const std::string& name) {
    const auto c = column_of(columns, name);
    return position(columns[c], row[c]);
  };
  double signal = 0.0;
  double total_weight = 0.0;
  for (const auto& e : spec.effects) {
    signal += e.weight * shape_value(e, u(e.column));
    total_weight += std::abs(e.weight);
  }
  for (const auto& i : spec.interactions) {
    signal += i.weight * (2.0 * u(i.column_a) - 1.0) * (2.0 * u(i.column_b) - 1.0);
    total_weight += std::abs(i.weight);
  }
  double f = total_weight > 0.0 ? 0.5 + 0.5 * signal / total_weight : 0.5;
  if (spec.noise_sigma > 0.0) {
    Rng noise(config_hash(spec.seed, row));
    f += noise.normal(0.0, spec.noise_sigma);
  }
  return std::clamp(f, 0.0, 1.0);
}

Study simulate_study(const SyntheticSpec& spec, SamplerKind sampler, std::size_t n_trials,
                     std::uint64_t seed, const TpeConfig& tpe) {
  if (n_trials < 1) throw ValidationError("simulation needs at least one trial");
  spec.validate();
  tpe.validate();
  Rng rng(seed);
  Study study{spec.space, {}};
  study.trials.reserve(n_trials);
  for (std::size_t i = 0; i < n_trials; ++i) {
    TrialRecord t;
    t.trial_id = "trial-" + std::to_string(i);
    t.config = sampler == SamplerKind::tpe ? suggest_config(study, tpe, rng)
                                           : sample_uniform_config(spec.space, rng);
    t.objective = eval_synthetic(spec, t.config);
    t.tags = json{{"sampler", std::string(to_string(sampler))}, {"seed", seed}};
    study.trials.push_back(std::move(t));
  }
  return study;
}

}  // namespace tunelens
