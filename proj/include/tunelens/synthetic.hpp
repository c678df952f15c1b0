#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "tunelens/study.hpp"
#include "tunelens/tpe.hpp"

namespace tunelens {

enum class EffectShape { monotone_up, monotone_down, peak, step };

std::string_view to_string(EffectShape shape);
EffectShape parse_effect_shape(std::string_view text);

/// Main effect on one encoded column. Shapes act on the column's position
/// u in [0, 1] within its bounds and return values in roughly [-1, 1]:
///   monotone_up 2u-1, monotone_down 1-2u,
///   peak 1 - 2((u-center)/width)^2, step +1 above threshold else -1.
struct Effect {
  std::string column;
  EffectShape shape = EffectShape::monotone_up;
  double weight = 1.0;
  double center = 0.5;
  double width = 1.0;
  double threshold = 0.5;
};

/// Product term (2u_a - 1)(2u_b - 1).
struct Interaction {
  std::string column_a;
  std::string column_b;
  double weight = 1.0;
};

/// Planted-structure objective:
///   f = clamp(0.5 + 0.5 * (sum w_i s_i + sum w_ab s_ab) / sum |w| + noise, 0, 1)
/// with noise drawn from a generator seeded by (seed, config), so equal
/// configs always score the same.
struct SyntheticSpec {
  SearchSpace space;
  std::vector<Effect> effects;
  std::vector<Interaction> interactions;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

SyntheticSpec synthetic_spec_from_json(const nlohmann::json& doc);
nlohmann::json synthetic_spec_to_json(const SyntheticSpec& spec);
SyntheticSpec load_synthetic_spec(const std::string& path);

/// Built-in specs: "quadratic" (f = 1 - (x - 0.3)^2 on [0, 1]), "planted"
/// (A:B:C main effects 10:3:1 plus a distractor), "interaction" (a*b product
/// plus a weak main effect) and "pcl" (a planted objective over the initial
/// PCL search space).
SyntheticSpec preset_spec(std::string_view name, std::uint64_t seed = 0);
std::vector<std::string> preset_names();

double eval_synthetic(const SyntheticSpec& spec, const Config& config);

enum class SamplerKind { random, tpe };
SamplerKind parse_sampler(std::string_view text);
std::string_view to_string(SamplerKind kind);

Study simulate_study(const SyntheticSpec& spec, SamplerKind sampler, std::size_t n_trials,
                     std::uint64_t seed, const TpeConfig& tpe = {});

}  // namespace tunelens
