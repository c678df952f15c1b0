#include "tunelens/tpe.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "tunelens/error.hpp"

namespace tunelens {

namespace {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double truncated_normal_pdf(double x, double center, double bandwidth, double lo, double hi) {
  const double z = (x - center) / bandwidth;
  const double mass = normal_cdf((hi - center) / bandwidth) - normal_cdf((lo - center) / bandwidth);
  const double pdf = std::exp(-0.5 * z * z) / (bandwidth * std::sqrt(2.0 * std::numbers::pi));
  return pdf / mass;
}

double sample_truncated_normal(Rng& rng, double center, double bandwidth, double lo, double hi) {
  for (int attempt = 0; attempt < 10000; ++attempt) {
    const double v = rng.normal(center, bandwidth);
    if (v >= lo && v <= hi) return v;
  }
  return std::clamp(center, lo, hi);
}

std::size_t sample_index(Rng& rng, std::span<const double> weights) {
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  double u = rng.uniform() * total;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (u < weights[i]) return i;
    u -= weights[i];
  }
  return weights.size() - 1;
}

double sample_uniform(const Support& s, Rng& rng) {
  if (s.kind == ParamKind::categorical) return static_cast<double>(rng.below(s.n_choices));
  return rng.uniform(s.lower, s.upper);
}

// Encoded sampler value -> raw slot value within the declared bounds.
double to_raw(double encoded, const ParamDef& def) {
  if (def.kind == ParamKind::categorical)
    return std::clamp(std::round(encoded), 0.0, static_cast<double>(def.choices.size() - 1));
  double raw = def.log_scale ? std::pow(10.0, encoded) : encoded;
  if (def.kind == ParamKind::integer) raw = std::round(raw);
  return std::clamp(raw, def.lower, def.upper);
}

Support length_support(const ParamDef& def) {
  return {ParamKind::integer, def.arity_min - 0.5, def.arity_max + 0.5, 0};
}

int to_length(double encoded, const ParamDef& def) {
  return std::clamp(static_cast<int>(std::lround(encoded)), def.arity_min, def.arity_max);
}

double suggest_value(std::span<const double> good, std::span<const double> bad,
                     const Support& support, const TpeConfig& cfg, Rng& rng) {
  ParzenPair pair{fit_parzen(good, support, cfg.prior_weight, cfg.min_bandwidth_fraction),
                  fit_parzen(bad, support, cfg.prior_weight, cfg.min_bandwidth_fraction)};
  std::vector<double> candidates(static_cast<std::size_t>(cfg.n_candidates));
  for (auto& c : candidates) c = pair.good.sample(rng);
  return candidates[argmax_expected_improvement(pair, candidates)];
}

}  // namespace

void TpeConfig::validate() const {
  if (!(gamma > 0.0 && gamma < 1.0)) throw ValidationError("TPE gamma must lie in (0, 1)");
  if (n_startup < 1) throw ValidationError("TPE n_startup must be >= 1");
  if (n_candidates < 1) throw ValidationError("TPE n_candidates must be >= 1");
  if (prior_weight < 0.0) throw ValidationError("TPE prior_weight must be >= 0");
}

double ParzenEstimator::density(double x) const {
  if (kind == ParamKind::categorical) {
    const double idx = std::round(x);
    if (idx != x || idx < 0 || idx >= static_cast<double>(category_weights.size()))
      throw ValidationError("categorical index outside the support");
    return category_weights[static_cast<std::size_t>(idx)];
  }
  if (!(x >= lower && x <= upper)) throw ValidationError("density evaluated outside the support");
  double sum = 0.0;
  for (const auto& k : kernels)
    sum += k.weight * truncated_normal_pdf(x, k.center, k.bandwidth, lower, upper);
  return sum;
}

double ParzenEstimator::sample(Rng& rng) const {
  if (kind == ParamKind::categorical)
    return static_cast<double>(sample_index(rng, category_weights));
  std::vector<double> weights(kernels.size());
  std::transform(kernels.begin(), kernels.end(), weights.begin(),
                 [](const ParzenKernel& k) { return k.weight; });
  const auto& k = kernels[sample_index(rng, weights)];
  return sample_truncated_normal(rng, k.center, k.bandwidth, lower, upper);
}

TrialSplit split_trials(std::span<const double> objectives, double gamma) {
  const std::size_t n = objectives.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return objectives[a] > objectives[b]; });
  const auto n_good =
      std::min(n, static_cast<std::size_t>(std::ceil(gamma * static_cast<double>(n))));
  TrialSplit split;
  split.good.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_good));
  split.bad.assign(order.begin() + static_cast<std::ptrdiff_t>(n_good), order.end());
  std::sort(split.bad.begin(), split.bad.end());
  return split;
}

Support sampler_support(const Column& column, const ParamDef& def) {
  if (column.kind == ParamKind::categorical)
    return {ParamKind::categorical, 0.0, column.upper, def.choices.size()};
  if (column.is_length()) return length_support(def);
  if (column.kind == ParamKind::integer) {
    if (def.log_scale)
      return {ParamKind::integer, std::log10(def.lower - 0.5), std::log10(def.upper + 0.5), 0};
    return {ParamKind::integer, def.lower - 0.5, def.upper + 0.5, 0};
  }
  return {ParamKind::continuous, column.lower, column.upper, 0};
}

Support sampler_support(const ParamDef& def) {
  Column c{def.name, 0, 0, def.kind, def.encoded_lower(), def.encoded_upper(), def.log_scale};
  return sampler_support(c, def);
}

ParzenEstimator fit_parzen(std::span<const double> values, const Support& support,
                           double prior_weight, double min_bandwidth_fraction) {
  if (values.empty() && prior_weight <= 0.0)
    throw ValidationError("Parzen estimator needs observations or a prior");
  ParzenEstimator e;
  e.kind = support.kind;
  e.lower = support.lower;
  e.upper = support.upper;
  if (support.kind == ParamKind::categorical) {
    e.category_weights.assign(support.n_choices, prior_weight / static_cast<double>(support.n_choices));
    for (double v : values) e.category_weights.at(static_cast<std::size_t>(v)) += 1.0;
    const double total =
        std::accumulate(e.category_weights.begin(), e.category_weights.end(), 0.0);
    for (auto& w : e.category_weights) w /= total;
    return e;
  }
  const double width = support.upper - support.lower;
  const double n = static_cast<double>(values.size());
  const double bandwidth = std::max(width / (1.0 + n), min_bandwidth_fraction * width);
  const double total = n + prior_weight;
  for (double v : values) {
    if (v < support.lower || v > support.upper)
      throw ValidationError("Parzen observation outside the support");
    e.kernels.push_back({v, bandwidth, 1.0 / total});
  }
  if (prior_weight > 0.0)
    e.kernels.push_back({0.5 * (support.lower + support.upper), width, prior_weight / total});
  return e;
}

ParzenEstimator fit_parzen(std::span<const double> values, const ParamDef& def,
                           double prior_weight, double min_bandwidth_fraction) {
  return fit_parzen(values, sampler_support(def), prior_weight, min_bandwidth_fraction);
}

double density(const ParzenEstimator& e, double x) { return e.density(x); }

double expected_improvement(const ParzenPair& pair, double x) {
  return pair.good.density(x) / pair.bad.density(x);
}

std::size_t argmax_expected_improvement(const ParzenPair& pair, std::span<const double> candidates) {
  if (candidates.empty()) throw ValidationError("no EI candidates");
  std::size_t best = 0;
  double best_score = expected_improvement(pair, candidates[0]);
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    const double score = expected_improvement(pair, candidates[i]);
    if (score > best_score || (score == best_score && candidates[i] < candidates[best])) {
      best = i;
      best_score = score;
    }
  }
  return best;
}

std::vector<double> suggest(const Study& study, std::size_t param_index, const TpeConfig& cfg,
                            Rng& rng) {
  const auto& def = study.space.params.at(param_index);
  const Support slot = sampler_support(def);
  std::vector<double> out;

  if (study.trials.size() < static_cast<std::size_t>(cfg.n_startup)) {
    const int len = def.variable_arity() ? to_length(sample_uniform(length_support(def), rng), def)
                                         : def.arity_max;
    for (int k = 0; k < len; ++k) out.push_back(to_raw(sample_uniform(slot, rng), def));
    return out;
  }

  std::vector<double> objectives;
  objectives.reserve(study.trials.size());
  for (const auto& t : study.trials) objectives.push_back(t.objective);
  const auto split = split_trials(objectives, cfg.gamma);

  const auto encoded = [&](double raw) { return def.numeric() ? def.encode(raw) : raw; };
  const auto gather = [&](const std::vector<std::size_t>& idx, int k) {
    std::vector<double> v;
    for (auto i : idx) {
      const auto& values = study.trials[i].config[param_index];
      if (k < 0)
        v.push_back(static_cast<double>(values.size()));
      else if (k < static_cast<int>(values.size()))
        v.push_back(encoded(values[static_cast<std::size_t>(k)]));
    }
    return v;
  };

  int len = def.arity_max;
  if (def.variable_arity())
    len = to_length(suggest_value(gather(split.good, -1), gather(split.bad, -1),
                                  length_support(def), cfg, rng),
                    def);
  for (int k = 0; k < len; ++k) {
    out.push_back(to_raw(suggest_value(gather(split.good, k), gather(split.bad, k), slot, cfg, rng),
                         def));
  }
  return out;
}

Config suggest_config(const Study& study, const TpeConfig& cfg, Rng& rng) {
  Config config(study.space.params.size());
  for (std::size_t i = 0; i < config.size(); ++i) config[i] = suggest(study, i, cfg, rng);
  return config;
}

Config sample_uniform_config(const SearchSpace& space, Rng& rng) {
  Study empty{space, {}};
  TpeConfig cfg;
  cfg.n_startup = 1;
  return suggest_config(empty, cfg, rng);
}

}  // namespace tunelens
