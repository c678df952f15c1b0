#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "tunelens/rng.hpp"
#include "tunelens/space.hpp"
#include "tunelens/study.hpp"

namespace tunelens {

/// One truncated-Gaussian mixture component (encoded space).
struct ParzenKernel {
  double center = 0.0;
  double bandwidth = 1.0;
  double weight = 1.0;
};

/// Kernel density estimate over one encoded column.
///
/// Numeric kinds mix truncated Gaussians on [lower, upper]; categoricals carry
/// a probability per choice index. Weights are not required to be normalized
/// (density is linear in them), which keeps rescaling experiments honest.
struct ParzenEstimator {
  ParamKind kind = ParamKind::continuous;
  double lower = 0.0;
  double upper = 1.0;
  std::vector<ParzenKernel> kernels;
  std::vector<double> category_weights;

  /// Throws ValidationError when x lies outside the support.
  double density(double x) const;
  double sample(Rng& rng) const;
};

/// l(x) fitted on good trials, g(x) on the rest.
struct ParzenPair {
  ParzenEstimator good;
  ParzenEstimator bad;
};

struct TpeConfig {
  double gamma = 0.25;
  int n_startup = 10;
  int n_candidates = 24;
  double prior_weight = 1.0;
  double min_bandwidth_fraction = 1e-3;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TrialSplit {
  std::vector<std::size_t> good;
  std::vector<std::size_t> bad;
};

/// Good = top ceil(gamma * n) by objective (higher is better); ties go to the
/// earlier trial. Indices are returned in rank order for `good` and trial
/// order for `bad`.
TrialSplit split_trials(std::span<const double> objectives, double gamma);

/// Support of a column as seen by the sampler. Integer columns are widened by
/// half a unit on each side so rounding gives end points a full share.
struct Support {
  ParamKind kind = ParamKind::continuous;
  double lower = 0.0;
  double upper = 1.0;
  std::size_t n_choices = 0;
};

Support sampler_support(const Column& column, const ParamDef& def);
Support sampler_support(const ParamDef& def);

ParzenEstimator fit_parzen(std::span<const double> values, const Support& support,
                           double prior_weight, double min_bandwidth_fraction = 1e-3);
ParzenEstimator fit_parzen(std::span<const double> values, const ParamDef& def,
                           double prior_weight, double min_bandwidth_fraction = 1e-3);

double density(const ParzenEstimator& e, double x);

/// EI(x) = l(x) / g(x).
double expected_improvement(const ParzenPair& pair, double x);

/// Index of the candidate with maximal EI; ties go to the smallest value.
std::size_t argmax_expected_improvement(const ParzenPair& pair, std::span<const double> candidates);

/// Next value for one parameter (raw slot values). Uses uniform sampling while
/// the study holds fewer than n_startup trials, EI maximization afterwards.
std::vector<double> suggest(const Study& study, std::size_t param_index, const TpeConfig& cfg,
                            Rng& rng);

/// Independent per-parameter suggestion for a whole configuration.
Config suggest_config(const Study& study, const TpeConfig& cfg, Rng& rng);

/// Uniform (log-uniform for log-scale) configuration.
Config sample_uniform_config(const SearchSpace& space, Rng& rng);

}  // namespace tunelens
