#pragma once

#include <iosfwd>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "tunelens/shap.hpp"
#include "tunelens/space.hpp"
#include "tunelens/stats.hpp"

namespace tunelens {

enum class BoundAction { shift_up, shift_down, expand, contract, fix_value, keep };

std::string_view to_string(BoundAction action);

struct Evidence {
  std::string statistic;
  double value = 0.0;
  std::string rule;
};

struct BoundRecommendation {
  std::string param;   // encoded column name
  std::string source;  // "histogram" or "shap"
  BoundAction action = BoundAction::keep;
  std::vector<Evidence> evidence;
  // Raw-space bounds; equal for fix_value.
  double suggested_lower = 0.0;
  double suggested_upper = 0.0;
};

struct AdvisorThresholds {
  double skew = 0.5;
  double uniform_p = 0.05;
  double expand_factor = 0.25;
  double shift_factor = 0.25;
  double fix_fraction = 0.9;
  // Share of positive-impact points a third must hold to count as concentrated.
  double concentration = 0.5;
  // Interquartile range (fraction of the width) below which a concentration
  // is treated as a single value.
  double fix_spread = 0.05;
  int n_bins = 20;
  int surface_resolution = 25;

  void validate() const;
};

/// Bounds and limits of the quantity being advised on.
struct ColumnDomain {
  std::string name;
  ParamKind kind = ParamKind::continuous;
  bool log_scale = false;
  double lower = 0.0;  // encoded
  double upper = 1.0;
  double hard_lower = -std::numeric_limits<double>::infinity();  // raw
  double hard_upper = std::numeric_limits<double>::infinity();

  static ColumnDomain of(const ParamDef& def);
  /// Length columns get the arity range with a hard floor of one slot.
  static ColumnDomain of(const Column& column, const ParamDef& def);
};

/// Histogram rules, first match wins: uniform -> expand, g1 < -t -> shift_up,
/// g1 > t -> shift_down, else keep.
BoundRecommendation advise_from_skew(const HistogramStats& h, const ColumnDomain& domain,
                                     const AdvisorThresholds& t = {});
BoundRecommendation advise_from_skew(const HistogramStats& h, const ParamDef& def,
                                     const AdvisorThresholds& t = {});

/// Rules over the positive-SHAP points, classified into thirds of the bounds.
BoundRecommendation advise_from_shap(const DependenceSeries& d, const ColumnDomain& domain,
                                     const AdvisorThresholds& t = {});
BoundRecommendation advise_from_shap(const DependenceSeries& d, const ParamDef& def,
                                     const AdvisorThresholds& t = {});

nlohmann::json recommendation_to_json(const BoundRecommendation& r);
nlohmann::json recommendations_to_json(const std::vector<BoundRecommendation>& rs);
void write_recommendations_text(std::ostream& out, const std::vector<BoundRecommendation>& rs);

}  // namespace tunelens
