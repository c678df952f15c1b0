#include "tunelens/advisor.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <tuple>
#include <ostream>

#include <nlohmann/json.hpp>

#include "tunelens/csv.hpp"
#include "tunelens/error.hpp"

namespace tunelens {

using nlohmann::json;

std::string_view to_string(BoundAction action) {
  switch (action) {
    case BoundAction::shift_up: return "shift_up";
    case BoundAction::shift_down: return "shift_down";
    case BoundAction::expand: return "expand";
    case BoundAction::contract: return "contract";
    case BoundAction::fix_value: return "fix_value";
    case BoundAction::keep: return "keep";
  }
  return "keep";
}

void AdvisorThresholds::validate() const {
  if (skew < 0 || uniform_p < 0 || uniform_p > 1 || expand_factor < 0 || shift_factor < 0)
    throw ValidationError("advisor thresholds must be non-negative (uniform_p in [0, 1])");
  if (fix_fraction <= 0 || fix_fraction > 1 || concentration <= 0 || concentration > 1)
    throw ValidationError("advisor fractions must lie in (0, 1]");
  if (n_bins < 2 || surface_resolution < 2)
    throw ValidationError("n_bins and surface_resolution must be >= 2");
}

ColumnDomain ColumnDomain::of(const ParamDef& def) {
  return {def.name,         def.kind,         def.log_scale,  def.encoded_lower(),
          def.encoded_upper(), def.hard_lower, def.hard_upper};
}

ColumnDomain ColumnDomain::of(const Column& column, const ParamDef& def) {
  if (column.is_length())
    return {column.name, ParamKind::integer, false, column.lower, column.upper, 1.0,
            std::numeric_limits<double>::infinity()};
  auto d = of(def);
  d.name = column.name;
  return d;
}

namespace {

double decode(const ColumnDomain& d, double encoded) {
  return d.log_scale ? std::pow(10.0, encoded) : encoded;
}

// Raw bounds for an encoded interval, clamped to hard limits and rounded
// outward for integers.
std::pair<double, double> finalize_bounds(const ColumnDomain& d, double lo, double hi) {
  double raw_lo = std::max(decode(d, lo), d.hard_lower);
  double raw_hi = std::min(decode(d, hi), d.hard_upper);
  if (d.kind == ParamKind::integer) {
    raw_lo = std::floor(raw_lo);
    raw_hi = std::ceil(raw_hi);
  }
  return {raw_lo, raw_hi};
}

BoundRecommendation make(const ColumnDomain& d, std::string source, BoundAction action,
                         std::vector<Evidence> evidence, double lo, double hi) {
  BoundRecommendation r;
  r.param = d.name;
  r.source = std::move(source);
  r.action = action;
  r.evidence = std::move(evidence);
  std::tie(r.suggested_lower, r.suggested_upper) = finalize_bounds(d, lo, hi);
  if (action != BoundAction::fix_value && action != BoundAction::keep &&
      !(r.suggested_lower < r.suggested_upper)) {
    r.evidence.push_back({"hard_limit", 0.0, "suggestion collapsed against hard limits; kept"});
    r.action = BoundAction::keep;
    std::tie(r.suggested_lower, r.suggested_upper) = finalize_bounds(d, d.lower, d.upper);
  }
  return r;
}

double quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto i = static_cast<std::size_t>(std::floor(pos));
  const double frac = pos - static_cast<double>(i);
  return i + 1 < v.size() ? v[i] + frac * (v[i + 1] - v[i]) : v[i];
}

}  // namespace

BoundRecommendation advise_from_skew(const HistogramStats& h, const ColumnDomain& d,
                                     const AdvisorThresholds& t) {
  const double lo = d.lower;
  const double hi = d.upper;
  const double w = hi - lo;
  std::vector<Evidence> ev{{"skew", h.skew, ""}, {"uniform_p", h.uniform_p, ""}};
  const auto fire = [&](BoundAction a, std::string rule, double new_lo, double new_hi) {
    for (auto& e : ev) e.rule = rule;
    return make(d, "histogram", a, ev, new_lo, new_hi);
  };
  if (d.kind == ParamKind::categorical)
    return fire(BoundAction::keep, "categorical parameter: bounds not ordered", lo, hi);
  if (h.uniform_p > t.uniform_p)
    return fire(BoundAction::expand, "uniform_p > " + csv::number(t.uniform_p) + ": expand",
                lo - t.expand_factor * w, hi + t.expand_factor * w);
  if (h.skew < -t.skew)
    return fire(BoundAction::shift_up, "skew < -" + csv::number(t.skew) + ": shift up",
                lo + t.shift_factor * w, hi + t.shift_factor * w);
  if (h.skew > t.skew)
    return fire(BoundAction::shift_down, "skew > " + csv::number(t.skew) + ": shift down",
                lo - t.shift_factor * w, hi - t.shift_factor * w);
  return fire(BoundAction::keep, "no rule fired", lo, hi);
}

BoundRecommendation advise_from_skew(const HistogramStats& h, const ParamDef& def,
                                     const AdvisorThresholds& t) {
  return advise_from_skew(h, ColumnDomain::of(def), t);
}

BoundRecommendation advise_from_shap(const DependenceSeries& series, const ColumnDomain& d,
                                     const AdvisorThresholds& t) {
  if (series.points.empty()) throw ValidationError("dependence series is empty");
  const double lo = d.lower;
  const double hi = d.upper;
  const double w = hi - lo;

  std::vector<double> positive;
  for (const auto& p : series.points)
    if (p.shap_value > 0.0) positive.push_back(p.feature_value);
  if (positive.empty())
    return make(d, "shap", BoundAction::keep,
                {{"positive_points", 0.0, "no positive-impact observations"}}, lo, hi);
  if (d.kind == ParamKind::categorical)
    return make(d, "shap", BoundAction::keep,
                {{"positive_points", static_cast<double>(positive.size()),
                  "categorical parameter: bounds not ordered"}},
                lo, hi);

  std::array<std::size_t, 3> thirds{0, 0, 0};
  for (double v : positive) {
    const int k = std::clamp(static_cast<int>((v - lo) / w * 3.0), 0, 2);
    ++thirds[static_cast<std::size_t>(k)];
  }
  const auto modal = static_cast<std::size_t>(
      std::max_element(thirds.begin(), thirds.end()) - thirds.begin());
  const double n = static_cast<double>(positive.size());
  const double concentration = static_cast<double>(thirds[modal]) / n;
  const double spread = (quantile(positive, 0.75) - quantile(positive, 0.25)) / w;

  std::vector<Evidence> ev{
      {"positive_fraction", n / static_cast<double>(series.points.size()), ""},
      {"modal_third", static_cast<double>(modal), ""},
      {"concentration", concentration, ""},
      {"iqr_fraction", spread, ""}};
  const auto fire = [&](BoundAction a, std::string rule, double new_lo, double new_hi) {
    for (auto& e : ev) e.rule = rule;
    return make(d, "shap", a, ev, new_lo, new_hi);
  };

  if (concentration >= t.fix_fraction && spread < t.fix_spread) {
    const double median = quantile(positive, 0.5);
    auto r = fire(BoundAction::fix_value, "positive impact concentrated at one value: fix", median,
                  median);
    double v = std::clamp(decode(d, median), d.hard_lower, d.hard_upper);
    if (d.kind == ParamKind::integer) v = std::round(v);
    r.suggested_lower = r.suggested_upper = v;
    return r;
  }
  if (concentration >= t.concentration) {
    const double s = t.shift_factor * w;
    switch (modal) {
      case 2: return fire(BoundAction::shift_up, "positive impact in the top third: shift up", lo + s, hi + s);
      case 0: return fire(BoundAction::shift_down, "positive impact in the bottom third: shift down", lo - s, hi - s);
      default: return fire(BoundAction::contract, "positive impact mid-range: contract both ends", lo + s, hi - s);
    }
  }
  return fire(BoundAction::keep, "positive impact spread across the range", lo, hi);
}

BoundRecommendation advise_from_shap(const DependenceSeries& d, const ParamDef& def,
                                     const AdvisorThresholds& t) {
  return advise_from_shap(d, ColumnDomain::of(def), t);
}

json recommendation_to_json(const BoundRecommendation& r) {
  json ev = json::array();
  for (const auto& e : r.evidence)
    ev.push_back({{"statistic", e.statistic}, {"value", e.value}, {"rule", e.rule}});
  json out{{"param", r.param},
           {"source", r.source},
           {"action", std::string(to_string(r.action))},
           {"evidence", std::move(ev)}};
  if (r.action == BoundAction::fix_value)
    out["suggested_value"] = r.suggested_lower;
  else
    out["suggested_bounds"] = {r.suggested_lower, r.suggested_upper};
  return out;
}

json recommendations_to_json(const std::vector<BoundRecommendation>& rs) {
  json out = json::array();
  for (const auto& r : rs) out.push_back(recommendation_to_json(r));
  return out;
}

void write_recommendations_text(std::ostream& out, const std::vector<BoundRecommendation>& rs) {
  for (const auto& r : rs) {
    out << r.param << " [" << r.source << "]: " << to_string(r.action);
    if (r.action == BoundAction::fix_value)
      out << " -> " << csv::number(r.suggested_lower);
    else
      out << " -> [" << csv::number(r.suggested_lower) << ", " << csv::number(r.suggested_upper)
          << "]";
    out << '\n';
    for (const auto& e : r.evidence)
      out << "    " << e.statistic << " = " << csv::fixed(e.value, 4) << "  (" << e.rule << ")\n";
  }
}

}  // namespace tunelens
