#include "tunelens/report.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

#include "tunelens/csv.hpp"
#include "tunelens/error.hpp"
#include "tunelens/hash.hpp"
#include "tunelens/svg.hpp"

namespace tunelens {

using nlohmann::json;

void AnalyzeOptions::validate() const {
  if (!(filter_threshold >= 0.0 && filter_threshold <= 1.0))
    throw ValidationError("filter threshold must lie in [0, 1]");
  if (min_trials < 2) throw ValidationError("min_trials must be >= 2");
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw ValidationError("test fraction must lie in (0, 1)");
  forest.validate();
  thresholds.validate();
}

json AnalyzeOptions::to_json() const {
  return json{{"filter_threshold", filter_threshold},
              {"min_trials", min_trials},
              {"test_fraction", test_fraction},
              {"aggregate", aggregate},
              {"top_pairs", top_pairs},
              {"seed", seed},
              {"forest",
               {{"n_trees", forest.n_trees},
                {"max_depth", forest.max_depth},
                {"min_samples_leaf", forest.min_samples_leaf},
                {"max_features", forest.max_features},
                {"bootstrap", forest.bootstrap}}},
              {"thresholds",
               {{"skew", thresholds.skew},
                {"uniform_p", thresholds.uniform_p},
                {"expand_factor", thresholds.expand_factor},
                {"shift_factor", thresholds.shift_factor},
                {"fix_fraction", thresholds.fix_fraction},
                {"concentration", thresholds.concentration},
                {"fix_spread", thresholds.fix_spread},
                {"n_bins", thresholds.n_bins},
                {"surface_resolution", thresholds.surface_resolution}}}};
}

std::string file_stem(std::string_view column) {
  std::string out;
  for (char c : column) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                    c == '_' || c == '-' || c == '.';
    out += ok ? c : '_';
  }
  while (!out.empty() && out.back() == '_') out.pop_back();
  return out.empty() ? "column" : out;
}

namespace {

std::string short_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

std::vector<std::string> column_names(const EncodedMatrix& m) {
  std::vector<std::string> names;
  for (const auto& c : m.columns) names.push_back(c.name);
  return names;
}

// Values of a column over the trials that actually carry it (slot columns
// of variable-arity parameters skip trials with fewer slots).
std::vector<double> present_values(const Study& study, const Column& column,
                                   const EncodedMatrix& m, std::size_t index) {
  std::vector<double> out;
  for (std::size_t r = 0; r < m.rows; ++r) {
    const auto& values = study.trials[r].config[column.param];
    if (column.is_length() || column.slot < static_cast<int>(values.size()))
      out.push_back(m.at(r, index));
  }
  return out;
}

}  // namespace

Analysis analyze_study(const Study& study, const AnalyzeOptions& options) {
  options.validate();
  if (study.trials.empty()) throw InsufficientDataError("study has no trials");

  Analysis a;
  a.options = options;
  a.space = study.space;
  a.n_input = study.trials.size();
  const Study aggregated = options.aggregate ? aggregate_duplicates(study) : study;
  a.n_aggregated = aggregated.trials.size();
  const Study filtered = filter_by_objective(aggregated, options.filter_threshold);
  a.n_filtered = filtered.trials.size();
  if (a.n_filtered < options.min_trials)
    throw InsufficientDataError(
        std::to_string(a.n_filtered) + " trials have objective > " +
        short_number(options.filter_threshold) + " (need " + std::to_string(options.min_trials) +
        "); lower --filter-threshold or collect more trials");

  a.all = encode(aggregated);
  a.filtered = encode(filtered);
  const auto names = column_names(a.filtered);
  const std::size_t p = names.size();

  // surrogate
  Rng split_rng(mix_seed(options.seed ^ 0x5b117ULL));
  auto [train, test] = train_test_split(a.filtered, options.test_fraction, split_rng);
  ForestParams fp = options.forest;
  fp.seed = mix_seed(options.seed ^ 0xf0e57ULL);
  fp.n_threads = options.n_threads;
  a.forest = fit_forest(train, fp);
  const auto test_pred = predict(a.forest, matrix_ref(test));
  const auto train_pred = predict(a.forest, matrix_ref(train));
  a.metrics = {train.rows, test.rows, mse(train_pred, train.y), mse(test_pred, test.y),
               r_squared(test_pred, test.y)};

  // attributions
  a.shap = explain_all(a.forest, matrix_ref(a.filtered), a.filtered.trial_ids, options.n_threads);
  a.ranking = rank_features(a.shap);
  for (std::size_t c = 0; c < p; ++c) {
    InteractionChoice partner{c, 1.0, false};
    if (p >= 2) {
      try {
        partner = select_interaction(matrix_ref(a.filtered), c);
      } catch (const ValidationError&) {
        partner = {c, 1.0, true};
      }
    }
    a.partners.push_back(partner);
    a.dependence.push_back(dependence_series(a.shap, names[c], names[partner.column]));
  }

  // distribution statistics
  for (std::size_t c = 0; c < p; ++c) {
    const auto values = present_values(filtered, a.filtered.columns[c], a.filtered, c);
    if (values.empty()) {
      HistogramStats empty;
      empty.column = names[c];
      a.histograms.push_back(std::move(empty));
      continue;
    }
    a.histograms.push_back(histogram(values, a.filtered.columns[c], options.thresholds.n_bins));
  }
  a.correlation_filtered = pearson_matrix(matrix_ref(a.filtered), names);
  if (a.all.rows >= 2) {
    a.correlation_unfiltered = pearson_matrix(matrix_ref(a.all), names);
    a.objective_r = objective_correlation(matrix_ref(a.all), a.all.y);
  }
  if (p >= 2) a.pairs = extreme_pairs(a.correlation_filtered, options.top_pairs);

  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (const auto* list : {&a.pairs.positive, &a.pairs.negative}) {
    for (const auto& pr : *list) {
      if (!seen.insert({pr.a, pr.b}).second) continue;
      if (a.filtered.columns[pr.a].kind == ParamKind::categorical ||
          a.filtered.columns[pr.b].kind == ParamKind::categorical)
        continue;
      a.surfaces.push_back(surface_grid(a.filtered, names[pr.a], names[pr.b],
                                        options.thresholds.surface_resolution));
    }
  }

  // advice
  for (std::size_t c = 0; c < p; ++c) {
    const auto& column = a.filtered.columns[c];
    const auto domain = ColumnDomain::of(column, study.space.params[column.param]);
    if (a.histograms[c].n > 0)
      a.recommendations.push_back(advise_from_skew(a.histograms[c], domain, options.thresholds));
    a.recommendations.push_back(advise_from_shap(a.dependence[c], domain, options.thresholds));
  }
  return a;
}

ReportBundle write_bundle(const Analysis& a, const std::filesystem::path& directory) {
  namespace fs = std::filesystem;
  std::error_code ec;
  for (const char* sub : {"", "histograms", "dependence", "surfaces"}) {
    fs::create_directories(directory / sub, ec);
    if (ec) throw IoError("cannot create '" + (directory / sub).string() + "': " + ec.message());
  }

  std::map<std::string, std::string> files;
  const auto put = [&](const std::string& rel, std::string content) {
    files[rel] = std::move(content);
  };
  const auto stream = [&](const std::string& rel, const auto& writer) {
    std::ostringstream out;
    writer(out);
    put(rel, out.str());
  };

  put("surrogate.json", forest_to_json(a.forest).dump() + "\n");
  put("surrogate_metrics.json",
      json{{"n_input", a.n_input},
           {"n_aggregated", a.n_aggregated},
           {"n_filtered", a.n_filtered},
           {"filter_threshold", a.options.filter_threshold},
           {"test_fraction", a.options.test_fraction},
           {"n_train", a.metrics.n_train},
           {"n_test", a.metrics.n_test},
           {"train_mse", a.metrics.train_mse},
           {"test_mse", a.metrics.test_mse},
           {"test_r2", a.metrics.test_r2}}
              .dump(2) +
          "\n");

  stream("shap_values.csv", [&](std::ostream& o) { write_shap_csv(o, a.shap); });
  stream("shap_importance.csv", [&](std::ostream& o) {
    o << "rank,column,mean_abs_shap\n";
    for (std::size_t i = 0; i < a.ranking.size(); ++i)
      o << i + 1 << ',' << csv::field(a.ranking[i].column) << ','
        << csv::number(a.ranking[i].mean_abs_shap) << '\n';
  });
  put("shap_summary.svg", render_shap_summary_svg(a.shap, a.ranking));

  for (const auto& d : a.dependence) {
    const auto stem = "dependence/" + file_stem(d.feature);
    stream(stem + ".csv", [&](std::ostream& o) { write_dependence_csv(o, d); });
    put(stem + ".svg", render_dependence_svg(d));
  }
  for (const auto& h : a.histograms) {
    if (h.n == 0) continue;
    const auto stem = "histograms/" + file_stem(h.column);
    stream(stem + ".csv", [&](std::ostream& o) { write_histogram_csv(o, h); });
    put(stem + ".svg", render_histogram_svg(h));
  }

  const auto threshold = short_number(a.options.filter_threshold);
  stream("correlation_filtered.csv",
         [&](std::ostream& o) { write_matrix_csv(o, a.correlation_filtered); });
  put("correlation_filtered.svg",
      render_matrix_svg(a.correlation_filtered, "Pearson correlation, objective > " + threshold,
                        &a.pairs));
  if (a.correlation_unfiltered.p() > 0) {
    stream("correlation_unfiltered.csv",
           [&](std::ostream& o) { write_matrix_csv(o, a.correlation_unfiltered); });
    put("correlation_unfiltered.svg",
        render_matrix_svg(a.correlation_unfiltered, "Pearson correlation, no objective filter"));
    stream("objective_correlation.csv", [&](std::ostream& o) {
      o << "column,r\n";
      for (std::size_t c = 0; c < a.objective_r.size(); ++c)
        o << csv::field(a.all.columns[c].name) << ','
          << (a.objective_r[c] ? csv::number(*a.objective_r[c]) : std::string()) << '\n';
    });
    put("objective_correlation.svg",
        render_bar_svg(column_names(a.all), a.objective_r, "Correlation with the objective"));
  }

  const auto pair_json = [&](const std::vector<CorrelatedPair>& v) {
    json arr = json::array();
    for (const auto& pr : v)
      arr.push_back({{"a", a.filtered.columns[pr.a].name},
                     {"b", a.filtered.columns[pr.b].name},
                     {"r", pr.r}});
    return arr;
  };
  put("extreme_pairs.json",
      json{{"filter_threshold", a.options.filter_threshold},
           {"top_positive", pair_json(a.pairs.positive)},
           {"top_negative", pair_json(a.pairs.negative)}}
              .dump(2) +
          "\n");

  for (const auto& g : a.surfaces) {
    const auto stem = "surfaces/" + file_stem(g.x_param) + "__" + file_stem(g.y_param);
    stream(stem + ".csv", [&](std::ostream& o) { write_surface_csv(o, g); });
    put(stem + ".svg", render_surface_svg(g));
  }

  put("recommendations.json", recommendations_to_json(a.recommendations).dump(2) + "\n");
  stream("recommendations.txt",
         [&](std::ostream& o) { write_recommendations_text(o, a.recommendations); });

  ReportBundle bundle;
  bundle.directory = directory;
  json listing = json::array();
  for (const auto& [rel, content] : files) {
    write_text_file(directory / rel, content);
    ManifestEntry e{rel, sha256_hex(content), content.size()};
    listing.push_back({{"path", e.path}, {"sha256", e.sha256}, {"bytes", e.bytes}});
    bundle.files.push_back(std::move(e));
  }
  bundle.manifest = json{{"tool", "tunelens"},
                         {"version", std::string(kToolVersion)},
                         {"options", a.options.to_json()},
                         {"counts",
                          {{"input", a.n_input},
                           {"aggregated", a.n_aggregated},
                           {"filtered", a.n_filtered}}},
                         {"files", std::move(listing)}};
  write_text_file(directory / "manifest.json", bundle.manifest.dump(2) + "\n");
  return bundle;
}

ReportBundle run_analyze(const Study& study, const AnalyzeOptions& options,
                         const std::filesystem::path& directory) {
  return write_bundle(analyze_study(study, options), directory);
}

}  // namespace tunelens
