#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "tunelens/artifacts.hpp"
#include "tunelens/csv.hpp"
#include "tunelens/error.hpp"
#include "tunelens/report.hpp"
#include "tunelens/svg.hpp"
#include "tunelens/synthetic.hpp"
#include "tunelens/tpe.hpp"

namespace tl = tunelens;
using nlohmann::json;

namespace {

constexpr int kExitOther = 1;
constexpr int kExitValidation = 2;
constexpr int kExitInsufficient = 3;

struct Globals {
  std::uint64_t seed = 0;
  double filter_threshold = tl::kRefinedThreshold;
  std::string out;
  std::string format;
  unsigned threads = 0;
};

struct StudyInput {
  std::string space;
  std::string trials;
  bool minimize = false;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--space", space, "Search space JSON")->required()->check(CLI::ExistingFile);
    cmd->add_option("--trials", trials, "Trials in JSON lines")->required()->check(CLI::ExistingFile);
    cmd->add_flag("--minimize", minimize, "Objective column is a loss; store 1 - objective");
  }
  tl::Study load() const {
    return tl::load_study(trials, tl::load_space(space), tl::IngestOptions{minimize});
  }
};

struct SurrogateFlags {
  std::size_t min_trials = 50;
  double test_fraction = 0.2;
  int trees = 200;
  int min_leaf = 2;
  bool no_aggregate = false;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--min-trials", min_trials, "Abort below this many filtered trials")
        ->capture_default_str();
    cmd->add_option("--test-fraction", test_fraction, "Held-out share")->capture_default_str();
    cmd->add_option("--trees", trees, "Forest size")->capture_default_str();
    cmd->add_option("--min-samples-leaf", min_leaf)->capture_default_str();
    cmd->add_flag("--no-aggregate", no_aggregate, "Keep duplicate configurations separate");
  }
  tl::AnalyzeOptions options(const Globals& g) const {
    tl::AnalyzeOptions o;
    o.filter_threshold = g.filter_threshold;
    o.seed = g.seed;
    o.n_threads = g.threads;
    o.min_trials = min_trials;
    o.test_fraction = test_fraction;
    o.aggregate = !no_aggregate;
    o.forest.n_trees = trees;
    o.forest.min_samples_leaf = min_leaf;
    return o;
  }
};

// Writes to --out, or stdout when --out is empty or "-".
void emit(const Globals& g, const std::string& text) {
  if (g.out.empty() || g.out == "-") {
    std::cout << text;
    std::cout.flush();
    return;
  }
  tl::write_text_file(g.out, text);
}

std::string format_or(const Globals& g, const std::string& fallback,
                      std::initializer_list<std::string_view> allowed) {
  const std::string f = g.format.empty() ? fallback : g.format;
  if (std::find(allowed.begin(), allowed.end(), f) == allowed.end())
    throw tl::ValidationError("--format " + f + " is not supported by this command");
  return f;
}

int run_ingest(const Globals& g, const StudyInput& in, bool aggregate) {
  auto study = in.load();
  const auto n_raw = study.trials.size();
  if (aggregate) study = tl::aggregate_duplicates(study);
  std::ostringstream out;
  tl::write_study(out, study);
  emit(g, out.str());
  std::fprintf(stderr, "%zu trials read, %zu written, %zu with objective > %g\n", n_raw,
               study.trials.size(), tl::filter_by_objective(study, g.filter_threshold).trials.size(),
               g.filter_threshold);
  return 0;
}

tl::SyntheticSpec spec_from(const std::string& preset, const std::string& spec_path,
                            std::uint64_t seed) {
  if (!spec_path.empty()) return tl::load_synthetic_spec(spec_path);
  return tl::preset_spec(preset.empty() ? "planted" : preset, seed);
}

int run_simulate(const Globals& g, const std::string& preset, const std::string& spec_path,
                 const std::string& sampler, std::size_t n, const std::string& space_out,
                 const std::string& spec_out) {
  const auto spec = spec_from(preset, spec_path, g.seed);
  const auto study = tl::simulate_study(spec, tl::parse_sampler(sampler), n, g.seed);
  if (!space_out.empty())
    tl::write_text_file(space_out, tl::space_to_json(spec.space).dump(2) + "\n");
  if (!spec_out.empty())
    tl::write_text_file(spec_out, tl::synthetic_spec_to_json(spec).dump(2) + "\n");
  std::ostringstream out;
  tl::write_study(out, study);
  emit(g, out.str());
  return 0;
}

double best_objective(const tl::Study& s) {
  double best = 0.0;
  for (const auto& t : s.trials) best = std::max(best, t.objective);
  return best;
}

int run_tpe_demo(const Globals& g, const std::string& preset, const std::string& spec_path,
                 std::size_t n, std::size_t seeds, const StudyInput& history) {
  const auto format = format_or(g, "csv", {"csv", "json"});
  if (!history.trials.empty()) {
    // Propose the next configuration for an existing study.
    const auto study = history.load();
    tl::Rng rng(g.seed);
    tl::TpeConfig cfg;
    cfg.seed = g.seed;
    const auto config = tl::suggest_config(study, cfg, rng);
    tl::TrialRecord next{"suggested", config, 0.0, json::object()};
    auto doc = tl::trial_to_json(next, study.space);
    doc.erase("objective");
    emit(g, doc.dump() + "\n");
    return 0;
  }
  const auto spec = spec_from(preset.empty() ? "quadratic" : preset, spec_path, g.seed);
  std::vector<double> tpe_best, random_best;
  json rows = json::array();
  std::ostringstream csv_out;
  csv_out << "seed,tpe_best,random_best\n";
  for (std::size_t s = 0; s < seeds; ++s) {
    const std::uint64_t seed = g.seed + s;
    tpe_best.push_back(best_objective(tl::simulate_study(spec, tl::SamplerKind::tpe, n, seed)));
    random_best.push_back(
        best_objective(tl::simulate_study(spec, tl::SamplerKind::random, n, seed)));
    csv_out << seed << ',' << tl::csv::number(tpe_best.back()) << ','
            << tl::csv::number(random_best.back()) << '\n';
    rows.push_back({{"seed", seed}, {"tpe_best", tpe_best.back()}, {"random_best", random_best.back()}});
  }
  const auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const auto m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
  };
  if (format == "json") {
    emit(g, json{{"trials_per_run", n},
                 {"runs", rows},
                 {"median_tpe_best", median(tpe_best)},
                 {"median_random_best", median(random_best)}}
                    .dump(2) +
                "\n");
  } else {
    emit(g, csv_out.str());
  }
  std::fprintf(stderr, "median best over %zu seeds: tpe %.6f, random %.6f\n", seeds,
               median(tpe_best), median(random_best));
  return 0;
}

int run_analyze(const Globals& g, const StudyInput& in, const SurrogateFlags& flags) {
  if (g.out.empty() || g.out == "-") throw tl::ValidationError("analyze needs --out DIR");
  const auto bundle = tl::run_analyze(in.load(), flags.options(g), g.out);
  const auto& counts = bundle.manifest["counts"];
  std::ifstream metrics(std::filesystem::path(g.out) / "surrogate_metrics.json");
  const auto m = json::parse(metrics);
  std::printf("%zu trials, %zu after aggregation, %zu with objective > %g\n",
              counts["input"].get<std::size_t>(), counts["aggregated"].get<std::size_t>(),
              counts["filtered"].get<std::size_t>(), g.filter_threshold);
  std::printf("surrogate: %zu train / %zu test, test MSE %.6g, test R^2 %.4f\n",
              m["n_train"].get<std::size_t>(), m["n_test"].get<std::size_t>(),
              m["test_mse"].get<double>(), m["test_r2"].get<double>());
  std::printf("wrote %zu files and manifest.json to %s\n", bundle.files.size(), g.out.c_str());
  return 0;
}

int run_advise(const Globals& g, const StudyInput& in, const SurrogateFlags& flags) {
  const auto format = format_or(g, "text", {"text", "json", "csv"});
  const auto a = tl::analyze_study(in.load(), flags.options(g));
  std::ostringstream out;
  if (format == "json") {
    out << tl::recommendations_to_json(a.recommendations).dump(2) << '\n';
  } else if (format == "csv") {
    out << "param,source,action,suggested_lower,suggested_upper,evidence,rule\n";
    for (const auto& r : a.recommendations) {
      std::string evidence, rule;
      for (const auto& e : r.evidence) {
        if (!evidence.empty()) evidence += ';';
        evidence += e.statistic + '=' + tl::csv::number(e.value);
        if (rule.empty()) rule = e.rule;
      }
      out << tl::csv::join({tl::csv::field(r.param), r.source, std::string(tl::to_string(r.action)),
                            tl::csv::number(r.suggested_lower), tl::csv::number(r.suggested_upper),
                            tl::csv::field(evidence), tl::csv::field(rule)})
          << '\n';
    }
  } else {
    tl::write_recommendations_text(out, a.recommendations);
  }
  emit(g, out.str());
  return 0;
}

int run_explain(const Globals& g, const StudyInput& in, const SurrogateFlags& flags,
                const std::string& model_path) {
  const auto format = format_or(g, "csv", {"csv", "json", "svg"});
  const auto opts = flags.options(g);
  tl::ShapMatrix shap;
  if (model_path.empty()) {
    shap = tl::analyze_study(in.load(), opts).shap;
  } else {
    const auto forest = tl::load_forest(model_path);
    auto study = in.load();
    if (opts.aggregate) study = tl::aggregate_duplicates(study);
    const auto m = tl::encode(study);
    if (m.cols() != forest.columns.size())
      throw tl::ValidationError("model has " + std::to_string(forest.columns.size()) +
                                " columns, study encodes " + std::to_string(m.cols()));
    for (std::size_t c = 0; c < m.cols(); ++c)
      if (m.columns[c].name != forest.columns[c])
        throw tl::ValidationError("model column '" + forest.columns[c] + "' does not match '" +
                                  m.columns[c].name + "'");
    shap = tl::explain_all(forest, tl::matrix_ref(m), m.trial_ids, g.threads);
  }
  const auto ranking = tl::rank_features(shap);
  if (format == "svg") {
    emit(g, tl::render_shap_summary_svg(shap, ranking));
  } else if (format == "json") {
    json arr = json::array();
    for (const auto& f : ranking) arr.push_back({{"column", f.column}, {"mean_abs_shap", f.mean_abs_shap}});
    emit(g, json{{"rows", shap.n()}, {"ranking", arr}}.dump(2) + "\n");
  } else {
    std::ostringstream out;
    tl::write_shap_csv(out, shap);
    emit(g, out.str());
  }
  return 0;
}

int run_render(const Globals& g, const std::string& artifact, const std::string& input) {
  format_or(g, "svg", {"svg"});
  std::ifstream in(input);
  if (!in) throw tl::IoError("cannot read '" + input + "'");
  emit(g, tl::render_csv(tl::parse_artifact_kind(artifact), in));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hyperparameter study analysis: TPE sampling, forest surrogates, TreeSHAP and "
               "search-space advice"};
  app.fallthrough();
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(tl::kToolVersion));

  Globals g;
  app.add_option("--seed", g.seed, "Master seed")->capture_default_str();
  app.add_option("--filter-threshold", g.filter_threshold,
                 "Keep trials with objective strictly above this (0.7 and 0.8 are the usual "
                 "exploratory and refined settings)")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  app.add_option("--out", g.out, "Output file or directory ('-' for stdout)");
  app.add_option("--format", g.format, "Output format")
      ->check(CLI::IsMember({"csv", "json", "svg", "text"}));
  app.add_option("--threads", g.threads, "Worker threads (0 = all cores); never changes results");

  StudyInput ingest_in;
  bool ingest_aggregate = false;
  auto* ingest = app.add_subcommand("ingest", "Validate and normalize a trial file");
  ingest_in.add_to(ingest);
  ingest->add_flag("--aggregate", ingest_aggregate, "Merge exact duplicate configurations");

  std::string preset, spec_path, sampler = "random", space_out, spec_out;
  std::size_t n_trials = 800;
  auto* simulate = app.add_subcommand("simulate", "Sample a study against a synthetic objective");
  simulate->add_option("--preset", preset, "Built-in objective")
      ->check(CLI::IsMember(tl::preset_names()));
  simulate->add_option("--spec", spec_path, "Synthetic objective JSON")->check(CLI::ExistingFile);
  simulate->add_option("--sampler", sampler)->check(CLI::IsMember({"random", "tpe"}))
      ->capture_default_str();
  simulate->add_option("--n", n_trials, "Number of trials")->capture_default_str()
      ->check(CLI::PositiveNumber);
  simulate->add_option("--space-out", space_out, "Also write the search space JSON here");
  simulate->add_option("--spec-out", spec_out, "Also write the objective JSON here");

  std::string demo_preset, demo_spec;
  std::size_t demo_n = 100, demo_seeds = 20;
  StudyInput demo_history;
  auto* demo = app.add_subcommand("tpe-demo", "Compare TPE with random search, or propose a next config");
  demo->add_option("--preset", demo_preset, "Built-in objective (default quadratic)")
      ->check(CLI::IsMember(tl::preset_names()));
  demo->add_option("--spec", demo_spec)->check(CLI::ExistingFile);
  demo->add_option("--n", demo_n, "Trials per run")->capture_default_str()->check(CLI::PositiveNumber);
  demo->add_option("--seeds", demo_seeds, "Paired seeds")->capture_default_str()
      ->check(CLI::PositiveNumber);
  demo->add_option("--space", demo_history.space, "With --trials: suggest the next config")
      ->check(CLI::ExistingFile);
  demo->add_option("--trials", demo_history.trials)->check(CLI::ExistingFile);
  demo->add_flag("--minimize", demo_history.minimize);

  StudyInput analyze_in, advise_in, explain_in;
  SurrogateFlags analyze_flags, advise_flags, explain_flags;
  auto* analyze = app.add_subcommand("analyze", "Run the full pipeline and write a report bundle");
  analyze_in.add_to(analyze);
  analyze_flags.add_to(analyze);
  auto* advise = app.add_subcommand("advise", "Print search-space recommendations");
  advise_in.add_to(advise);
  advise_flags.add_to(advise);
  std::string model_path;
  auto* explain = app.add_subcommand("explain", "SHAP values for every trial");
  explain_in.add_to(explain);
  explain_flags.add_to(explain);
  explain->add_option("--model", model_path, "Saved surrogate.json instead of refitting")
      ->check(CLI::ExistingFile);

  std::string artifact, render_input;
  auto* render = app.add_subcommand("render", "Render a bundle CSV as SVG");
  render->add_option("--artifact", artifact, "histogram, matrix, surface, shap-summary or dependence")
      ->required();
  render->add_option("--input", render_input, "CSV written by analyze")->required()
      ->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  try {
    if (*ingest) return run_ingest(g, ingest_in, ingest_aggregate);
    if (*simulate) {
      if (!preset.empty() && !spec_path.empty())
        throw tl::ValidationError("use either --preset or --spec");
      return run_simulate(g, preset, spec_path, sampler, n_trials, space_out, spec_out);
    }
    if (*demo) {
      if (demo_history.space.empty() != demo_history.trials.empty())
        throw tl::ValidationError("--space and --trials go together");
      return run_tpe_demo(g, demo_preset, demo_spec, demo_n, demo_seeds, demo_history);
    }
    if (*analyze) return run_analyze(g, analyze_in, analyze_flags);
    if (*advise) return run_advise(g, advise_in, advise_flags);
    if (*explain) return run_explain(g, explain_in, explain_flags, model_path);
    if (*render) return run_render(g, artifact, render_input);
  } catch (const tl::InsufficientDataError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitInsufficient;
  } catch (const tl::ParseError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitValidation;
  } catch (const tl::ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitValidation;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitOther;
  }
  return kExitOther;
}
