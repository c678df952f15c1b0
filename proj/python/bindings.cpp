#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "tunelens/artifacts.hpp"
#include "tunelens/error.hpp"
#include "tunelens/forest.hpp"
#include "tunelens/report.hpp"
#include "tunelens/shap.hpp"
#include "tunelens/stats.hpp"
#include "tunelens/synthetic.hpp"
#include "tunelens/tpe.hpp"

namespace py = pybind11;
namespace tl = tunelens;
using nlohmann::json;

namespace {

// JSON crosses the boundary as text; the json module does the conversion.
py::object to_py(const json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

json from_py(const py::handle& obj) {
  return json::parse(py::module_::import("json").attr("dumps")(obj).cast<std::string>());
}

py::dict config_to_py(const tl::SearchSpace& space, const tl::Config& config) {
  py::dict d;
  for (std::size_t i = 0; i < space.params.size(); ++i) d[py::str(space.params[i].name)] = config[i];
  return d;
}

tl::Config config_from_py(const tl::SearchSpace& space, const py::dict& d) {
  tl::Config c;
  for (const auto& p : space.params) {
    if (!d.contains(p.name)) throw tl::ValidationError("config is missing '" + p.name + "'");
    py::object v = d[py::str(p.name)];
    if (py::isinstance<py::list>(v) || py::isinstance<py::tuple>(v))
      c.push_back(v.cast<std::vector<double>>());
    else
      c.push_back({v.cast<double>()});
  }
  return c;
}

struct Matrix {
  std::vector<double> data;
  std::size_t rows = 0;
  std::size_t cols = 0;
  tl::MatrixRef ref() const { return {data, rows, cols}; }
};

Matrix matrix_from(const std::vector<std::vector<double>>& rows) {
  Matrix m;
  m.rows = rows.size();
  m.cols = rows.empty() ? 0 : rows.front().size();
  for (const auto& r : rows) {
    if (r.size() != m.cols) throw tl::ValidationError("ragged matrix");
    m.data.insert(m.data.end(), r.begin(), r.end());
  }
  return m;
}

py::dict shap_row(const tl::ShapRow& r) {
  py::dict d;
  d["base"] = r.base;
  d["prediction"] = r.prediction;
  d["values"] = r.attributions;
  return d;
}

tl::AnalyzeOptions make_options(double filter_threshold, std::uint64_t seed, int trees,
                                int min_samples_leaf, std::size_t min_trials, double test_fraction,
                                bool aggregate, unsigned threads) {
  tl::AnalyzeOptions o;
  o.filter_threshold = filter_threshold;
  o.seed = seed;
  o.forest.n_trees = trees;
  o.forest.min_samples_leaf = min_samples_leaf;
  o.min_trials = min_trials;
  o.test_fraction = test_fraction;
  o.aggregate = aggregate;
  o.n_threads = threads;
  o.validate();
  return o;
}

#define ANALYZE_ARGS                                                                        \
  py::kw_only(), py::arg("filter_threshold") = tl::kRefinedThreshold, py::arg("seed") = 0, \
      py::arg("trees") = 200, py::arg("min_samples_leaf") = 2, py::arg("min_trials") = 50,  \
      py::arg("test_fraction") = 0.2, py::arg("aggregate") = true, py::arg("threads") = 0

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.attr("__version__") = std::string(tl::kToolVersion);
  m.attr("EXPLORATORY_THRESHOLD") = tl::kExploratoryThreshold;
  m.attr("REFINED_THRESHOLD") = tl::kRefinedThreshold;

  py::register_exception<tl::ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<tl::ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<tl::InsufficientDataError>(m, "InsufficientDataError", PyExc_RuntimeError);
  py::register_exception<tl::IoError>(m, "IoError", PyExc_OSError);

  py::class_<tl::Study>(m, "Study")
      .def_static(
          "load",
          [](const std::string& space, const std::string& trials, bool minimize) {
            return tl::load_study(trials, tl::load_space(space), tl::IngestOptions{minimize});
          },
          py::arg("space"), py::arg("trials"), py::arg("minimize") = false)
      .def_static(
          "from_jsonl",
          [](const py::dict& space, const std::string& text, bool minimize) {
            std::istringstream in(text);
            return tl::parse_study(in, tl::space_from_json(from_py(space)),
                                   tl::IngestOptions{minimize});
          },
          py::arg("space"), py::arg("text"), py::arg("minimize") = false)
      .def("to_jsonl",
           [](const tl::Study& s) {
             std::ostringstream out;
             tl::write_study(out, s);
             return out.str();
           })
      .def("__len__", [](const tl::Study& s) { return s.trials.size(); })
      .def_property_readonly("space", [](const tl::Study& s) { return to_py(tl::space_to_json(s.space)); })
      .def_property_readonly("columns",
                             [](const tl::Study& s) {
                               std::vector<std::string> names;
                               for (const auto& c : s.space.columns()) names.push_back(c.name);
                               return names;
                             })
      .def_property_readonly("trial_ids",
                             [](const tl::Study& s) {
                               std::vector<std::string> ids;
                               for (const auto& t : s.trials) ids.push_back(t.trial_id);
                               return ids;
                             })
      .def_property_readonly("objectives",
                             [](const tl::Study& s) {
                               std::vector<double> y;
                               for (const auto& t : s.trials) y.push_back(t.objective);
                               return y;
                             })
      .def_property_readonly("configs",
                             [](const tl::Study& s) {
                               py::list out;
                               for (const auto& t : s.trials) out.append(config_to_py(s.space, t.config));
                               return out;
                             })
      .def("encoded",
           [](const tl::Study& s) {
             const auto e = tl::encode(s);
             std::vector<std::vector<double>> rows;
             for (std::size_t r = 0; r < e.rows; ++r) {
               const auto row = e.row(r);
               rows.emplace_back(row.begin(), row.end());
             }
             return py::make_tuple(rows, e.y);
           })
      .def("aggregated", [](const tl::Study& s) { return tl::aggregate_duplicates(s); })
      .def("filtered", [](const tl::Study& s, double t) { return tl::filter_by_objective(s, t); },
           py::arg("threshold"));

  m.def("presets", &tl::preset_names);
  m.def(
      "preset_spec", [](const std::string& name, std::uint64_t seed) {
        return to_py(tl::synthetic_spec_to_json(tl::preset_spec(name, seed)));
      },
      py::arg("name"), py::arg("seed") = 0);
  m.def(
      "evaluate",
      [](const py::dict& spec, const py::dict& config) {
        const auto s = tl::synthetic_spec_from_json(from_py(spec));
        return tl::eval_synthetic(s, config_from_py(s.space, config));
      },
      py::arg("spec"), py::arg("config"));
  m.def(
      "simulate",
      [](const std::string& preset, std::size_t n, std::uint64_t seed, const std::string& sampler,
         const std::optional<py::dict>& spec) {
        const auto s = spec ? tl::synthetic_spec_from_json(from_py(*spec)) : tl::preset_spec(preset, seed);
        return tl::simulate_study(s, tl::parse_sampler(sampler), n, seed);
      },
      py::arg("preset") = "planted", py::arg("n") = 800, py::arg("seed") = 0,
      py::arg("sampler") = "random", py::arg("spec") = py::none());
  m.def(
      "suggest",
      [](const tl::Study& study, std::uint64_t seed) {
        tl::Rng rng(seed);
        return config_to_py(study.space, tl::suggest_config(study, tl::TpeConfig{}, rng));
      },
      py::arg("study"), py::arg("seed") = 0);

  m.def(
      "analyze",
      [](const tl::Study& study, const std::string& out, double ft, std::uint64_t seed, int trees,
         int leaf, std::size_t min_trials, double tf, bool agg, unsigned threads) {
        const auto b = tl::run_analyze(study, make_options(ft, seed, trees, leaf, min_trials, tf, agg, threads), out);
        return to_py(b.manifest);
      },
      py::arg("study"), py::arg("out"), ANALYZE_ARGS);
  m.def(
      "advise",
      [](const tl::Study& study, double ft, std::uint64_t seed, int trees, int leaf,
         std::size_t min_trials, double tf, bool agg, unsigned threads) {
        const auto a = tl::analyze_study(study, make_options(ft, seed, trees, leaf, min_trials, tf, agg, threads));
        return to_py(tl::recommendations_to_json(a.recommendations));
      },
      py::arg("study"), ANALYZE_ARGS);
  m.def(
      "explain",
      [](const tl::Study& study, double ft, std::uint64_t seed, int trees, int leaf,
         std::size_t min_trials, double tf, bool agg, unsigned threads) {
        const auto a = tl::analyze_study(study, make_options(ft, seed, trees, leaf, min_trials, tf, agg, threads));
        py::dict d;
        d["columns"] = a.shap.columns;
        d["trial_ids"] = a.shap.trial_ids;
        py::list rows;
        for (const auto& r : a.shap.rows) rows.append(shap_row(r));
        d["rows"] = rows;
        py::list ranking;
        for (const auto& f : a.ranking) ranking.append(py::make_tuple(f.column, f.mean_abs_shap));
        d["ranking"] = ranking;
        d["test_r2"] = a.metrics.test_r2;
        d["test_mse"] = a.metrics.test_mse;
        return d;
      },
      py::arg("study"), ANALYZE_ARGS);

  py::class_<tl::RegressionForest>(m, "Forest")
      .def_static(
          "fit",
          [](const std::vector<std::vector<double>>& x, const std::vector<double>& y, int n_trees,
             int max_depth, int min_samples_leaf, int max_features, bool bootstrap, std::uint64_t seed) {
            const auto mx = matrix_from(x);
            tl::ForestParams p;
            p.n_trees = n_trees;
            p.max_depth = max_depth;
            p.min_samples_leaf = min_samples_leaf;
            p.max_features = max_features;
            p.bootstrap = bootstrap;
            p.seed = seed;
            return tl::fit_forest(mx.ref(), y, p);
          },
          py::arg("x"), py::arg("y"), py::kw_only(), py::arg("n_trees") = 200,
          py::arg("max_depth") = 0, py::arg("min_samples_leaf") = 2,
          py::arg("max_features") = tl::ForestParams::kThirdOfColumns, py::arg("bootstrap") = true,
          py::arg("seed") = 0)
      .def_static("from_json", [](const std::string& text) { return tl::forest_from_json(json::parse(text)); })
      .def("to_json", [](const tl::RegressionForest& f) { return tl::forest_to_json(f).dump(); })
      .def_property_readonly("n_trees", [](const tl::RegressionForest& f) { return f.trees.size(); })
      .def_property_readonly("n_features", &tl::RegressionForest::n_features)
      .def_property_readonly("expected_value", &tl::RegressionForest::expected_value)
      .def("predict", [](const tl::RegressionForest& f, const std::vector<double>& x) { return tl::predict(f, x); })
      .def("tree_shap", [](const tl::RegressionForest& f, const std::vector<double>& x) { return shap_row(tl::tree_shap(f, x)); })
      .def("shapley_bruteforce", [](const tl::RegressionForest& f, const std::vector<double>& x) {
        return shap_row(tl::shapley_bruteforce(f, x));
      });

  m.def("skewness", [](const std::vector<double>& v) { return tl::skewness(v); });
  m.def("pearson", [](const std::vector<double>& a, const std::vector<double>& b) { return tl::pearson(a, b); });
  m.def(
      "ks_uniform_pvalue",
      [](const std::vector<double>& v, double lo, double hi, bool discrete) {
        return tl::ks_uniform_pvalue(v, lo, hi, discrete);
      },
      py::arg("values"), py::arg("lower"), py::arg("upper"), py::arg("discrete") = false);
  m.def(
      "render",
      [](const std::string& kind, const std::string& csv_text) {
        std::istringstream in(csv_text);
        return tl::render_csv(tl::parse_artifact_kind(kind), in);
      },
      py::arg("kind"), py::arg("csv_text"));
}
