#include "tunelens/study.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>

#include "tunelens/error.hpp"

namespace tunelens {

using nlohmann::json;

std::size_t TrialRecord::group_size() const {
  if (tags.is_object()) {
    auto it = tags.find("group_size");
    if (it != tags.end() && it->is_number_unsigned()) return it->get<std::size_t>();
  }
  return 1;
}

std::vector<double> EncodedMatrix::column(std::size_t c) const {
  std::vector<double> out(rows);
  for (std::size_t r = 0; r < rows; ++r) out[r] = at(r, c);
  return out;
}

std::size_t EncodedMatrix::column_index(std::string_view name) const {
  for (std::size_t c = 0; c < columns.size(); ++c)
    if (columns[c].name == name) return c;
  throw ValidationError("unknown column '" + std::string(name) + "'");
}

void validate_config(const SearchSpace& space, const Config& config, const std::string& trial_id) {
  const auto fail = [&](const std::string& field, const std::string& msg) {
    throw ValidationError("trial '" + trial_id + "', field '" + field + "': " + msg);
  };
  if (config.size() != space.params.size())
    throw ValidationError("trial '" + trial_id + "': config does not match search space");
  for (std::size_t i = 0; i < space.params.size(); ++i) {
    const auto& p = space.params[i];
    const auto& values = config[i];
    const int n = static_cast<int>(values.size());
    if (n < p.arity_min || n > p.arity_max)
      fail(p.name, "expected between " + std::to_string(p.arity_min) + " and " +
                       std::to_string(p.arity_max) + " values, got " + std::to_string(n));
    for (double v : values) {
      if (!std::isfinite(v)) fail(p.name, "non-finite value");
      if (p.kind == ParamKind::categorical) {
        if (v != std::floor(v) || v < 0 || v >= static_cast<double>(p.choices.size()))
          fail(p.name, "invalid choice index");
        continue;
      }
      if (p.kind == ParamKind::integer && v != std::floor(v))
        fail(p.name, "value " + json(v).dump() + " is not an integer");
      if (v < p.lower || v > p.upper)
        fail(p.name, "value " + json(v).dump() + " outside [" + json(p.lower).dump() + ", " +
                         json(p.upper).dump() + "]");
    }
  }
}

namespace {

double scalar_from_json(const json& v, const ParamDef& p, const std::string& trial_id) {
  if (p.kind == ParamKind::categorical) {
    if (!v.is_string())
      throw ValidationError("trial '" + trial_id + "', field '" + p.name +
                            "': categorical value must be a string");
    const auto label = v.get<std::string>();
    for (std::size_t k = 0; k < p.choices.size(); ++k)
      if (p.choices[k] == label) return static_cast<double>(k);
    throw ValidationError("trial '" + trial_id + "', field '" + p.name + "': unknown choice '" +
                          label + "'");
  }
  if (!v.is_number())
    throw ValidationError("trial '" + trial_id + "', field '" + p.name + "': expected a number");
  return v.get<double>();
}

json scalar_to_json(double v, const ParamDef& p) {
  if (p.kind == ParamKind::categorical) return p.choices.at(static_cast<std::size_t>(v));
  if (p.kind == ParamKind::integer) return static_cast<long long>(v);
  return v;
}

}  // namespace

TrialRecord trial_from_json(const json& doc, const SearchSpace& space,
                            const IngestOptions& options) {
  if (!doc.is_object()) throw ParseError("trial must be a JSON object");
  TrialRecord t;
  const auto id = doc.find("trial_id");
  if (id == doc.end()) throw ParseError("missing 'trial_id'");
  if (id->is_string())
    t.trial_id = id->get<std::string>();
  else if (id->is_number_integer())
    t.trial_id = std::to_string(id->get<long long>());
  else
    throw ParseError("'trial_id' must be a string");

  const auto params = doc.find("params");
  if (params == doc.end() || !params->is_object())
    throw ParseError("trial '" + t.trial_id + "': missing 'params' object");
  for (const auto& [key, value] : params->items()) {
    if (!space.find(key))
      throw ValidationError("trial '" + t.trial_id + "', field '" + key +
                            "': unknown parameter name");
  }
  t.config.resize(space.params.size());
  for (std::size_t i = 0; i < space.params.size(); ++i) {
    const auto& p = space.params[i];
    const auto it = params->find(p.name);
    if (it == params->end())
      throw ValidationError("trial '" + t.trial_id + "', field '" + p.name + "': missing value");
    if (it->is_array()) {
      for (const auto& v : *it) t.config[i].push_back(scalar_from_json(v, p, t.trial_id));
    } else {
      t.config[i].push_back(scalar_from_json(*it, p, t.trial_id));
    }
  }

  const auto obj = doc.find("objective");
  if (obj == doc.end() || !obj->is_number())
    throw ParseError("trial '" + t.trial_id + "': missing numeric 'objective'");
  t.objective = obj->get<double>();
  if (!std::isfinite(t.objective) || t.objective < 0.0 || t.objective > 1.0)
    throw ValidationError("trial '" + t.trial_id + "', field 'objective': " +
                          json(t.objective).dump() + " not in [0, 1]");
  if (options.minimize) t.objective = 1.0 - t.objective;

  if (const auto tags = doc.find("tags"); tags != doc.end()) {
    if (!tags->is_object()) throw ParseError("trial '" + t.trial_id + "': 'tags' must be an object");
    t.tags = *tags;
  }
  validate_config(space, t.config, t.trial_id);
  return t;
}

json trial_to_json(const TrialRecord& trial, const SearchSpace& space) {
  json params = json::object();
  for (std::size_t i = 0; i < space.params.size(); ++i) {
    const auto& p = space.params[i];
    if (p.is_list()) {
      json arr = json::array();
      for (double v : trial.config[i]) arr.push_back(scalar_to_json(v, p));
      params[p.name] = std::move(arr);
    } else {
      params[p.name] = scalar_to_json(trial.config[i].at(0), p);
    }
  }
  return json{{"trial_id", trial.trial_id},
              {"params", std::move(params)},
              {"objective", trial.objective},
              {"tags", trial.tags}};
}

Study parse_study(std::istream& in, const SearchSpace& space, const IngestOptions& options) {
  Study study{space, {}};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json doc;
    try {
      doc = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(e.what(), line_no);
    }
    try {
      study.trials.push_back(trial_from_json(doc, space, options));
    } catch (const ParseError& e) {
      throw ParseError(e.what(), line_no);
    } catch (const json::exception& e) {
      throw ParseError(e.what(), line_no);
    }
  }
  return study;
}

Study load_study(const std::string& path, const SearchSpace& space, const IngestOptions& options) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open trial file '" + path + "'");
  return parse_study(in, space, options);
}

void write_study(std::ostream& out, const Study& study) {
  for (const auto& t : study.trials) out << trial_to_json(t, study.space).dump() << '\n';
}

double coverage(const std::vector<bool>& success_flags) {
  if (success_flags.empty()) throw ValidationError("coverage of an empty evaluation set");
  std::size_t hits = 0;
  for (bool f : success_flags) hits += f ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(success_flags.size());
}

Study aggregate_duplicates(const Study& study) {
  std::map<std::vector<double>, std::size_t> first_seen;
  std::vector<double> weighted_sum;
  std::vector<std::size_t> sizes;
  Study out{study.space, {}};
  for (const auto& t : study.trials) {
    auto key = encode_config(study.space, t.config);
    const auto [it, inserted] = first_seen.try_emplace(std::move(key), out.trials.size());
    const std::size_t g = t.group_size();
    if (inserted) {
      out.trials.push_back(t);
      weighted_sum.push_back(t.objective * static_cast<double>(g));
      sizes.push_back(g);
    } else {
      weighted_sum[it->second] += t.objective * static_cast<double>(g);
      sizes[it->second] += g;
    }
  }
  for (std::size_t i = 0; i < out.trials.size(); ++i) {
    auto& t = out.trials[i];
    if (sizes[i] == t.group_size()) continue;  // untouched
    t.objective = weighted_sum[i] / static_cast<double>(sizes[i]);
    if (!t.tags.is_object()) t.tags = json::object();
    t.tags["group_size"] = sizes[i];
  }
  return out;
}

Study filter_by_objective(const Study& study, double threshold) {
  Study out{study.space, {}};
  for (const auto& t : study.trials)
    if (t.objective > threshold) out.trials.push_back(t);
  return out;
}

std::vector<double> encode_config(const SearchSpace& space, const Config& config) {
  std::vector<double> row;
  for (std::size_t i = 0; i < space.params.size(); ++i) {
    const auto& p = space.params[i];
    const auto& values = config.at(i);
    if (p.variable_arity()) row.push_back(static_cast<double>(values.size()));
    for (int k = 0; k < p.arity_max; ++k) {
      const double raw =
          k < static_cast<int>(values.size()) ? values[k] : (p.numeric() ? p.lower : 0.0);
      row.push_back(p.numeric() ? p.encode(raw) : raw);
    }
  }
  return row;
}

Config decode_row(const SearchSpace& space, std::span<const double> row) {
  Config config(space.params.size());
  std::size_t c = 0;
  for (std::size_t i = 0; i < space.params.size(); ++i) {
    const auto& p = space.params[i];
    int len = p.arity_max;
    if (p.variable_arity()) len = static_cast<int>(std::lround(row[c++]));
    for (int k = 0; k < p.arity_max; ++k, ++c) {
      if (k >= len) continue;
      double v = p.numeric() ? p.decode(row[c]) : row[c];
      if (p.kind != ParamKind::continuous) v = std::round(v);
      config[i].push_back(v);
    }
  }
  return config;
}

EncodedMatrix encode(const Study& study) {
  EncodedMatrix m;
  m.columns = study.space.columns();
  m.rows = study.trials.size();
  m.x.reserve(m.rows * m.columns.size());
  for (const auto& t : study.trials) {
    const auto row = encode_config(study.space, t.config);
    m.x.insert(m.x.end(), row.begin(), row.end());
    m.y.push_back(t.objective);
    m.trial_ids.push_back(t.trial_id);
  }
  return m;
}

}  // namespace tunelens
