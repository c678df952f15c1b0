#include "tunelens/space.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "tunelens/error.hpp"

namespace tunelens {

using nlohmann::json;

std::string_view to_string(ParamKind kind) {
  switch (kind) {
    case ParamKind::continuous: return "continuous";
    case ParamKind::integer: return "integer";
    case ParamKind::categorical: return "categorical";
  }
  return "unknown";
}

ParamKind parse_param_kind(std::string_view text) {
  if (text == "continuous" || text == "float") return ParamKind::continuous;
  if (text == "integer" || text == "int") return ParamKind::integer;
  if (text == "categorical") return ParamKind::categorical;
  throw ValidationError("unknown parameter kind '" + std::string(text) + "'");
}

void ParamDef::validate() const {
  const auto fail = [&](const std::string& msg) {
    throw ValidationError("parameter '" + name + "': " + msg);
  };
  if (name.empty()) throw ValidationError("parameter with empty name");
  if (arity_min < 1 || arity_max < arity_min) fail("arity must satisfy 1 <= min <= max");
  if (kind == ParamKind::categorical) {
    if (choices.empty()) fail("categorical parameter needs choices");
    std::set<std::string> seen(choices.begin(), choices.end());
    if (seen.size() != choices.size()) fail("duplicate categorical choice");
    if (log_scale) fail("categorical parameter cannot be log-scaled");
    return;
  }
  if (!std::isfinite(lower) || !std::isfinite(upper)) fail("bounds must be finite");
  if (!(lower < upper)) fail("lower bound must be below upper bound");
  if (log_scale && !(lower > 0.0)) fail("log-scale parameter needs a positive lower bound");
  if (kind == ParamKind::integer && (lower != std::floor(lower) || upper != std::floor(upper)))
    fail("integer bounds must be integral");
  if (!(hard_lower <= lower) || !(hard_upper >= upper)) fail("hard limits must contain the bounds");
}

double ParamDef::encode(double raw) const { return log_scale ? std::log10(raw) : raw; }

double ParamDef::decode(double encoded) const {
  if (!log_scale) return encoded;
  const double raw = std::pow(10.0, encoded);
  return kind == ParamKind::integer ? std::round(raw) : raw;
}

double ParamDef::encoded_lower() const {
  return kind == ParamKind::categorical ? 0.0 : encode(lower);
}

double ParamDef::encoded_upper() const {
  return kind == ParamKind::categorical ? static_cast<double>(choices.size() - 1) : encode(upper);
}

void SearchSpace::validate() const {
  std::set<std::string> names;
  for (const auto& p : params) {
    p.validate();
    if (!names.insert(p.name).second)
      throw ValidationError("duplicate parameter name '" + p.name + "'");
  }
}

std::optional<std::size_t> SearchSpace::find(std::string_view name) const {
  for (std::size_t i = 0; i < params.size(); ++i)
    if (params[i].name == name) return i;
  return std::nullopt;
}

std::vector<Column> SearchSpace::columns() const {
  std::vector<Column> out;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& p = params[i];
    if (p.variable_arity()) {
      out.push_back({p.name + ".len", i, -1, ParamKind::integer,
                     static_cast<double>(p.arity_min), static_cast<double>(p.arity_max)});
    }
    for (int k = 0; k < p.arity_max; ++k) {
      std::string name = p.is_list() ? p.name + "[" + std::to_string(k) + "]" : p.name;
      out.push_back({std::move(name), i, k, p.kind, p.encoded_lower(), p.encoded_upper(), p.log_scale});
    }
  }
  return out;
}

namespace {

ParamDef param_from_json(const json& j) {
  ParamDef p;
  try {
    p.name = j.at("name").get<std::string>();
    p.kind = parse_param_kind(j.value("kind", std::string("continuous")));
    p.log_scale = j.value("log_scale", false);
    if (p.kind == ParamKind::categorical) {
      p.choices = j.at("choices").get<std::vector<std::string>>();
    } else {
      p.lower = j.at("lower").get<double>();
      p.upper = j.at("upper").get<double>();
    }
    if (j.contains("arity")) {
      const auto& a = j.at("arity");
      if (a.is_array()) {
        if (a.size() != 2) throw ValidationError("arity range must be [min, max]");
        p.arity_min = a[0].get<int>();
        p.arity_max = a[1].get<int>();
      } else {
        p.arity_min = p.arity_max = a.get<int>();
      }
    }
    if (j.contains("hard_lower") && !j["hard_lower"].is_null())
      p.hard_lower = j["hard_lower"].get<double>();
    if (j.contains("hard_upper") && !j["hard_upper"].is_null())
      p.hard_upper = j["hard_upper"].get<double>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("search space parameter: ") + e.what());
  }
  if (p.log_scale && p.hard_lower < 0.0) p.hard_lower = 0.0;
  return p;
}

}  // namespace

SearchSpace space_from_json(const json& doc) {
  if (!doc.is_object() || !doc.contains("params") || !doc["params"].is_array())
    throw ParseError("search space must be an object with a 'params' array");
  SearchSpace space;
  for (const auto& j : doc["params"]) space.params.push_back(param_from_json(j));
  space.validate();
  return space;
}

json space_to_json(const SearchSpace& space) {
  json params = json::array();
  for (const auto& p : space.params) {
    json j;
    j["name"] = p.name;
    j["kind"] = std::string(to_string(p.kind));
    if (p.kind == ParamKind::categorical) {
      j["choices"] = p.choices;
    } else {
      j["lower"] = p.lower;
      j["upper"] = p.upper;
    }
    j["log_scale"] = p.log_scale;
    if (p.variable_arity())
      j["arity"] = {p.arity_min, p.arity_max};
    else
      j["arity"] = p.arity_max;
    if (std::isfinite(p.hard_lower)) j["hard_lower"] = p.hard_lower;
    if (std::isfinite(p.hard_upper)) j["hard_upper"] = p.hard_upper;
    params.push_back(std::move(j));
  }
  return json{{"params", std::move(params)}};
}

SearchSpace load_space(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open search space file '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError("search space '" + path + "': " + e.what());
  }
  return space_from_json(doc);
}

}  // namespace tunelens
