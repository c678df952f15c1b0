#pragma once

#include <cstddef>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace tunelens {

enum class ParamKind { continuous, integer, categorical };

std::string_view to_string(ParamKind kind);
ParamKind parse_param_kind(std::string_view text);

/// One hyperparameter dimension.
///
/// A parameter may repeat: `arity_min..arity_max` scalar slots (one per hidden
/// layer, say). Each slot shares the kind and bounds. Categorical values are
/// carried as the ordinal index of the label in `choices`.
struct ParamDef {
  std::string name;
  ParamKind kind = ParamKind::continuous;
  double lower = 0.0;
  double upper = 1.0;
  bool log_scale = false;
  std::vector<std::string> choices;
  int arity_min = 1;
  int arity_max = 1;
  // Hard domain limits used to clamp bound advice (raw space).
  double hard_lower = -std::numeric_limits<double>::infinity();
  double hard_upper = std::numeric_limits<double>::infinity();

  bool variable_arity() const { return arity_min != arity_max; }
  bool is_list() const { return arity_max > 1; }
  bool numeric() const { return kind != ParamKind::categorical; }

  /// Throws ValidationError when the definition is inconsistent.
  void validate() const;

  /// Raw value -> encoded value (log10 for log-scale params).
  double encode(double raw) const;
  double decode(double encoded) const;
  double encoded_lower() const;
  double encoded_upper() const;
};

/// A column of the encoded feature matrix.
struct Column {
  std::string name;
  std::size_t param = 0;
  int slot = 0;  // -1 marks the "name.len" arity column
  ParamKind kind = ParamKind::continuous;
  double lower = 0.0;  // encoded-space bounds
  double upper = 1.0;
  bool log_scale = false;

  bool is_length() const { return slot < 0; }
  /// Integer-valued in encoded space (length, linear integer, categorical).
  bool discrete() const { return kind != ParamKind::continuous && !log_scale; }
};

struct SearchSpace {
  std::vector<ParamDef> params;

  void validate() const;
  std::optional<std::size_t> find(std::string_view name) const;
  /// Encoded column layout: parameters in declaration order; a variable
  /// arity parameter contributes "name.len" followed by its slots.
  std::vector<Column> columns() const;
};

SearchSpace space_from_json(const nlohmann::json& doc);
nlohmann::json space_to_json(const SearchSpace& space);
SearchSpace load_space(const std::string& path);

}  // namespace tunelens
