#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tunelens/space.hpp"

namespace tunelens {

/// One slot-value list per parameter, aligned with SearchSpace::params.
/// Values are raw (not log-transformed); categoricals are choice indices.
using Config = std::vector<std::vector<double>>;

struct TrialRecord {
  std::string trial_id;
  Config config;
  double objective = 0.0;  // coverage semantics: higher is better, in [0, 1]
  nlohmann::json tags = nlohmann::json::object();

  /// Number of raw trials merged into this record (tag "group_size", default 1).
  std::size_t group_size() const;
};

struct Study {
  SearchSpace space;
  std::vector<TrialRecord> trials;
};

struct EncodedMatrix {
  std::vector<Column> columns;
  std::size_t rows = 0;
  std::vector<double> x;  // row-major rows x columns.size()
  std::vector<double> y;
  std::vector<std::string> trial_ids;

  std::size_t cols() const { return columns.size(); }
  double at(std::size_t r, std::size_t c) const { return x[r * cols() + c]; }
  std::span<const double> row(std::size_t r) const {
    return {x.data() + r * cols(), cols()};
  }
  std::vector<double> column(std::size_t c) const;
  std::size_t column_index(std::string_view name) const;  // throws ValidationError
};

struct IngestOptions {
  // Treat the file's objective as a loss in [0, 1] and store 1 - objective.
  bool minimize = false;
};

/// Validates a config against the space; throws ValidationError naming the
/// trial and field.
void validate_config(const SearchSpace& space, const Config& config, const std::string& trial_id);

TrialRecord trial_from_json(const nlohmann::json& doc, const SearchSpace& space,
                            const IngestOptions& options = {});
nlohmann::json trial_to_json(const TrialRecord& trial, const SearchSpace& space);

/// Reads JSON-lines trials. Blank lines are skipped.
Study parse_study(std::istream& in, const SearchSpace& space, const IngestOptions& options = {});
Study load_study(const std::string& path, const SearchSpace& space,
                 const IngestOptions& options = {});
void write_study(std::ostream& out, const Study& study);

/// Mean of success flags.
double coverage(const std::vector<bool>& success_flags);

/// Merges trials whose encoded configs are exactly equal. The merged objective
/// is the group-size-weighted mean; order follows first occurrence.
Study aggregate_duplicates(const Study& study);

/// Trials with objective strictly greater than `threshold`.
Study filter_by_objective(const Study& study, double threshold);

std::vector<double> encode_config(const SearchSpace& space, const Config& config);
Config decode_row(const SearchSpace& space, std::span<const double> row);
EncodedMatrix encode(const Study& study);

}  // namespace tunelens
