#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

namespace rfit {

using Cell = std::variant<std::int64_t, double, std::string>;

/// Result of one experiment: the configuration it ran with, summary
/// statistics, and a flat table of per-replicate or per-point records.
/// Entries keep insertion order so that output files are reproducible.
struct ExperimentReport {
  std::string experiment;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, std::string>> config;
  std::vector<std::pair<std::string, double>> summary;
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  void set_config(std::string key, std::string value);
  void set_summary(std::string key, double value);
  /// Throws std::out_of_range for unknown keys.
  double summary_value(const std::string& key) const;
  std::size_t column_index(const std::string& name) const;
  void add_row(std::vector<Cell> row);

  nlohmann::ordered_json to_json() const;
  void write_csv(std::ostream& out) const;
  /// Writes dir/report.json and dir/report.csv.
  void write(const std::filesystem::path& dir) const;
};

/// Shortest text that parses back to the same double ("nan", "inf", "-inf"
/// for non-finite values).
std::string format_double(double v);

}  // namespace rfit
