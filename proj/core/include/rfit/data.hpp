#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rfit/error.hpp"

namespace rfit {

enum class ColumnKind { continuous, nominal };

/// Covariate column metadata.  Nominal columns keep their level labels in
/// lexicographic order; the stored cell value is the index into `levels`.
struct ColumnMeta {
  std::string name;
  ColumnKind kind = ColumnKind::continuous;
  std::vector<std::string> levels;
  double mean = 0.0;
  double sd = 0.0;

  bool is_nominal() const noexcept { return kind == ColumnKind::nominal; }
};

enum class MissingPolicy { error, drop };

/// Which CSV columns play which role.
///
/// An empty `covariates` list means "every column that is not the response,
/// the treatment, or listed in `exclude`".
struct SchemaConfig {
  std::string response;
  std::string treatment;
  std::vector<std::string> covariates;
  std::vector<std::string> nominal;
  std::vector<std::string> exclude;
  MissingPolicy on_missing = MissingPolicy::error;

  static SchemaConfig from_json(std::string_view text);
  static SchemaConfig from_json_file(const std::filesystem::path& path);
};

/// Randomized-trial data: response y, 0/1 treatment t, and an n-by-p
/// covariate matrix stored by column.  Validated on construction and
/// immutable afterwards.
class TrialDataset {
 public:
  TrialDataset(std::vector<double> y, std::vector<std::uint8_t> t,
               std::vector<std::vector<double>> columns, std::vector<ColumnMeta> meta);

  std::size_t n() const noexcept { return y_.size(); }
  std::size_t p() const noexcept { return columns_.size(); }

  std::span<const double> y() const noexcept { return y_; }
  std::span<const std::uint8_t> t() const noexcept { return t_; }
  std::span<const double> column(std::size_t j) const { return columns_.at(j); }
  const ColumnMeta& meta(std::size_t j) const { return meta_.at(j); }
  const std::vector<ColumnMeta>& columns_meta() const noexcept { return meta_; }

  /// Covariate values of row i in column order.
  std::vector<double> row(std::size_t i) const;

  std::size_t n_treated() const noexcept;
  std::size_t n_control() const noexcept { return n() - n_treated(); }

  /// Treated mean minus control mean over all rows.
  double unadjusted_effect() const noexcept;

 private:
  std::vector<double> y_;
  std::vector<std::uint8_t> t_;
  std::vector<std::vector<double>> columns_;
  std::vector<ColumnMeta> meta_;
};

/// Reads a trial CSV (header row, comma separated, '.' decimal point).
/// Cells that are empty or "NA" count as missing.
TrialDataset read_csv(std::istream& in, const SchemaConfig& schema);
TrialDataset load_csv(const std::filesystem::path& path, const SchemaConfig& schema);

/// Writes y, t and covariates (nominal columns as labels) with round-trip
/// precision.  Header: response, treatment, covariate names.
void write_csv(std::ostream& out, const TrialDataset& data, std::string_view response = "y",
               std::string_view treatment = "t");

enum class UnseenLevelPolicy { error, nearest };

/// Unseen nominal labels are stored as this sentinel when the policy is
/// `nearest`; trees route it to the rank closest to the overall effect.
inline constexpr double kUnseenLevel = -1.0;

/// Reads only the covariate columns named in `meta` (by name, any order) for
/// prediction.  Returns one row per record, in `meta` column order.
std::vector<std::vector<double>> read_covariate_rows(std::istream& in, const std::vector<ColumnMeta>& meta,
                                                     UnseenLevelPolicy unseen = UnseenLevelPolicy::error);
std::vector<std::vector<double>> load_covariate_rows(const std::filesystem::path& path,
                                                     const std::vector<ColumnMeta>& meta,
                                                     UnseenLevelPolicy unseen = UnseenLevelPolicy::error);

struct Standardized {
  std::vector<double> values;
  double mean = 0.0;
  double sd = 0.0;
};

/// Centers and scales by the sample mean and sample (n-1) standard deviation.
/// Returns nullopt for a degenerate column (fewer than two values or sd = 0).
std::optional<Standardized> standardize_column(std::span<const double> values);

/// Ordinal coding of a nominal covariate.  `rank_of_level[l]` is the rank of
/// level l (0 = smallest treatment effect); `codes` holds the per-row ranks.
struct NominalEncoding {
  std::vector<int> rank_of_level;
  std::vector<double> effect_of_level;
  std::vector<int> codes;
  bool degenerate = false;
};

/// Ranks levels by their within-level treatment effect (treated mean minus
/// control mean).  A level seen in one arm only takes (that arm's level mean
/// minus the overall mean of the other arm); a level with no rows takes the
/// overall effect.  Ties are broken by level label.  Fewer than two observed
/// levels marks the encoding degenerate.
///
/// `level` holds level indices into `labels`; `weights` (empty = unit) are
/// replication counts.
NominalEncoding rank_levels(std::span<const int> level, std::span<const std::string> labels,
                            std::span<const double> y, std::span<const std::uint8_t> t,
                            std::span<const double> weights = {});

/// Convenience form over raw labels; levels are the distinct labels.
NominalEncoding encode_nominal(std::span<const std::string> labels, std::span<const double> y,
                               std::span<const std::uint8_t> t);

}  // namespace rfit
