#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "rfit/data.hpp"
#include "rfit/tree.hpp"

namespace rfit {

inline constexpr std::uint64_t kDefaultSeed = 20190517;

struct ForestParams {
  std::size_t b = 2000;
  TreeParams tree;
  std::uint64_t seed = kDefaultSeed;
  /// Worker threads for fitting and batch prediction; 0 = all cores.
  /// Results do not depend on this value.
  unsigned threads = 0;
};

/// B-by-n bootstrap multiplicities, row-major (row b = resample b).
class CountMatrix {
 public:
  CountMatrix() = default;
  CountMatrix(std::size_t b, std::size_t n) : b_(b), n_(n), data_(b * n, 0) {}

  std::size_t b() const noexcept { return b_; }
  std::size_t n() const noexcept { return n_; }
  std::span<std::uint16_t> row(std::size_t k) noexcept { return {data_.data() + k * n_, n_}; }
  std::span<const std::uint16_t> row(std::size_t k) const noexcept { return {data_.data() + k * n_, n_}; }
  std::uint16_t operator()(std::size_t k, std::size_t i) const noexcept { return data_[k * n_ + i]; }

 private:
  std::size_t b_ = 0;
  std::size_t n_ = 0;
  std::vector<std::uint16_t> data_;
};

/// Multinomial(n; 1/n, ..., 1/n) resample counts.
void draw_bootstrap_counts(Rng& rng, std::span<std::uint16_t> counts);

/// Raw IJ variance and its two bias-corrected versions, before clamping.
struct IjVariance {
  double raw = 0.0;
  /// Subtracts the Monte Carlo variance of each Z-bar term directly.
  double c0 = 0.0;
  /// Subtracts (n-1)/B^2 times the spread of the per-tree predictions.
  double c = 0.0;
};

/// Z_bi = (N_bi - 1)(pred_b - estimate); V = sum_i Zbar_i^2.
/// Requires B >= 2 and matching shapes.
IjVariance ij_variance(const CountMatrix& counts, std::span<const double> per_tree, double estimate);

/// Zbar_i for every training row: the bootstrap covariance between N_bi and
/// the per-tree prediction.
std::vector<double> ij_zbar(const CountMatrix& counts, std::span<const double> per_tree, double estimate);

enum class SeVariant { raw, c0, c };

struct ItePrediction {
  double estimate = 0.0;
  double var_raw = 0.0;
  double var_c0 = 0.0;
  double var_c = 0.0;
  /// Set when the corrected variance was negative and reported as 0.
  bool clamped_c0 = false;
  bool clamped_c = false;

  double variance(SeVariant v) const noexcept;
  double se(SeVariant v = SeVariant::c) const noexcept;
};

struct IteEstimate {
  double estimate = 0.0;
  std::vector<double> per_tree;
};

/// Random forest of interaction trees.  Immutable once fitted.
class RfitForest {
 public:
  RfitForest(std::vector<InteractionTree> trees, CountMatrix counts, ForestParams params,
             std::vector<ColumnMeta> columns);

  static RfitForest fit(const TrialDataset& data, const ForestParams& params);

  std::size_t size() const noexcept { return trees_.size(); }
  std::size_t n_train() const noexcept { return counts_.n(); }
  const std::vector<InteractionTree>& trees() const noexcept { return trees_; }
  const CountMatrix& counts() const noexcept { return counts_; }
  const ForestParams& params() const noexcept { return params_; }
  const std::vector<ColumnMeta>& columns() const noexcept { return columns_; }

  IteEstimate predict_ite(std::span<const double> row) const;
  ItePrediction predict_with_se(std::span<const double> row) const;
  std::vector<ItePrediction> predict_with_se(const std::vector<std::vector<double>>& rows,
                                             unsigned threads = 0) const;
  /// Point estimates only; cheaper than predict_with_se.
  std::vector<double> predict(const std::vector<std::vector<double>>& rows) const;

 private:
  std::vector<InteractionTree> trees_;
  CountMatrix counts_;
  ForestParams params_;
  std::vector<ColumnMeta> columns_;
};

/// All rows of a dataset, for in-sample prediction.
std::vector<std::vector<double>> dataset_rows(const TrialDataset& data);

}  // namespace rfit
