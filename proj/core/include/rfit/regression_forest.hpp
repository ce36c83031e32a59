#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "rfit/data.hpp"
#include "rfit/forest.hpp"
#include "rfit/random.hpp"
#include "rfit/tree.hpp"

namespace rfit {

struct RegressionTreeParams {
  /// 0 selects max(1, floor(p / 3)).
  std::size_t mtry = 0;
  std::size_t min_node = 20;
  std::size_t min_leaf = 5;
  std::size_t max_depth = 30;

  /// Same node-size and mtry settings an interaction tree would use.
  static RegressionTreeParams matching(const TreeParams& tree);
};

/// Response plus covariate columns for a regression fit.  Nominal columns
/// (non-empty `levels` in the meta) hold level indices.
struct RegressionData {
  std::span<const double> y;
  std::vector<std::span<const double>> columns;
  std::vector<ColumnMeta> meta;
};

struct RegressionNode {
  int covariate = -1;
  double cutpoint = 0.0;
  std::int32_t left = -1;
  std::int32_t right = -1;
  double value = 0.0;

  bool is_terminal() const noexcept { return covariate < 0; }
};

class RegressionTree {
 public:
  RegressionTree() = default;
  RegressionTree(std::vector<RegressionNode> nodes, std::vector<NominalCoding> coding)
      : nodes_(std::move(nodes)), coding_(std::move(coding)) {}

  const std::vector<RegressionNode>& nodes() const noexcept { return nodes_; }
  double predict(std::span<const double> row) const;

 private:
  std::vector<RegressionNode> nodes_;
  std::vector<NominalCoding> coding_;
};

/// CART regression tree: each split maximizes the reduction in weighted
/// within-child sum of squares over `mtry` sampled covariates; terminals hold
/// weighted means.  Nominal levels are ordered by their weighted mean
/// response in the root sample.
RegressionTree grow_regression_tree(const RegressionData& data, std::span<const double> weights,
                                    const RegressionTreeParams& params, Rng& rng);

/// Bagged regression trees.
class RegressionForest {
 public:
  RegressionForest() = default;
  explicit RegressionForest(std::vector<RegressionTree> trees) : trees_(std::move(trees)) {}

  /// `stream_base` offsets the per-tree RNG streams so that independent
  /// forests fitted from one seed do not share streams.
  static RegressionForest fit(const RegressionData& data, std::size_t b, const RegressionTreeParams& params,
                              std::uint64_t seed, std::uint64_t stream_base, unsigned threads = 0);

  std::size_t size() const noexcept { return trees_.size(); }
  const std::vector<RegressionTree>& trees() const noexcept { return trees_; }
  double predict(std::span<const double> row) const;

 private:
  std::vector<RegressionTree> trees_;
};

/// Separate-regression ITE model: one forest per arm, prediction is the
/// treated-arm forest minus the control-arm forest.
class SrModel {
 public:
  static SrModel fit(const TrialDataset& data, const ForestParams& params);

  const RegressionForest& treated() const noexcept { return forest1_; }
  const RegressionForest& control() const noexcept { return forest0_; }
  std::size_t n_treated() const noexcept { return n1_; }
  std::size_t n_control() const noexcept { return n0_; }

  double predict(std::span<const double> row) const { return forest1_.predict(row) - forest0_.predict(row); }
  std::vector<double> predict(const std::vector<std::vector<double>>& rows) const;

 private:
  RegressionForest forest1_;
  RegressionForest forest0_;
  std::size_t n1_ = 0;
  std::size_t n0_ = 0;
};

}  // namespace rfit
