#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rfit/data.hpp"
#include "rfit/random.hpp"
#include "rfit/split.hpp"

namespace rfit {

struct TreeParams {
  /// Covariates drawn per node; 0 selects max(1, floor(p / 3)).
  std::size_t mtry = 0;
  std::size_t min_arm = 5;
  std::size_t min_node = 20;
  std::size_t max_depth = 30;
  SplitMethod split_method = SplitMethod::sss;
  SssConfig sss;

  std::size_t resolved_mtry(std::size_t p) const noexcept;
  /// Throws std::invalid_argument when the parameters are inconsistent for p covariates.
  void validate(std::size_t p) const;
};

/// One node of an interaction tree.  Every node records the bootstrap-weighted
/// arm counts and treatment-effect estimate of the rows that reached it;
/// internal nodes also carry the split.
struct TreeNode {
  int covariate = -1;
  double cutpoint = 0.0;
  std::int32_t left = -1;
  std::int32_t right = -1;
  double effect = 0.0;
  std::uint32_t n1 = 0;
  std::uint32_t n0 = 0;
  /// Exact split statistic of the chosen split (internal nodes).
  double q = 0.0;

  bool is_terminal() const noexcept { return covariate < 0; }
};

/// Level-to-code map for a nominal covariate, fixed when the tree was grown.
struct NominalCoding {
  std::vector<double> code_of_level;
  /// Code used for labels the tree never saw.
  double fallback = 0.0;

  bool empty() const noexcept { return code_of_level.empty(); }
  double code(double level_index) const;
};

class InteractionTree {
 public:
  InteractionTree() = default;
  InteractionTree(std::vector<TreeNode> nodes, std::vector<NominalCoding> coding);

  const std::vector<TreeNode>& nodes() const noexcept { return nodes_; }
  const std::vector<NominalCoding>& coding() const noexcept { return coding_; }

  /// Index of the terminal node `row` falls into (x <= cutpoint goes left).
  std::size_t terminal_of(std::span<const double> row) const;
  double predict(std::span<const double> row) const { return nodes_[terminal_of(row)].effect; }

  std::size_t terminal_count() const noexcept;
  std::size_t depth() const noexcept;

 private:
  std::vector<TreeNode> nodes_;
  std::vector<NominalCoding> coding_;
};

struct TerminalEffect {
  double effect = 0.0;
  double n1 = 0.0;
  double n0 = 0.0;
};

/// Treated mean minus control mean over `rows` (weights = replication counts,
/// empty = unit).  Throws FitError if an arm is empty.
TerminalEffect terminal_effect(std::span<const double> y, std::span<const std::uint8_t> t,
                               std::span<const std::size_t> rows, std::span<const double> weights = {});

/// Grows one interaction tree on the sample in which row i appears
/// `counts[i]` times.  At each node `mtry` covariates are drawn without
/// replacement and the split with the largest exact Q wins.  Nominal
/// covariates are coded once per tree from the weighted sample and always
/// searched greedily.
InteractionTree grow_tree(const TrialDataset& data, std::span<const std::uint16_t> counts, const TreeParams& params,
                          Rng& rng);

}  // namespace rfit
