#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

namespace rfit {

/// The 2x2 (arm by child) table a binary split induces on a node.  Counts
/// are weighted (bootstrap multiplicities), so they are doubles holding
/// integers.
struct NodeTable {
  double n0L = 0, n0R = 0, n1L = 0, n1R = 0;
  double s0L = 0, s0R = 0, s1L = 0, s1R = 0;
  double sum_y_sq = 0;

  double n() const noexcept { return n0L + n0R + n1L + n1R; }
  double min_cell() const noexcept;
  /// (mean_1L - mean_0L) - (mean_1R - mean_0R); requires nonempty cells.
  double did() const noexcept;
};

/// Tallies the table for rows flagged by `in_left` (nonzero = left child).
/// `w` holds replication weights; empty means unit weights.
NodeTable node_table(std::span<const double> y, std::span<const std::uint8_t> t, std::span<const std::uint8_t> in_left,
                     std::span<const double> w = {});

/// Pooled within-cell variance (sum y^2 - sum_cells n*mean^2) / (n - 4).
/// nullopt when n <= 4 or a cell is empty; 0 for numerically constant
/// responses.
std::optional<double> pooled_sigma2(const NodeTable& table);

/// Squared difference-in-differences over its estimated variance.
/// nullopt when a cell is empty or sigma2 <= 0.
std::optional<double> q_statistic(const NodeTable& table, double sigma2);

/// Exact Q of a table when every cell holds at least `min_arm` weight.
std::optional<double> exact_q(const NodeTable& table, double min_arm);

enum class SplitMethod { gs, sss };

struct SplitCandidate {
  std::size_t covariate = 0;
  double cutpoint = std::numeric_limits<double>::quiet_NaN();
  double q = 0.0;
  double did = 0.0;
  SplitMethod method = SplitMethod::gs;
  bool valid = false;
  /// Brent iterations used (SSS only).
  int iterations = 0;
};

/// Best cut by exhaustive search with running cell sums: one sort, then a
/// linear sweep over boundaries between consecutive distinct values.
/// Cutpoints are midpoints; ties in Q go to the smallest cutpoint.
SplitCandidate greedy_best_cut(std::span<const double> x, std::span<const double> y, std::span<const std::uint8_t> t,
                               std::span<const double> w = {}, double min_arm = 5);

/// Same search, but the full table is re-tallied from scratch at every
/// candidate cut (O(K n)).  Kept as the slow reference for benchmarking.
SplitCandidate greedy_best_cut_naive(std::span<const double> x, std::span<const double> y,
                                     std::span<const std::uint8_t> t, std::span<const double> w = {},
                                     double min_arm = 5);

struct SssConfig {
  double a = 10.0;
  double brent_tol = 1e-4;
  int brent_max_iter = 100;

  /// Throws std::invalid_argument unless 1 <= a <= 1000, tol > 0, max_iter > 0.
  void validate() const;
};

/// Logistic sigmoid 1 / (1 + exp(-a (x - c))), saturating without overflow.
double expit(double x, double a, double c) noexcept;

/// Node totals that do not depend on the cut.
struct SurrogateTotals {
  double n0 = 0, n1 = 0, s0 = 0, s1 = 0, sum_y_sq = 0;
};

SurrogateTotals surrogate_totals(std::span<const double> y, std::span<const std::uint8_t> t,
                                 std::span<const double> w = {});

/// Smoothed split statistic at cut c on standardized x: every indicator
/// I(x <= c) in the table is replaced by the sigmoid weight, then the usual
/// Q formula is applied.  Returns 0 if any smoothed cell count is below 1 or
/// the smoothed variance is not positive.
double sss_objective(double c, std::span<const double> x_std, std::span<const double> y,
                     std::span<const std::uint8_t> t, std::span<const double> w, double a,
                     const SurrogateTotals& totals);

/// Evaluates the smoothed statistic repeatedly for one node.  Row i enters the
/// "L" cells with weight expit(x_i; a, c) and the "R" cells with the rest; the
/// statistic is symmetric in the two children, so which side the sigmoid
/// tracks does not matter.
class SurrogateObjective {
 public:
  SurrogateObjective(std::span<const double> x_std, std::span<const double> y, std::span<const std::uint8_t> t,
                     std::span<const double> w, double a);

  double operator()(double c) const noexcept;
  const SurrogateTotals& totals() const noexcept { return totals_; }

 private:
  std::vector<double> x_, wt1_, wt0_, wy1_, wy0_;
  SurrogateTotals totals_;
  double a_;
};

/// Best cut by maximizing the smoothed statistic with Brent's method over the
/// standardized range of cuts that leave at least `min_arm` weight in each
/// cell.  The cut is mapped back to the original scale and the returned Q and
/// DID are the exact values at the hard threshold x <= cutpoint.
SplitCandidate sss_best_cut(std::span<const double> x, std::span<const double> y, std::span<const std::uint8_t> t,
                            std::span<const double> w, const SssConfig& config, double min_arm = 5);

}  // namespace rfit
