#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "rfit/forest.hpp"
#include "rfit/models.hpp"
#include "rfit/report.hpp"

namespace rfit {

/// Cutoff recovery on the single-threshold model: each replicate draws a
/// fresh sample and estimates the cut by greedy search and by the smoothed
/// search at every `a` in the grid.
struct CutpointStudyConfig {
  std::size_t n = 500;
  /// 0 = continuous x, otherwise the number of distinct x values.
  std::size_t k = 0;
  double c0 = 0.5;
  double noise_sd = 1.0;
  std::size_t replicates = 50;
  std::vector<double> a_grid{1.0, 5.0, 10.0, 20.0, 50.0};
  double min_arm = 5;
  unsigned threads = 0;
};

ExperimentReport run_cutpoint_study(const CutpointStudyConfig& config, std::uint64_t seed);

/// RFIT against separate regression on a test set drawn once per model.
struct MseStudyConfig {
  std::vector<IteModel> models{IteModel::I, IteModel::II, IteModel::III, IteModel::IV};
  std::size_t n = 100;
  std::size_t n_test = 500;
  std::size_t replicates = 50;
  ForestParams forest = default_forest(500);
  unsigned threads = 0;

  static ForestParams default_forest(std::size_t b) {
    ForestParams p;
    p.b = b;
    return p;
  }
};

ExperimentReport run_mse_study(const MseStudyConfig& config, std::uint64_t seed);

/// Replicate spread of RFIT estimates at fixed test points against the
/// average IJ standard errors.
struct SeStudyConfig {
  IteModel model = IteModel::III;
  std::size_t n = 200;
  std::size_t n_test = 20;
  std::size_t replicates = 100;
  ForestParams forest = MseStudyConfig::default_forest(2000);
  unsigned threads = 0;
};

ExperimentReport run_se_study(const SeStudyConfig& config, std::uint64_t seed);

/// Wall time of one best-cut search on the discrete threshold model, per
/// (n, K) cell and method, averaged over `repeats` after one discarded
/// warm-up call.
struct TimingBenchConfig {
  std::vector<std::size_t> n_grid{50, 100, 500, 1000, 2000, 5000, 10000};
  std::vector<std::size_t> k_grid{10, 100, 500};
  std::size_t repeats = 10;
  double a = 10.0;
  double min_arm = 5;
};

ExperimentReport run_timing_bench(const TimingBenchConfig& config, std::uint64_t seed);

/// n-by-(method, K) matrix of mean seconds from a timing report.
void write_timing_table(std::ostream& out, const ExperimentReport& timing);

/// Median of a copy of `v`; NaN when empty.
double median(std::vector<double> v);
/// Least-squares slope of y on x.
double ols_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace rfit
