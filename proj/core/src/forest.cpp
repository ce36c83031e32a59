#include "rfit/forest.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

#include "rfit/parallel.hpp"

namespace rfit {

namespace {

constexpr int kMaxRedraws = 100;

bool root_admissible(const TrialDataset& data, std::span<const std::uint16_t> counts, std::size_t min_arm) {
  std::size_t n1 = 0, n0 = 0;
  const auto t = data.t();
  for (std::size_t i = 0; i < counts.size(); ++i) (t[i] ? n1 : n0) += counts[i];
  return n1 >= min_arm && n0 >= min_arm;
}

}  // namespace

void draw_bootstrap_counts(Rng& rng, std::span<std::uint16_t> counts) {
  std::fill(counts.begin(), counts.end(), std::uint16_t{0});
  const std::size_t n = counts.size();
  for (std::size_t k = 0; k < n; ++k) {
    auto& c = counts[rng.below(n)];
    if (c == std::numeric_limits<std::uint16_t>::max()) throw FitError("bootstrap count overflowed 16 bits");
    ++c;
  }
}

RfitForest::RfitForest(std::vector<InteractionTree> trees, CountMatrix counts, ForestParams params,
                       std::vector<ColumnMeta> columns)
    : trees_(std::move(trees)), counts_(std::move(counts)), params_(params), columns_(std::move(columns)) {
  if (trees_.empty()) throw std::invalid_argument("a forest needs at least one tree");
  if (counts_.b() != trees_.size()) throw std::invalid_argument("count matrix rows must match the number of trees");
  params_.b = trees_.size();
}

RfitForest RfitForest::fit(const TrialDataset& data, const ForestParams& params) {
  if (params.b < 1) throw std::invalid_argument("the forest needs b >= 1 trees");
  params.tree.validate(data.p());
  const std::size_t n = data.n();

  std::vector<InteractionTree> trees(params.b);
  CountMatrix counts(params.b, n);
  parallel_for(params.b, params.threads, [&](std::size_t k) {
    Rng rng(params.seed, k);
    auto row = counts.row(k);
    for (int attempt = 0;; ++attempt) {
      if (attempt == kMaxRedraws) {
        throw FitError("bootstrap resample " + std::to_string(k) + " left an arm below min_arm after " +
                       std::to_string(kMaxRedraws) + " redraws");
      }
      draw_bootstrap_counts(rng, row);
      if (root_admissible(data, row, params.tree.min_arm)) break;
    }
    trees[k] = grow_tree(data, row, params.tree, rng);
  });
  return RfitForest(std::move(trees), std::move(counts), params, data.columns_meta());
}

IteEstimate RfitForest::predict_ite(std::span<const double> row) const {
  if (row.size() != columns_.size()) {
    throw PredictionError("row has " + std::to_string(row.size()) + " covariates, model expects " +
                          std::to_string(columns_.size()));
  }
  IteEstimate out;
  out.per_tree.resize(trees_.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < trees_.size(); ++k) {
    out.per_tree[k] = trees_[k].predict(row);
    sum += out.per_tree[k];
  }
  out.estimate = sum / static_cast<double>(trees_.size());
  return out;
}

ItePrediction RfitForest::predict_with_se(std::span<const double> row) const {
  if (trees_.size() < 2) throw PredictionError("standard errors need a forest of at least 2 trees");
  const auto ite = predict_ite(row);
  const auto v = ij_variance(counts_, ite.per_tree, ite.estimate);
  ItePrediction p;
  p.estimate = ite.estimate;
  p.var_raw = v.raw;
  p.var_c0 = v.c0;
  p.var_c = v.c;
  if (p.var_c0 < 0.0) {
    p.var_c0 = 0.0;
    p.clamped_c0 = true;
  }
  if (p.var_c < 0.0) {
    p.var_c = 0.0;
    p.clamped_c = true;
  }
  return p;
}

std::vector<ItePrediction> RfitForest::predict_with_se(const std::vector<std::vector<double>>& rows,
                                                       unsigned threads) const {
  std::vector<ItePrediction> out(rows.size());
  parallel_for(rows.size(), threads, [&](std::size_t r) { out[r] = predict_with_se(rows[r]); });
  return out;
}

std::vector<double> RfitForest::predict(const std::vector<std::vector<double>>& rows) const {
  std::vector<double> out(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) out[r] = predict_ite(rows[r]).estimate;
  return out;
}

std::vector<std::vector<double>> dataset_rows(const TrialDataset& data) {
  std::vector<std::vector<double>> rows(data.n());
  for (std::size_t i = 0; i < data.n(); ++i) rows[i] = data.row(i);
  return rows;
}

}  // namespace rfit
