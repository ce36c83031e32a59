#include "rfit/regression_forest.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <numeric>
#include <stdexcept>

#include "rfit/parallel.hpp"

namespace rfit {

namespace {

constexpr std::uint64_t kTreatedStreams = std::uint64_t{1} << 40;
constexpr std::uint64_t kControlStreams = std::uint64_t{2} << 40;

struct Pending {
  std::size_t node;
  std::size_t begin;
  std::size_t end;
  std::size_t depth;
};

struct Cut {
  double gain = 0.0;
  double cutpoint = 0.0;
  bool valid = false;
};

Cut best_sse_cut(std::span<const double> x, std::span<const double> y, std::span<const double> w, double min_leaf,
                 std::vector<std::size_t>& order) {
  const std::size_t m = x.size();
  order.resize(m);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  double n = 0, s = 0;
  for (std::size_t i = 0; i < m; ++i) {
    n += w[i];
    s += w[i] * y[i];
  }
  const double parent = s * s / n;
  Cut best;
  double nl = 0, sl = 0;
  for (std::size_t k = 0; k + 1 < m; ++k) {
    const std::size_t i = order[k];
    nl += w[i];
    sl += w[i] * y[i];
    const double here = x[i], next = x[order[k + 1]];
    if (!(here < next)) continue;
    const double nr = n - nl;
    if (nl < min_leaf || nr < min_leaf) continue;
    const double sr = s - sl;
    const double gain = sl * sl / nl + sr * sr / nr - parent;
    if (gain > 1e-12 * std::fabs(parent) && (!best.valid || gain > best.gain)) {
      best = {gain, std::midpoint(here, next), true};
    }
  }
  return best;
}

}  // namespace

RegressionTreeParams RegressionTreeParams::matching(const TreeParams& tree) {
  RegressionTreeParams r;
  r.mtry = tree.mtry;
  r.min_node = tree.min_node;
  r.min_leaf = tree.min_arm;
  r.max_depth = tree.max_depth;
  return r;
}

double RegressionTree::predict(std::span<const double> row) const {
  std::size_t k = 0;
  while (!nodes_[k].is_terminal()) {
    const auto& nd = nodes_[k];
    const auto j = static_cast<std::size_t>(nd.covariate);
    if (j >= row.size()) throw PredictionError("row has no value for covariate " + std::to_string(j));
    double v = row[j];
    if (std::isnan(v)) throw PredictionError("row is missing covariate " + std::to_string(j) + " tested by the tree");
    if (j < coding_.size() && !coding_[j].empty()) v = coding_[j].code(v);
    k = static_cast<std::size_t>(v <= nd.cutpoint ? nd.left : nd.right);
  }
  return nodes_[k].value;
}

RegressionTree grow_regression_tree(const RegressionData& data, std::span<const double> weights,
                                    const RegressionTreeParams& params, Rng& rng) {
  const std::size_t n = data.y.size();
  const std::size_t p = data.columns.size();
  if (p == 0) throw std::invalid_argument("regression tree needs at least one covariate");
  if (weights.size() != n) throw std::invalid_argument("regression tree weights must match rows");
  const std::size_t mtry = params.mtry ? params.mtry : std::max<std::size_t>(1, p / 3);
  if (mtry > p) throw std::invalid_argument("mtry must lie in [1, p]");
  const auto y = data.y;

  std::vector<std::size_t> idx;
  double total_w = 0, total_s = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (weights[i] <= 0.0) continue;
    idx.push_back(i);
    total_w += weights[i];
    total_s += weights[i] * y[i];
  }
  if (idx.empty()) throw FitError("regression tree has no rows with positive weight");

  std::vector<NominalCoding> coding(p);
  std::vector<std::vector<double>> coded(p);
  for (std::size_t j = 0; j < p; ++j) {
    if (j >= data.meta.size() || !data.meta[j].is_nominal()) continue;
    const auto& labels = data.meta[j].levels;
    std::vector<double> lw(labels.size(), 0.0), ls(labels.size(), 0.0);
    for (std::size_t i : idx) {
      const auto l = static_cast<std::size_t>(data.columns[j][i]);
      lw[l] += weights[i];
      ls[l] += weights[i] * y[i];
    }
    const double overall = total_s / total_w;
    std::vector<double> mean(labels.size());
    for (std::size_t l = 0; l < labels.size(); ++l) mean[l] = lw[l] > 0 ? ls[l] / lw[l] : overall;
    std::vector<std::size_t> order(labels.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return mean[a] != mean[b] ? mean[a] < mean[b] : labels[a] < labels[b];
    });
    coding[j].code_of_level.resize(labels.size());
    for (std::size_t r = 0; r < order.size(); ++r) coding[j].code_of_level[order[r]] = static_cast<double>(r);
    double nearest = std::numeric_limits<double>::infinity();
    for (std::size_t l = 0; l < labels.size(); ++l) {
      const double gap = std::fabs(mean[l] - overall);
      if (gap < nearest) {
        nearest = gap;
        coding[j].fallback = coding[j].code_of_level[l];
      }
    }
    coded[j].resize(n);
    for (std::size_t i = 0; i < n; ++i) coded[j][i] = coding[j].code(data.columns[j][i]);
  }
  auto column = [&](std::size_t j) -> std::span<const double> {
    return coding[j].empty() ? data.columns[j] : std::span<const double>(coded[j]);
  };

  std::vector<RegressionNode> nodes(1);
  std::vector<Pending> stack{{0, 0, idx.size(), 0}};
  std::vector<std::size_t> vars(p), order;
  std::iota(vars.begin(), vars.end(), 0);
  std::vector<double> xs, ys, ws;
  const auto min_leaf = static_cast<double>(std::max<std::size_t>(params.min_leaf, 1));

  while (!stack.empty()) {
    const Pending cur = stack.back();
    stack.pop_back();
    const std::span<const std::size_t> rows(idx.data() + cur.begin, cur.end - cur.begin);
    double nw = 0, sw = 0;
    double ymin = y[rows.front()], ymax = ymin;
    for (std::size_t i : rows) {
      nw += weights[i];
      sw += weights[i] * y[i];
      ymin = std::min(ymin, y[i]);
      ymax = std::max(ymax, y[i]);
    }
    nodes[cur.node].value = sw / nw;
    if (cur.depth >= params.max_depth || nw < static_cast<double>(params.min_node) || ymin == ymax) continue;

    const std::size_t m = rows.size();
    xs.resize(m);
    ys.resize(m);
    ws.resize(m);
    for (std::size_t k = 0; k < m; ++k) {
      ys[k] = y[rows[k]];
      ws[k] = weights[rows[k]];
    }
    Cut best;
    std::size_t best_j = 0;
    for (std::size_t d = 0; d < mtry; ++d) {
      std::swap(vars[d], vars[d + rng.below(p - d)]);
      const std::size_t j = vars[d];
      const auto col = column(j);
      for (std::size_t k = 0; k < m; ++k) xs[k] = col[rows[k]];
      const Cut c = best_sse_cut(xs, ys, ws, min_leaf, order);
      if (c.valid && (!best.valid || c.gain > best.gain)) {
        best = c;
        best_j = j;
      }
    }
    if (!best.valid) continue;

    const auto col = column(best_j);
    const auto first = idx.begin() + static_cast<std::ptrdiff_t>(cur.begin);
    const auto last = idx.begin() + static_cast<std::ptrdiff_t>(cur.end);
    const auto split = std::stable_partition(first, last, [&](std::size_t i) { return col[i] <= best.cutpoint; });
    const auto mid = static_cast<std::size_t>(split - idx.begin());
    const auto left = static_cast<std::int32_t>(nodes.size());
    nodes[cur.node].covariate = static_cast<int>(best_j);
    nodes[cur.node].cutpoint = best.cutpoint;
    nodes[cur.node].left = left;
    nodes[cur.node].right = left + 1;
    nodes.resize(nodes.size() + 2);
    stack.push_back({static_cast<std::size_t>(left + 1), mid, cur.end, cur.depth + 1});
    stack.push_back({static_cast<std::size_t>(left), cur.begin, mid, cur.depth + 1});
  }
  return RegressionTree(std::move(nodes), std::move(coding));
}

RegressionForest RegressionForest::fit(const RegressionData& data, std::size_t b, const RegressionTreeParams& params,
                                       std::uint64_t seed, std::uint64_t stream_base, unsigned threads) {
  if (b < 1) throw std::invalid_argument("the forest needs b >= 1 trees");
  const std::size_t n = data.y.size();
  std::vector<RegressionTree> trees(b);
  parallel_for(b, threads, [&](std::size_t k) {
    Rng rng(seed, stream_base + k);
    std::vector<std::uint16_t> counts(n);
    draw_bootstrap_counts(rng, counts);
    std::vector<double> w(counts.begin(), counts.end());
    trees[k] = grow_regression_tree(data, w, params, rng);
  });
  return RegressionForest(std::move(trees));
}

double RegressionForest::predict(std::span<const double> row) const {
  double sum = 0.0;
  for (const auto& tree : trees_) sum += tree.predict(row);
  return sum / static_cast<double>(trees_.size());
}

SrModel SrModel::fit(const TrialDataset& data, const ForestParams& params) {
  const auto tree_params = RegressionTreeParams::matching(params.tree);
  const std::size_t p = data.p();

  SrModel model;
  for (std::uint8_t arm : {std::uint8_t{1}, std::uint8_t{0}}) {
    std::vector<double> y;
    std::vector<std::vector<double>> cols(p);
    for (std::size_t i = 0; i < data.n(); ++i) {
      if (data.t()[i] != arm) continue;
      y.push_back(data.y()[i]);
      for (std::size_t j = 0; j < p; ++j) cols[j].push_back(data.column(j)[i]);
    }
    if (y.size() < tree_params.min_node) {
      throw FitError(std::string(arm ? "treated" : "control") + " arm has " + std::to_string(y.size()) +
                     " rows, fewer than min_node = " + std::to_string(tree_params.min_node));
    }
    RegressionData rd{y, {}, data.columns_meta()};
    for (const auto& c : cols) rd.columns.emplace_back(c);
    auto forest = RegressionForest::fit(rd, params.b, tree_params, params.seed, arm ? kTreatedStreams : kControlStreams,
                                        params.threads);
    if (arm) {
      model.forest1_ = std::move(forest);
      model.n1_ = y.size();
    } else {
      model.forest0_ = std::move(forest);
      model.n0_ = y.size();
    }
  }
  return model;
}

std::vector<double> SrModel::predict(const std::vector<std::vector<double>>& rows) const {
  std::vector<double> out(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) out[r] = predict(rows[r]);
  return out;
}

}  // namespace rfit
