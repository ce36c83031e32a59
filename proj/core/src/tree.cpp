#include "rfit/tree.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace rfit {

std::size_t TreeParams::resolved_mtry(std::size_t p) const noexcept {
  if (mtry != 0) return mtry;
  return std::max<std::size_t>(1, p / 3);
}

void TreeParams::validate(std::size_t p) const {
  const std::size_t m = resolved_mtry(p);
  if (m < 1 || m > p) throw std::invalid_argument("mtry must lie in [1, p]");
  if (min_arm < 1) throw std::invalid_argument("min_arm must be at least 1");
  if (min_node < 2 * min_arm) throw std::invalid_argument("min_node must be at least 2 * min_arm");
  sss.validate();
}

double NominalCoding::code(double level_index) const {
  if (level_index < 0.0 || level_index >= static_cast<double>(code_of_level.size())) return fallback;
  return code_of_level[static_cast<std::size_t>(level_index)];
}

InteractionTree::InteractionTree(std::vector<TreeNode> nodes, std::vector<NominalCoding> coding)
    : nodes_(std::move(nodes)), coding_(std::move(coding)) {
  if (nodes_.empty()) throw std::invalid_argument("a tree needs at least one node");
  const auto count = static_cast<std::int32_t>(nodes_.size());
  for (std::size_t k = 0; k < nodes_.size(); ++k) {
    const auto& nd = nodes_[k];
    if (nd.is_terminal()) continue;
    if (nd.left <= static_cast<std::int32_t>(k) || nd.right <= static_cast<std::int32_t>(k) || nd.left >= count ||
        nd.right >= count) {
      throw std::invalid_argument("tree node " + std::to_string(k) + " has invalid children");
    }
  }
}

std::size_t InteractionTree::terminal_of(std::span<const double> row) const {
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
  return k;
}

std::size_t InteractionTree::terminal_count() const noexcept {
  return static_cast<std::size_t>(
      std::count_if(nodes_.begin(), nodes_.end(), [](const TreeNode& nd) { return nd.is_terminal(); }));
}

std::size_t InteractionTree::depth() const noexcept {
  std::vector<std::size_t> d(nodes_.size(), 0);
  std::size_t deepest = 0;
  for (std::size_t k = 0; k < nodes_.size(); ++k) {
    deepest = std::max(deepest, d[k]);
    if (!nodes_[k].is_terminal()) {
      d[static_cast<std::size_t>(nodes_[k].left)] = d[k] + 1;
      d[static_cast<std::size_t>(nodes_[k].right)] = d[k] + 1;
    }
  }
  return deepest;
}

TerminalEffect terminal_effect(std::span<const double> y, std::span<const std::uint8_t> t,
                               std::span<const std::size_t> rows, std::span<const double> weights) {
  double n1 = 0, n0 = 0, s1 = 0, s0 = 0;
  for (std::size_t i : rows) {
    const double w = weights.empty() ? 1.0 : weights[i];
    if (t[i]) {
      n1 += w;
      s1 += w * y[i];
    } else {
      n0 += w;
      s0 += w * y[i];
    }
  }
  if (n1 <= 0.0 || n0 <= 0.0) throw FitError("terminal node has an empty treatment arm");
  return {s1 / n1 - s0 / n0, n1, n0};
}

namespace {

struct Pending {
  std::size_t node;
  std::size_t begin;
  std::size_t end;
  std::size_t depth;
};

NominalCoding make_coding(const NominalEncoding& enc, double overall_effect) {
  NominalCoding coding;
  coding.code_of_level.resize(enc.rank_of_level.size());
  for (std::size_t l = 0; l < enc.rank_of_level.size(); ++l) {
    coding.code_of_level[l] = static_cast<double>(enc.rank_of_level[l]);
  }
  double nearest = std::numeric_limits<double>::infinity();
  for (std::size_t l = 0; l < enc.effect_of_level.size(); ++l) {
    const double gap = std::fabs(enc.effect_of_level[l] - overall_effect);
    const double code = coding.code_of_level[l];
    if (gap < nearest || (gap == nearest && code < coding.fallback)) {
      nearest = gap;
      coding.fallback = code;
    }
  }
  return coding;
}

}  // namespace

InteractionTree grow_tree(const TrialDataset& data, std::span<const std::uint16_t> counts, const TreeParams& params,
                          Rng& rng) {
  const std::size_t n = data.n();
  const std::size_t p = data.p();
  params.validate(p);
  if (counts.size() != n) throw std::invalid_argument("grow_tree: counts length must equal n");
  const std::size_t mtry = params.resolved_mtry(p);
  const auto y = data.y();
  const auto t = data.t();

  std::vector<double> weight(n);
  std::vector<std::size_t> idx;
  double root_n1 = 0, root_n0 = 0, root_s1 = 0, root_s0 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    weight[i] = counts[i];
    if (counts[i] == 0) continue;
    idx.push_back(i);
    if (t[i]) {
      root_n1 += weight[i];
      root_s1 += weight[i] * y[i];
    } else {
      root_n0 += weight[i];
      root_s0 += weight[i] * y[i];
    }
  }
  const auto min_arm = static_cast<double>(params.min_arm);
  if (root_n1 < min_arm || root_n0 < min_arm) {
    const bool treated_short = root_n1 < min_arm;
    throw FitError(std::string(treated_short ? "treated" : "control") + " arm has " +
                   std::to_string(static_cast<long long>(treated_short ? root_n1 : root_n0)) +
                   " rows at the root, fewer than min_arm = " + std::to_string(params.min_arm));
  }

  // Per-tree ordinal coding of nominal covariates.
  std::vector<NominalCoding> coding(p);
  std::vector<std::vector<double>> coded(p);
  std::vector<bool> usable(p, true);
  const double overall = root_s1 / root_n1 - root_s0 / root_n0;
  for (std::size_t j = 0; j < p; ++j) {
    const auto& meta = data.meta(j);
    if (!meta.is_nominal()) continue;
    const auto col = data.column(j);
    std::vector<int> level(n);
    for (std::size_t i = 0; i < n; ++i) level[i] = static_cast<int>(col[i]);
    const auto enc = rank_levels(level, meta.levels, y, t, weight);
    coding[j] = make_coding(enc, overall);
    usable[j] = !enc.degenerate;
    coded[j].resize(n);
    for (std::size_t i = 0; i < n; ++i) coded[j][i] = static_cast<double>(enc.codes[i]);
  }
  auto column = [&](std::size_t j) -> std::span<const double> {
    return data.meta(j).is_nominal() ? std::span<const double>(coded[j]) : data.column(j);
  };

  std::vector<TreeNode> nodes(1);
  std::vector<Pending> stack{{0, 0, idx.size(), 0}};
  std::vector<std::size_t> vars(p);
  std::iota(vars.begin(), vars.end(), 0);
  std::vector<double> xs, ys, ws;
  std::vector<std::uint8_t> ts;

  while (!stack.empty()) {
    const Pending cur = stack.back();
    stack.pop_back();
    const std::span<const std::size_t> rows(idx.data() + cur.begin, cur.end - cur.begin);

    const auto eff = terminal_effect(y, t, rows, weight);
    TreeNode& node = nodes[cur.node];
    node.effect = eff.effect;
    node.n1 = static_cast<std::uint32_t>(eff.n1);
    node.n0 = static_cast<std::uint32_t>(eff.n0);

    if (cur.depth >= params.max_depth) continue;
    if (eff.n1 + eff.n0 < static_cast<double>(params.min_node)) continue;
    const auto [ymin, ymax] = std::minmax_element(rows.begin(), rows.end(),
                                                  [&](std::size_t a, std::size_t b) { return y[a] < y[b]; });
    if (y[*ymin] == y[*ymax]) continue;

    const std::size_t m = rows.size();
    ys.resize(m);
    ts.resize(m);
    ws.resize(m);
    xs.resize(m);
    for (std::size_t k = 0; k < m; ++k) {
      ys[k] = y[rows[k]];
      ts[k] = t[rows[k]];
      ws[k] = weight[rows[k]];
    }

    SplitCandidate best;
    for (std::size_t d = 0; d < mtry; ++d) {
      std::swap(vars[d], vars[d + rng.below(p - d)]);
      const std::size_t j = vars[d];
      if (!usable[j]) continue;
      const auto col = column(j);
      for (std::size_t k = 0; k < m; ++k) xs[k] = col[rows[k]];
      const bool greedy = params.split_method == SplitMethod::gs || data.meta(j).is_nominal();
      SplitCandidate cand = greedy ? greedy_best_cut(xs, ys, ts, ws, min_arm)
                                   : sss_best_cut(xs, ys, ts, ws, params.sss, min_arm);
      cand.covariate = j;
      if (cand.valid && (!best.valid || cand.q > best.q)) best = cand;
    }
    if (!best.valid) continue;

    const auto col = column(best.covariate);
    const auto first = idx.begin() + static_cast<std::ptrdiff_t>(cur.begin);
    const auto last = idx.begin() + static_cast<std::ptrdiff_t>(cur.end);
    const auto split = std::stable_partition(first, last, [&](std::size_t i) { return col[i] <= best.cutpoint; });
    const auto mid = static_cast<std::size_t>(split - idx.begin());

    const auto left = static_cast<std::int32_t>(nodes.size());
    node.covariate = static_cast<int>(best.covariate);
    node.cutpoint = best.cutpoint;
    node.q = best.q;
    node.left = left;
    node.right = left + 1;
    nodes.resize(nodes.size() + 2);
    stack.push_back({static_cast<std::size_t>(left + 1), mid, cur.end, cur.depth + 1});
    stack.push_back({static_cast<std::size_t>(left), cur.begin, mid, cur.depth + 1});
  }

  for (std::size_t j = 0; j < p; ++j) {
    if (!data.meta(j).is_nominal()) coding[j] = {};
  }
  return InteractionTree(std::move(nodes), std::move(coding));
}

}  // namespace rfit
