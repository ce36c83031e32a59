#include "rfit/split.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <stdexcept>

#include "rfit/brent.hpp"

namespace rfit {

namespace {

inline double weight(std::span<const double> w, std::size_t i) noexcept { return w.empty() ? 1.0 : w[i]; }

// Treats a residual sum of squares that is rounding noise relative to the
// total as zero.
constexpr double kRelativeZero = 1e-12;

SplitCandidate candidate_from(const NodeTable& table, double cut, double q, SplitMethod method) {
  SplitCandidate c;
  c.cutpoint = cut;
  c.q = q;
  c.did = table.did();
  c.method = method;
  c.valid = true;
  return c;
}

// Smallest value v such that rows of arm `arm` with x <= v carry at least k
// weight.  Bounded max-heap, O(n log k).
std::optional<double> kth_weighted(std::span<const double> x, std::span<const std::uint8_t> t,
                                   std::span<const double> w, std::uint8_t arm, double k, bool largest) {
  using Entry = std::pair<double, double>;  // (key, weight)
  std::priority_queue<Entry> heap;
  double held = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (t[i] != arm) continue;
    const double wi = weight(w, i);
    if (wi <= 0.0) continue;
    const double key = largest ? -x[i] : x[i];
    if (held >= k && key >= heap.top().first) continue;
    heap.emplace(key, wi);
    held += wi;
    while (!heap.empty() && held - heap.top().second >= k) {
      held -= heap.top().second;
      heap.pop();
    }
  }
  if (held < k) return std::nullopt;
  return largest ? -heap.top().first : heap.top().first;
}

}  // namespace

double NodeTable::min_cell() const noexcept { return std::min(std::min(n0L, n0R), std::min(n1L, n1R)); }

double NodeTable::did() const noexcept { return (s1L / n1L - s0L / n0L) - (s1R / n1R - s0R / n0R); }

NodeTable node_table(std::span<const double> y, std::span<const std::uint8_t> t, std::span<const std::uint8_t> in_left,
                     std::span<const double> w) {
  if (t.size() != y.size() || in_left.size() != y.size() || (!w.empty() && w.size() != y.size())) {
    throw std::invalid_argument("node_table: input lengths differ");
  }
  NodeTable tab;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double wi = weight(w, i);
    const double wy = wi * y[i];
    tab.sum_y_sq += wy * y[i];
    if (t[i]) {
      if (in_left[i]) {
        tab.n1L += wi;
        tab.s1L += wy;
      } else {
        tab.n1R += wi;
        tab.s1R += wy;
      }
    } else {
      if (in_left[i]) {
        tab.n0L += wi;
        tab.s0L += wy;
      } else {
        tab.n0R += wi;
        tab.s0R += wy;
      }
    }
  }
  return tab;
}

std::optional<double> pooled_sigma2(const NodeTable& tab) {
  const double n = tab.n();
  if (n <= 4.0 || tab.min_cell() <= 0.0) return std::nullopt;
  const double fitted = tab.s0L * tab.s0L / tab.n0L + tab.s0R * tab.s0R / tab.n0R + tab.s1L * tab.s1L / tab.n1L +
                        tab.s1R * tab.s1R / tab.n1R;
  double rss = tab.sum_y_sq - fitted;
  if (rss <= kRelativeZero * tab.sum_y_sq) rss = 0.0;
  return rss / (n - 4.0);
}

std::optional<double> q_statistic(const NodeTable& tab, double sigma2) {
  if (tab.min_cell() <= 0.0 || !(sigma2 > 0.0)) return std::nullopt;
  const double did = tab.did();
  const double inv = 1.0 / tab.n1L + 1.0 / tab.n0L + 1.0 / tab.n1R + 1.0 / tab.n0R;
  return did * did / (sigma2 * inv);
}

std::optional<double> exact_q(const NodeTable& tab, double min_arm) {
  if (tab.min_cell() < std::max(min_arm, 1.0)) return std::nullopt;
  const auto s2 = pooled_sigma2(tab);
  if (!s2) return std::nullopt;
  return q_statistic(tab, *s2);
}

SplitCandidate greedy_best_cut(std::span<const double> x, std::span<const double> y, std::span<const std::uint8_t> t,
                               std::span<const double> w, double min_arm) {
  const std::size_t m = x.size();
  SplitCandidate best;
  best.method = SplitMethod::gs;
  if (m < 2) return best;

  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });

  NodeTable total;
  for (std::size_t i = 0; i < m; ++i) {
    const double wi = weight(w, i);
    const double wy = wi * y[i];
    total.sum_y_sq += wy * y[i];
    if (t[i]) {
      total.n1R += wi;
      total.s1R += wy;
    } else {
      total.n0R += wi;
      total.s0R += wy;
    }
  }

  // Left-cell running sums; right cells are totals minus left.
  double n0L = 0, n1L = 0, s0L = 0, s1L = 0;
  for (std::size_t k = 0; k + 1 < m; ++k) {
    const std::size_t i = order[k];
    const double wi = weight(w, i);
    if (t[i]) {
      n1L += wi;
      s1L += wi * y[i];
    } else {
      n0L += wi;
      s0L += wi * y[i];
    }
    const double here = x[i];
    const double next = x[order[k + 1]];
    if (!(here < next)) continue;

    NodeTable tab;
    tab.n0L = n0L;
    tab.n1L = n1L;
    tab.s0L = s0L;
    tab.s1L = s1L;
    tab.n0R = total.n0R - n0L;
    tab.n1R = total.n1R - n1L;
    tab.s0R = total.s0R - s0L;
    tab.s1R = total.s1R - s1L;
    tab.sum_y_sq = total.sum_y_sq;
    const auto q = exact_q(tab, min_arm);
    if (q && (!best.valid || *q > best.q)) best = candidate_from(tab, std::midpoint(here, next), *q, SplitMethod::gs);
  }
  return best;
}

SplitCandidate greedy_best_cut_naive(std::span<const double> x, std::span<const double> y,
                                     std::span<const std::uint8_t> t, std::span<const double> w, double min_arm) {
  SplitCandidate best;
  best.method = SplitMethod::gs;
  std::vector<double> distinct(x.begin(), x.end());
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());

  std::vector<std::uint8_t> in_left(x.size());
  for (std::size_t k = 0; k + 1 < distinct.size(); ++k) {
    const double cut = std::midpoint(distinct[k], distinct[k + 1]);
    for (std::size_t i = 0; i < x.size(); ++i) in_left[i] = x[i] <= cut;
    const NodeTable tab = node_table(y, t, in_left, w);
    const auto q = exact_q(tab, min_arm);
    if (q && (!best.valid || *q > best.q)) best = candidate_from(tab, cut, *q, SplitMethod::gs);
  }
  return best;
}

void SssConfig::validate() const {
  if (!(a >= 1.0 && a <= 1000.0)) throw std::invalid_argument("SSS shape parameter a must lie in [1, 1000]");
  if (!(brent_tol > 0.0)) throw std::invalid_argument("Brent tolerance must be positive");
  if (brent_max_iter <= 0) throw std::invalid_argument("Brent iteration cap must be positive");
}

double expit(double x, double a, double c) noexcept {
  const double z = a * (x - c);
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

SurrogateTotals surrogate_totals(std::span<const double> y, std::span<const std::uint8_t> t,
                                 std::span<const double> w) {
  SurrogateTotals tot;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double wi = weight(w, i);
    tot.sum_y_sq += wi * y[i] * y[i];
    if (t[i]) {
      tot.n1 += wi;
      tot.s1 += wi * y[i];
    } else {
      tot.n0 += wi;
      tot.s0 += wi * y[i];
    }
  }
  return tot;
}

namespace {

// Q formula applied to smoothed left sums; right sums by subtraction.
double smoothed_q(double n1L, double n0L, double s1L, double s0L, const SurrogateTotals& tot) {
  const double n1R = tot.n1 - n1L;
  const double n0R = tot.n0 - n0L;
  if (n1L < 1.0 || n0L < 1.0 || n1R < 1.0 || n0R < 1.0) return 0.0;
  const double n = tot.n0 + tot.n1;
  if (n <= 4.0) return 0.0;
  const double s1R = tot.s1 - s1L;
  const double s0R = tot.s0 - s0L;
  const double fitted = s1L * s1L / n1L + s0L * s0L / n0L + s1R * s1R / n1R + s0R * s0R / n0R;
  const double rss = tot.sum_y_sq - fitted;
  if (!(rss > kRelativeZero * tot.sum_y_sq)) return 0.0;
  const double sigma2 = rss / (n - 4.0);
  const double did = (s1L / n1L - s0L / n0L) - (s1R / n1R - s0R / n0R);
  const double inv = 1.0 / n1L + 1.0 / n0L + 1.0 / n1R + 1.0 / n0R;
  return did * did / (sigma2 * inv);
}

}  // namespace

double sss_objective(double c, std::span<const double> x_std, std::span<const double> y,
                     std::span<const std::uint8_t> t, std::span<const double> w, double a,
                     const SurrogateTotals& totals) {
  double n1L = 0, n0L = 0, s1L = 0, s0L = 0;
  for (std::size_t i = 0; i < x_std.size(); ++i) {
    const double s = weight(w, i) * expit(x_std[i], a, c);
    if (t[i]) {
      n1L += s;
      s1L += s * y[i];
    } else {
      n0L += s;
      s0L += s * y[i];
    }
  }
  return smoothed_q(n1L, n0L, s1L, s0L, totals);
}

SurrogateObjective::SurrogateObjective(std::span<const double> x_std, std::span<const double> y,
                                       std::span<const std::uint8_t> t, std::span<const double> w, double a)
    : x_(x_std.begin(), x_std.end()),
      wt1_(x_std.size()),
      wt0_(x_std.size()),
      wy1_(x_std.size()),
      wy0_(x_std.size()),
      totals_(surrogate_totals(y, t, w)),
      a_(a) {
  for (std::size_t i = 0; i < x_.size(); ++i) {
    const double wi = weight(w, i);
    wt1_[i] = t[i] ? wi : 0.0;
    wt0_[i] = t[i] ? 0.0 : wi;
    wy1_[i] = wt1_[i] * y[i];
    wy0_[i] = wt0_[i] * y[i];
  }
}

double SurrogateObjective::operator()(double c) const noexcept {
  double n1L = 0, n0L = 0, s1L = 0, s0L = 0;
  const double a = a_;
  const std::size_t m = x_.size();
  const double* x = x_.data();
  const double* wt1 = wt1_.data();
  const double* wt0 = wt0_.data();
  const double* wy1 = wy1_.data();
  const double* wy0 = wy0_.data();
  for (std::size_t i = 0; i < m; ++i) {
    // expit(x; a, c) = 1 / (1 + exp(a (c - x))); the clamp keeps exp finite.
    const double z = std::min(a * (c - x[i]), 700.0);
    const double s = 1.0 / (1.0 + std::exp(z));
    n1L += wt1[i] * s;
    n0L += wt0[i] * s;
    s1L += wy1[i] * s;
    s0L += wy0[i] * s;
  }
  return smoothed_q(n1L, n0L, s1L, s0L, totals_);
}

SplitCandidate sss_best_cut(std::span<const double> x, std::span<const double> y, std::span<const std::uint8_t> t,
                            std::span<const double> w, const SssConfig& config, double min_arm) {
  SplitCandidate out;
  out.method = SplitMethod::sss;
  const std::size_t m = x.size();
  if (m < 2) return out;

  // Weighted mean and sample sd (weights act as replication counts).
  double sw = 0, sx = 0;
  for (std::size_t i = 0; i < m; ++i) {
    sw += weight(w, i);
    sx += weight(w, i) * x[i];
  }
  if (sw < 2.0) return out;
  const double mean = sx / sw;
  double ss = 0;
  for (std::size_t i = 0; i < m; ++i) ss += weight(w, i) * (x[i] - mean) * (x[i] - mean);
  const double sd = std::sqrt(ss / (sw - 1.0));
  if (!(sd > 0.0)) return out;

  const double k = std::max(min_arm, 1.0);
  const auto lo1 = kth_weighted(x, t, w, 1, k, false);
  const auto lo0 = kth_weighted(x, t, w, 0, k, false);
  const auto hi1 = kth_weighted(x, t, w, 1, k, true);
  const auto hi0 = kth_weighted(x, t, w, 0, k, true);
  if (!lo1 || !lo0 || !hi1 || !hi0) return out;
  const double lo = std::max(*lo1, *lo0);
  const double hi = std::min(*hi1, *hi0);
  if (!(lo < hi)) return out;

  std::vector<double> x_std(m);
  for (std::size_t i = 0; i < m; ++i) x_std[i] = (x[i] - mean) / sd;
  const SurrogateObjective objective(x_std, y, t, w, config.a);
  const auto res = brent_maximize([&](double c) { return objective(c); }, (lo - mean) / sd, (hi - mean) / sd,
                                  config.brent_tol, config.brent_max_iter);

  const double cut = std::clamp(res.argmax * sd + mean, lo, std::nextafter(hi, lo));
  std::vector<std::uint8_t> in_left(m);
  for (std::size_t i = 0; i < m; ++i) in_left[i] = x[i] <= cut;
  const NodeTable tab = node_table(y, t, in_left, w);
  out.iterations = res.iterations;
  out.cutpoint = cut;
  if (const auto q = exact_q(tab, min_arm)) {
    out.q = *q;
    out.did = tab.did();
    out.valid = true;
  }
  return out;
}

}  // namespace rfit
