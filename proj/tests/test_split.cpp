#include <doctest.h>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "rfit/brent.hpp"
#include "rfit/data.hpp"
#include "rfit/models.hpp"
#include "rfit/split.hpp"

using namespace rfit;

namespace {

NodeTable table_from(const std::vector<double>& y, const std::vector<std::uint8_t>& t,
                     const std::vector<std::uint8_t>& left) {
  return node_table(y, t, left);
}

double mean(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

TEST_SUITE("split_engine") {
  TEST_CASE("node_table tallies cells") {
    const auto tab = table_from({1, 2, 3, 4}, {0, 0, 1, 1}, {1, 0, 1, 0});
    CHECK(tab.n0L == 1);
    CHECK(tab.s0L == 1);
    CHECK(tab.n0R == 1);
    CHECK(tab.s0R == 2);
    CHECK(tab.n1L == 1);
    CHECK(tab.s1L == 3);
    CHECK(tab.n1R == 1);
    CHECK(tab.s1R == 4);
    CHECK(tab.sum_y_sq == 30);
    const auto all_left = table_from({1, 2, 3, 4}, {0, 0, 1, 1}, {1, 1, 1, 1});
    CHECK(all_left.n0R == 0);
    CHECK(all_left.n1R == 0);
  }

  TEST_CASE("node_table matches a per-cell loop on random input") {
    Rng rng(12);
    std::vector<double> y(12), w(12);
    std::vector<std::uint8_t> t(12), left(12);
    for (std::size_t i = 0; i < 12; ++i) {
      y[i] = rng.normal();
      t[i] = rng.bernoulli(0.5);
      left[i] = rng.bernoulli(0.5);
      w[i] = static_cast<double>(rng.below(3));
    }
    const auto tab = node_table(y, t, left, w);
    double n[2][2] = {}, s[2][2] = {};
    for (int arm = 0; arm < 2; ++arm) {
      for (int side = 0; side < 2; ++side) {
        for (std::size_t i = 0; i < 12; ++i) {
          if (t[i] == arm && left[i] == (side == 0)) {
            n[arm][side] += w[i];
            s[arm][side] += w[i] * y[i];
          }
        }
      }
    }
    CHECK(tab.n0L == n[0][0]);
    CHECK(tab.n0R == n[0][1]);
    CHECK(tab.n1L == n[1][0]);
    CHECK(tab.n1R == n[1][1]);
    CHECK(tab.s0L == doctest::Approx(s[0][0]).epsilon(1e-14));
    CHECK(tab.s1R == doctest::Approx(s[1][1]).epsilon(1e-14));
  }

  TEST_CASE("pooled variance and Q on the balanced 8-row example") {
    // cells: 0L {0,2}, 1L {1,3}, 0R {1,3}, 1R {0,2}
    const std::vector<double> y{0, 2, 1, 3, 1, 3, 0, 2};
    const std::vector<std::uint8_t> t{0, 0, 1, 1, 0, 0, 1, 1};
    const std::vector<std::uint8_t> left{1, 1, 1, 1, 0, 0, 0, 0};
    const auto tab = table_from(y, t, left);
    const auto s2 = pooled_sigma2(tab);
    REQUIRE(s2);
    CHECK(*s2 == 2.0);
    CHECK(tab.did() == 2.0);
    const auto q = q_statistic(tab, *s2);
    REQUIRE(q);
    CHECK(*q == 1.0);

    NodeTable doubled = tab;
    for (double* v : {&doubled.n0L, &doubled.n0R, &doubled.n1L, &doubled.n1R, &doubled.s0L, &doubled.s0R,
                      &doubled.s1L, &doubled.s1R})
      *v *= 2;
    CHECK(*q_statistic(doubled, *s2) == doctest::Approx(2.0 * *q));
  }

  TEST_CASE("pooled variance edge cases") {
    const auto four = table_from({1, 2, 3, 4}, {0, 0, 1, 1}, {1, 0, 1, 0});
    CHECK_FALSE(pooled_sigma2(four));
    const auto flat = table_from({5, 5, 5, 5, 5, 5, 5, 5}, {0, 0, 1, 1, 0, 0, 1, 1}, {1, 1, 1, 1, 0, 0, 0, 0});
    REQUIRE(pooled_sigma2(flat));
    CHECK(*pooled_sigma2(flat) == 0.0);
    CHECK_FALSE(q_statistic(flat, 0.0));
    const auto empty_cell = table_from({1, 2, 3, 4, 5, 6}, {0, 0, 0, 1, 1, 1}, {1, 1, 1, 1, 1, 0});
    CHECK_FALSE(pooled_sigma2(empty_cell));
  }

  TEST_CASE("equal effects in both children give Q = 0") {
    const std::vector<double> y{0, 1, 2, 3, 0, 1, 2, 3};
    const std::vector<std::uint8_t> t{0, 0, 1, 1, 0, 0, 1, 1};
    const auto tab = table_from(y, t, {1, 1, 1, 1, 0, 0, 0, 0});
    CHECK(*q_statistic(tab, *pooled_sigma2(tab)) == 0.0);
  }

  TEST_CASE("greedy search: two distinct values give the single midpoint") {
    std::vector<double> x, y;
    std::vector<std::uint8_t> t;
    Rng rng(4);
    for (int i = 0; i < 40; ++i) {
      x.push_back(i < 20 ? 1.0 : 3.0);
      t.push_back(static_cast<std::uint8_t>(i % 2));
      y.push_back(rng.normal() + (x.back() > 2 && t.back() ? 1 : 0));
    }
    const auto c = greedy_best_cut(x, y, t);
    REQUIRE(c.valid);
    CHECK(c.cutpoint == 2.0);
    CHECK(c.method == SplitMethod::gs);
  }

  TEST_CASE("greedy search: constant column or starved arms give no split") {
    const std::vector<double> x(30, 1.0), y(30, 0.5);
    std::vector<std::uint8_t> t(30);
    for (std::size_t i = 0; i < 30; ++i) t[i] = static_cast<std::uint8_t>(i % 2);
    CHECK_FALSE(greedy_best_cut(x, y, t).valid);
    std::vector<double> x2(12), y2(12);
    std::vector<std::uint8_t> t2(12);
    for (std::size_t i = 0; i < 12; ++i) {
      x2[i] = static_cast<double>(i);
      y2[i] = static_cast<double>(i % 5);
      t2[i] = static_cast<std::uint8_t>(i % 2);
    }
    CHECK_FALSE(greedy_best_cut(x2, y2, t2, {}, 5).valid);
  }

  TEST_CASE("updating greedy search equals naive recomputation and the brute-force oracle") {
    Rng rng(2024);
    for (int rep = 0; rep < 300; ++rep) {
      const std::size_t n = 20 + rng.below(41);
      const std::size_t k = 2 + rng.below(19);
      const auto in = oracle::dyadic_instance(rng, n, k);
      const double min_arm = static_cast<double>(1 + rng.below(5));
      const auto fast = greedy_best_cut(in.x, in.y, in.t, {}, min_arm);
      const auto naive = greedy_best_cut_naive(in.x, in.y, in.t, {}, min_arm);
      const auto ref = oracle::best_cut(in.x, in.y, in.t, min_arm);
      REQUIRE(fast.valid == naive.valid);
      REQUIRE(fast.valid == ref.valid);
      if (!fast.valid) continue;
      CHECK(fast.cutpoint == naive.cutpoint);
      CHECK(fast.q == naive.q);
      CHECK(fast.cutpoint == ref.cutpoint);
      CHECK(fast.q == doctest::Approx(ref.q).epsilon(1e-12));
    }
  }

  TEST_CASE("greedy search on continuous responses matches the oracle to 1e-12") {
    Rng rng(77);
    for (int rep = 0; rep < 100; ++rep) {
      const auto in = oracle::spaced_instance(rng, 30 + rng.below(31));
      const auto fast = greedy_best_cut(in.x, in.y, in.t);
      const auto ref = oracle::best_cut(in.x, in.y, in.t, 5);
      REQUIRE(fast.valid == ref.valid);
      if (fast.valid) CHECK(fast.q == doctest::Approx(ref.q).epsilon(1e-12));
    }
  }

  TEST_CASE("bootstrap weights act as replicated rows") {
    Rng rng(31);
    const auto in = oracle::dyadic_instance(rng, 40, 8);
    std::vector<double> w(40);
    oracle::Instance rep;
    for (std::size_t i = 0; i < 40; ++i) {
      w[i] = static_cast<double>(rng.below(3));
      for (int r = 0; r < static_cast<int>(w[i]); ++r) {
        rep.x.push_back(in.x[i]);
        rep.y.push_back(in.y[i]);
        rep.t.push_back(in.t[i]);
      }
    }
    const auto weighted = greedy_best_cut(in.x, in.y, in.t, w, 3);
    const auto replicated = greedy_best_cut(rep.x, rep.y, rep.t, {}, 3);
    REQUIRE(weighted.valid == replicated.valid);
    if (weighted.valid) {
      CHECK(weighted.cutpoint == replicated.cutpoint);
      CHECK(weighted.q == doctest::Approx(replicated.q).epsilon(1e-12));
    }
  }

  TEST_CASE("Q is location-free and the greedy argmax is scale-free") {
    Rng rng(8);
    for (int rep = 0; rep < 50; ++rep) {
      const auto in = oracle::spaced_instance(rng, 40);
      auto shifted = in.y, scaled = in.y;
      for (auto& v : shifted) v += 13.25;
      for (auto& v : scaled) v *= 3.5;
      const auto base = greedy_best_cut(in.x, in.y, in.t);
      const auto s = greedy_best_cut(in.x, shifted, in.t);
      const auto k = greedy_best_cut(in.x, scaled, in.t);
      REQUIRE(base.valid);
      CHECK(s.cutpoint == base.cutpoint);
      CHECK(s.q == doctest::Approx(base.q).epsilon(1e-9));
      CHECK(k.cutpoint == base.cutpoint);
      CHECK(k.q == doctest::Approx(base.q).epsilon(1e-9));
    }
  }

  TEST_CASE("greedy search recovers the threshold-model cutoff") {
    Rng rng(500);
    const auto d = gen_model_a(500, 0, 0.5, rng, 0.3);
    const auto c = greedy_best_cut(d.column(0), d.y(), d.t());
    REQUIRE(c.valid);
    CHECK(std::fabs(c.cutpoint - 0.5) < 0.1);
  }

  TEST_CASE("expit") {
    CHECK(expit(2.0, 10.0, 2.0) == 0.5);
    CHECK(expit(0.1, 10.0, 0.0) == doctest::Approx(0.7310585786300049).epsilon(1e-15));
    CHECK(expit(1e6, 10.0, 0.0) == 1.0);
    CHECK(expit(-1e6, 10.0, 0.0) == 0.0);
    CHECK(std::isfinite(expit(-1e308, 1000.0, 1e308)));
    double prev = 0;
    for (double x = -3; x <= 3; x += 0.01) {
      const double v = expit(x, 10.0, 0.0);
      CHECK(v >= prev);
      prev = v;
    }
  }

  TEST_CASE("SssConfig validation") {
    SssConfig c;
    CHECK_NOTHROW(c.validate());
    c.a = 0.5;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c.a = 1000;
    CHECK_NOTHROW(c.validate());
    c.a = 1001;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  }

  TEST_CASE("surrogate objective approaches exact Q for large a") {
    Rng rng(91);
    for (int rep = 0; rep < 50; ++rep) {
      const auto in = oracle::spaced_instance(rng, 40 + rng.below(21));
      const auto s = standardize_column(in.x);
      REQUIRE(s);
      const auto totals = surrogate_totals(in.y, in.t);
      const SurrogateObjective fast(s->values, in.y, in.t, {}, 1000.0);
      const auto n = in.x.size();
      for (std::size_t k = 8; k + 8 < n; k += 3) {
        const double c_orig = static_cast<double>(k) + 0.5;
        // A cell holding a single row sits exactly on the smoothed floor.
        const auto q = oracle::q_at(in.x, in.y, in.t, c_orig, 2);
        if (!q) continue;
        const double c = (c_orig - s->mean) / s->sd;
        const double qt = sss_objective(c, s->values, in.y, in.t, {}, 1000.0, totals);
        CHECK(std::fabs(qt - *q) <= 1e-6 * std::max(*q, 1.0));
        CHECK(fast(c) == doctest::Approx(qt).epsilon(1e-9));
      }
    }
  }

  TEST_CASE("surrogate objective: floor rule and continuity") {
    Rng rng(5);
    const auto in = oracle::spaced_instance(rng, 50);
    const auto s = standardize_column(in.x);
    const auto totals = surrogate_totals(in.y, in.t);
    CHECK(sss_objective(-50.0, s->values, in.y, in.t, {}, 10.0, totals) == 0.0);
    CHECK(sss_objective(50.0, s->values, in.y, in.t, {}, 10.0, totals) == 0.0);
    for (double c = -1.5; c < 1.5; c += 0.1) {
      const double f0 = sss_objective(c, s->values, in.y, in.t, {}, 10.0, totals);
      const double f1 = sss_objective(c + 1e-7, s->values, in.y, in.t, {}, 10.0, totals);
      CHECK(std::fabs(f1 - f0) < 1e-4 * std::max(1.0, f0));
    }
  }

  TEST_CASE("smoothed search: degenerate column and exact reporting") {
    const std::vector<double> x(40, 2.0);
    std::vector<double> y(40);
    std::vector<std::uint8_t> t(40);
    for (std::size_t i = 0; i < 40; ++i) {
      y[i] = static_cast<double>(i % 7);
      t[i] = static_cast<std::uint8_t>(i % 2);
    }
    CHECK_FALSE(sss_best_cut(x, y, t, {}, SssConfig{}).valid);

    Rng rng(15);
    const auto d = gen_model_a(500, 0, 0.5, rng, 0.3);
    const auto c = sss_best_cut(d.column(0), d.y(), d.t(), {}, SssConfig{});
    REQUIRE(c.valid);
    CHECK(c.method == SplitMethod::sss);
    CHECK(std::fabs(c.cutpoint - 0.5) < 0.1);
    CHECK(c.iterations >= 1);
    CHECK(c.iterations <= 100);
    std::vector<std::uint8_t> left(d.n());
    for (std::size_t i = 0; i < d.n(); ++i) left[i] = d.column(0)[i] <= c.cutpoint;
    const auto tab = node_table(d.y(), d.t(), left);
    CHECK(c.q == *q_statistic(tab, *pooled_sigma2(tab)));
    CHECK(c.did == tab.did());
  }

  TEST_CASE("smoothed search is equivariant under affine rescaling of x") {
    Rng rng(21);
    for (int rep = 0; rep < 20; ++rep) {
      const auto d = gen_model_a(300, 0, 0.5, rng);
      std::vector<double> x2(d.n());
      for (std::size_t i = 0; i < d.n(); ++i) x2[i] = 10.0 * d.column(0)[i] + 3.0;
      const auto a = sss_best_cut(d.column(0), d.y(), d.t(), {}, SssConfig{});
      const auto b = sss_best_cut(x2, d.y(), d.t(), {}, SssConfig{});
      REQUIRE(a.valid == b.valid);
      if (!a.valid) continue;
      CHECK(b.cutpoint == doctest::Approx(10.0 * a.cutpoint + 3.0).epsilon(1e-6));
      CHECK(b.q == doctest::Approx(a.q).epsilon(1e-9));
    }
  }

  TEST_CASE("sharp signal: Brent rarely needs more than 15 iterations") {
    Rng rng(33);
    std::vector<double> iters;
    for (int rep = 0; rep < 40; ++rep) {
      const auto d = gen_model_a(1000, 0, 0.5, rng, 0.5);
      iters.push_back(sss_best_cut(d.column(0), d.y(), d.t(), {}, SssConfig{}).iterations);
    }
    CHECK(mean(iters) <= 15.0);
  }

  TEST_CASE("brent: quadratic, constant and monotone functions") {
    const auto q = brent_maximize([](double c) { return -(c - 0.3) * (c - 0.3); }, 0.0, 1.0, 1e-6);
    CHECK(std::fabs(q.argmax - 0.3) < 1e-5);
    CHECK(q.converged);
    const auto flat = brent_maximize([](double) { return 4.0; }, -1.0, 1.0);
    CHECK(flat.value == 4.0);
    CHECK(flat.argmax >= -1.0);
    CHECK(flat.argmax <= 1.0);
    const auto mono = brent_maximize([](double c) { return c; }, 0.0, 2.0, 1e-5);
    CHECK(std::fabs(mono.argmax - 2.0) < 1e-3);
    CHECK_THROWS_AS(brent_maximize([](double c) { return c; }, 1.0, 1.0), std::invalid_argument);
  }

  TEST_CASE("brent: iteration cap is reported") {
    const auto r = brent_maximize([](double c) { return std::sin(40 * c); }, 0.0, 10.0, 1e-12, 3);
    CHECK(r.iterations <= 3);
    CHECK_FALSE(r.converged);
  }
}
