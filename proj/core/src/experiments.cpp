#include "rfit/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <functional>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>
#include <tuple>

#include "rfit/parallel.hpp"
#include "rfit/regression_forest.hpp"
#include "rfit/split.hpp"

namespace rfit {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string join_sizes(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

std::string join_doubles(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_double(v[i]);
  return s;
}

void echo_forest(ExperimentReport& r, const ForestParams& p) {
  r.set_config("b", std::to_string(p.b));
  r.set_config("mtry", std::to_string(p.tree.mtry));
  r.set_config("min_arm", std::to_string(p.tree.min_arm));
  r.set_config("min_node", std::to_string(p.tree.min_node));
  r.set_config("max_depth", std::to_string(p.tree.max_depth));
  r.set_config("split_method", p.tree.split_method == SplitMethod::gs ? "gs" : "sss");
  r.set_config("a", format_double(p.tree.sss.a));
}

double mean_of(const std::vector<double>& v) {
  return v.empty() ? kNaN : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sd_of(const std::vector<double>& v) {
  if (v.size() < 2) return kNaN;
  const double m = mean_of(v);
  double ss = 0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

std::uint64_t model_stream(IteModel m) { return (static_cast<std::uint64_t>(m) + 1) << 32; }

}  // namespace

double median(std::vector<double> v) {
  if (v.empty()) return kNaN;
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

double ols_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("ols_slope needs two equal-length series");
  const double mx = mean_of(x), my = mean_of(y);
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxx > 0 ? sxy / sxx : kNaN;
}

ExperimentReport run_cutpoint_study(const CutpointStudyConfig& cfg, std::uint64_t seed) {
  if (cfg.replicates < 10) throw std::invalid_argument("the cutpoint study needs at least 10 replicates");
  if (cfg.a_grid.empty()) throw std::invalid_argument("the a grid is empty");
  for (double a : cfg.a_grid) SssConfig{a}.validate();

  ExperimentReport r;
  r.experiment = "cutpoint";
  r.seed = seed;
  r.set_config("n", std::to_string(cfg.n));
  r.set_config("k", std::to_string(cfg.k));
  r.set_config("c0", format_double(cfg.c0));
  r.set_config("noise_sd", format_double(cfg.noise_sd));
  r.set_config("replicates", std::to_string(cfg.replicates));
  r.set_config("a_grid", join_doubles(cfg.a_grid));
  r.set_config("min_arm", format_double(cfg.min_arm));
  r.columns = {"replicate", "method", "a", "cutpoint", "q", "iterations"};

  const std::size_t m = cfg.a_grid.size() + 1;
  std::vector<SplitCandidate> found(cfg.replicates * m);
  parallel_for(cfg.replicates, cfg.threads, [&](std::size_t rep) {
    Rng rng(seed, rep);
    const auto data = gen_model_a(cfg.n, cfg.k, cfg.c0, rng, cfg.noise_sd);
    found[rep * m] = greedy_best_cut(data.column(0), data.y(), data.t(), {}, cfg.min_arm);
    for (std::size_t g = 0; g < cfg.a_grid.size(); ++g) {
      SssConfig sss;
      sss.a = cfg.a_grid[g];
      found[rep * m + g + 1] = sss_best_cut(data.column(0), data.y(), data.t(), {}, sss, cfg.min_arm);
    }
  });

  std::vector<double> sq(m, 0.0), worst(m, 0.0);
  std::vector<std::size_t> invalid(m, 0);
  for (std::size_t rep = 0; rep < cfg.replicates; ++rep) {
    for (std::size_t g = 0; g < m; ++g) {
      const auto& c = found[rep * m + g];
      r.add_row({static_cast<std::int64_t>(rep), std::string(g == 0 ? "gs" : "sss"),
                 g == 0 ? kNaN : cfg.a_grid[g - 1], c.cutpoint, c.valid ? c.q : kNaN,
                 static_cast<std::int64_t>(c.iterations)});
      if (!c.valid) {
        ++invalid[g];
        continue;
      }
      const double e = c.cutpoint - cfg.c0;
      sq[g] += e * e;
      worst[g] = std::max(worst[g], std::fabs(e));
    }
  }
  for (std::size_t g = 0; g < m; ++g) {
    const std::string tag = g == 0 ? "gs" : "sss_a" + format_double(cfg.a_grid[g - 1]);
    const auto valid = static_cast<double>(cfg.replicates - invalid[g]);
    r.set_summary("mse." + tag, valid > 0 ? sq[g] / valid : kNaN);
    r.set_summary("max_abs_error." + tag, valid > 0 ? worst[g] : kNaN);
    r.set_summary("invalid." + tag, static_cast<double>(invalid[g]));
  }
  return r;
}

ExperimentReport run_mse_study(const MseStudyConfig& cfg, std::uint64_t seed) {
  if (cfg.models.empty()) throw std::invalid_argument("no models selected");
  if (cfg.replicates < 1 || cfg.n_test < 1) throw std::invalid_argument("replicates and n_test must be positive");

  ExperimentReport r;
  r.experiment = "mse";
  r.seed = seed;
  std::string names;
  for (auto m : cfg.models) names += (names.empty() ? "" : ",") + std::string(model_name(m));
  r.set_config("models", names);
  r.set_config("n", std::to_string(cfg.n));
  r.set_config("n_test", std::to_string(cfg.n_test));
  r.set_config("replicates", std::to_string(cfg.replicates));
  echo_forest(r, cfg.forest);
  r.columns = {"record", "model", "method", "replicate", "point", "mse", "estimate", "truth"};

  for (const auto model : cfg.models) {
    const std::string mname(model_name(model));
    Rng test_rng(seed, model_stream(model));
    const auto test = gen_uniform_rows(cfg.n_test, kIteModelDims, test_rng);
    std::vector<double> truth(cfg.n_test);
    for (std::size_t i = 0; i < cfg.n_test; ++i) truth[i] = true_effect(model, test[i]);

    std::vector<std::vector<double>> est_rfit(cfg.replicates), est_sr(cfg.replicates);
    parallel_for(cfg.replicates, cfg.threads, [&](std::size_t rep) {
      const std::uint64_t stream = model_stream(model) + rep + 1;
      Rng rng(seed, stream);
      const auto sample = gen_ite_model(model, cfg.n, rng);
      ForestParams fp = cfg.forest;
      fp.seed = derive_seed(seed, stream ^ (std::uint64_t{1} << 63));
      fp.threads = 1;
      est_rfit[rep] = RfitForest::fit(sample.data, fp).predict(test);
      est_sr[rep] = SrModel::fit(sample.data, fp).predict(test);
    });

    const auto mse = [&](const std::vector<double>& est) {
      double s = 0;
      for (std::size_t i = 0; i < cfg.n_test; ++i) s += (est[i] - truth[i]) * (est[i] - truth[i]);
      return s / static_cast<double>(cfg.n_test);
    };
    for (const auto* method : {"rfit", "sr"}) {
      const auto& est = std::string(method) == "rfit" ? est_rfit : est_sr;
      std::vector<double> mses(cfg.replicates), mean_est(cfg.n_test, 0.0);
      for (std::size_t rep = 0; rep < cfg.replicates; ++rep) {
        mses[rep] = mse(est[rep]);
        r.add_row({std::string("replicate"), mname, std::string(method), static_cast<std::int64_t>(rep),
                   std::int64_t{-1}, mses[rep], kNaN, kNaN});
        for (std::size_t i = 0; i < cfg.n_test; ++i) mean_est[i] += est[rep][i];
      }
      for (std::size_t i = 0; i < cfg.n_test; ++i) {
        mean_est[i] /= static_cast<double>(cfg.replicates);
        r.add_row({std::string("point"), mname, std::string(method), std::int64_t{-1}, static_cast<std::int64_t>(i),
                   kNaN, mean_est[i], truth[i]});
      }
      const std::string key = mname + "." + method;
      r.set_summary("mean_mse." + key, mean_of(mses));
      r.set_summary("sd_mse." + key, sd_of(mses));
      r.set_summary("slope." + key, ols_slope(truth, mean_est));
    }
    const double tbar = mean_of(truth);
    double floor = 0;
    for (double d : truth) floor += (d - tbar) * (d - tbar);
    r.set_summary("constant_floor." + mname, floor / static_cast<double>(cfg.n_test));
  }
  return r;
}

ExperimentReport run_se_study(const SeStudyConfig& cfg, std::uint64_t seed) {
  if (cfg.replicates < 2) throw std::invalid_argument("the SE study needs at least 2 replicates");
  if (cfg.forest.b < 2) throw std::invalid_argument("the SE study needs b >= 2");

  ExperimentReport r;
  r.experiment = "se";
  r.seed = seed;
  r.set_config("model", std::string(model_name(cfg.model)));
  r.set_config("n", std::to_string(cfg.n));
  r.set_config("n_test", std::to_string(cfg.n_test));
  r.set_config("replicates", std::to_string(cfg.replicates));
  echo_forest(r, cfg.forest);
  r.columns = {"point", "truth", "mean_estimate", "sd_estimate", "mean_se_raw", "mean_se_c0",
               "mean_se_c", "clamped_c0", "clamped_c", "ratio_c"};

  Rng test_rng(seed, model_stream(cfg.model));
  const auto test = gen_uniform_rows(cfg.n_test, kIteModelDims, test_rng);
  std::vector<std::vector<ItePrediction>> preds(cfg.replicates);
  parallel_for(cfg.replicates, cfg.threads, [&](std::size_t rep) {
    const std::uint64_t stream = model_stream(cfg.model) + rep + 1;
    Rng rng(seed, stream);
    const auto sample = gen_ite_model(cfg.model, cfg.n, rng);
    ForestParams fp = cfg.forest;
    fp.seed = derive_seed(seed, stream ^ (std::uint64_t{1} << 63));
    fp.threads = 1;
    preds[rep] = RfitForest::fit(sample.data, fp).predict_with_se(test, 1);
  });

  std::vector<double> ratio_c, ratio_c0, ratio_raw;
  bool raw_exceeds = true;
  std::size_t clamps_c = 0, clamps_c0 = 0;
  for (std::size_t i = 0; i < cfg.n_test; ++i) {
    std::vector<double> est, raw, c0, c;
    std::int64_t k0 = 0, kc = 0;
    for (const auto& rep : preds) {
      const auto& p = rep[i];
      est.push_back(p.estimate);
      raw.push_back(p.se(SeVariant::raw));
      c0.push_back(p.se(SeVariant::c0));
      c.push_back(p.se(SeVariant::c));
      k0 += p.clamped_c0;
      kc += p.clamped_c;
    }
    const double sd = sd_of(est);
    const double mc = mean_of(c), mc0 = mean_of(c0), mraw = mean_of(raw);
    ratio_c.push_back(mc / sd);
    ratio_c0.push_back(mc0 / sd);
    ratio_raw.push_back(mraw / sd);
    raw_exceeds = raw_exceeds && mraw > mc;
    clamps_c += static_cast<std::size_t>(kc);
    clamps_c0 += static_cast<std::size_t>(k0);
    r.add_row({static_cast<std::int64_t>(i), true_effect(cfg.model, test[i]), mean_of(est), sd, mraw, mc0, mc, k0, kc,
               mc / sd});
  }
  r.set_summary("median_ratio_c", median(ratio_c));
  r.set_summary("median_ratio_c0", median(ratio_c0));
  r.set_summary("median_ratio_raw", median(ratio_raw));
  r.set_summary("raw_exceeds_c_everywhere", raw_exceeds ? 1.0 : 0.0);
  r.set_summary("clamped_c", static_cast<double>(clamps_c));
  r.set_summary("clamped_c0", static_cast<double>(clamps_c0));
  return r;
}

ExperimentReport run_timing_bench(const TimingBenchConfig& cfg, std::uint64_t seed) {
  if (cfg.n_grid.empty() || cfg.k_grid.empty()) throw std::invalid_argument("timing grids must be nonempty");
  if (cfg.repeats < 1) throw std::invalid_argument("repeats must be positive");
  SssConfig sss;
  sss.a = cfg.a;
  sss.validate();

  ExperimentReport r;
  r.experiment = "timing";
  r.seed = seed;
  r.set_config("n_grid", join_sizes(cfg.n_grid));
  r.set_config("k_grid", join_sizes(cfg.k_grid));
  r.set_config("repeats", std::to_string(cfg.repeats));
  r.set_config("a", format_double(cfg.a));
  r.set_config("min_arm", format_double(cfg.min_arm));
  r.columns = {"n", "k", "method", "seconds", "cutpoint"};

  using clock = std::chrono::steady_clock;
  std::map<std::pair<std::size_t, std::string>, double> at_max_n;
  std::vector<double> log_n, log_update;
  const std::size_t n_max = *std::max_element(cfg.n_grid.begin(), cfg.n_grid.end());
  const std::size_t k_max = *std::max_element(cfg.k_grid.begin(), cfg.k_grid.end());
  for (const std::size_t n : cfg.n_grid) {
    for (const std::size_t k : cfg.k_grid) {
      Rng rng(derive_seed(seed, n), k);
      const auto data = gen_model_a(n, k, 0.5, rng);
      const auto x = data.column(0);
      const auto y = data.y();
      const auto t = data.t();
      const std::pair<const char*, std::function<SplitCandidate()>> methods[] = {
          {"gs_naive", [&] { return greedy_best_cut_naive(x, y, t, {}, cfg.min_arm); }},
          {"gs_update", [&] { return greedy_best_cut(x, y, t, {}, cfg.min_arm); }},
          {"sss", [&] { return sss_best_cut(x, y, t, {}, sss, cfg.min_arm); }},
      };
      for (const auto& [name, run] : methods) {
        SplitCandidate c = run();
        const auto start = clock::now();
        for (std::size_t rep = 0; rep < cfg.repeats; ++rep) c = run();
        const double secs =
            std::chrono::duration<double>(clock::now() - start).count() / static_cast<double>(cfg.repeats);
        r.add_row({static_cast<std::int64_t>(n), static_cast<std::int64_t>(k), std::string(name), secs, c.cutpoint});
        if (n == n_max) at_max_n[{k, name}] = secs;
        if (k == k_max && std::string(name) == "gs_update") {
          log_n.push_back(std::log(static_cast<double>(n)));
          log_update.push_back(std::log(std::max(secs, 1e-9)));
        }
      }
    }
  }
  r.set_summary("speedup_sss_vs_naive", at_max_n[{k_max, "gs_naive"}] / at_max_n[{k_max, "sss"}]);
  double lo = std::numeric_limits<double>::infinity(), hi = 0;
  for (const std::size_t k : cfg.k_grid) {
    lo = std::min(lo, at_max_n[{k, "sss"}]);
    hi = std::max(hi, at_max_n[{k, "sss"}]);
  }
  r.set_summary("sss_k_spread", hi / lo);
  r.set_summary("gs_update_exponent", log_n.size() >= 2 ? ols_slope(log_n, log_update) : kNaN);
  return r;
}

void write_timing_table(std::ostream& out, const ExperimentReport& timing) {
  const auto cn = timing.column_index("n"), ck = timing.column_index("k");
  const auto cm = timing.column_index("method"), cs = timing.column_index("seconds");
  std::vector<std::int64_t> ns, ks;
  std::vector<std::string> methods;
  std::map<std::tuple<std::int64_t, std::int64_t, std::string>, double> secs;
  const auto add = [](auto& v, const auto& x) {
    if (std::find(v.begin(), v.end(), x) == v.end()) v.push_back(x);
  };
  for (const auto& row : timing.rows) {
    const auto n = std::get<std::int64_t>(row[cn]);
    const auto k = std::get<std::int64_t>(row[ck]);
    const auto& m = std::get<std::string>(row[cm]);
    add(ns, n);
    add(ks, k);
    add(methods, m);
    secs[{n, k, m}] = std::get<double>(row[cs]);
  }
  out << "n";
  for (const auto k : ks)
    for (const auto& m : methods) out << ',' << m << "_k" << k;
  out << '\n';
  for (const auto n : ns) {
    out << n;
    for (const auto k : ks)
      for (const auto& m : methods) out << ',' << format_double(secs[{n, k, m}]);
    out << '\n';
  }
}

}  // namespace rfit
