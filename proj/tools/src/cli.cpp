#include "rfit_cli/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "rfit/data.hpp"
#include "rfit/experiments.hpp"
#include "rfit/forest.hpp"
#include "rfit/regression_forest.hpp"
#include "rfit/report.hpp"
#include "rfit/serialize.hpp"

namespace rfit::cli {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

template <class T>
std::vector<T> parse_numbers(const std::string& s, const char* what) {
  std::vector<T> out;
  for (const auto& item : split_list(s)) {
    try {
      std::size_t used = 0;
      if constexpr (std::is_floating_point_v<T>) {
        out.push_back(static_cast<T>(std::stod(item, &used)));
      } else {
        out.push_back(static_cast<T>(std::stoull(item, &used)));
      }
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw CLI::ValidationError(what, "'" + item + "' is not a number");
    }
  }
  if (out.empty()) throw CLI::ValidationError(what, "empty list");
  return out;
}

/// Removes the files a command created unless the command completes.
class OutputGuard {
 public:
  ~OutputGuard() {
    if (committed_) return;
    std::error_code ec;
    for (auto it = created_.rbegin(); it != created_.rend(); ++it) fs::remove_all(*it, ec);
  }

  /// Creates `dir` (and parents), remembering the topmost new directory.
  void make_dir(const fs::path& dir) {
    fs::path missing;
    for (fs::path p = fs::absolute(dir); !p.empty() && !fs::exists(p); p = p.parent_path()) {
      missing = p;
      if (p == p.parent_path()) break;
    }
    fs::create_directories(dir);
    if (!missing.empty()) created_.push_back(missing);
  }

  /// Claims `path` for output; an existing file there is overwritten.
  fs::path file(const fs::path& path) {
    created_.push_back(path);
    return path;
  }

  void commit() noexcept { committed_ = true; }

 private:
  std::vector<fs::path> created_;
  bool committed_ = false;
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Error("failed writing " + path.string());
}

struct TreeFlags {
  std::size_t b = 0;
  std::size_t mtry = 0;
  std::size_t min_arm = 5;
  std::size_t min_node = 20;
  std::size_t max_depth = 30;
  std::string split_method = "sss";
  double a = 10.0;
  double brent_tol = 1e-4;
  int brent_max_iter = 100;

  void add_to(CLI::App& app, std::size_t default_b) {
    b = default_b;
    app.add_option("--b", b, "Number of bootstrap trees")->capture_default_str()->check(CLI::PositiveNumber);
    app.add_option("--mtry", mtry, "Covariates tried per node (0 = max(1, p/3))")->capture_default_str();
    app.add_option("--min-arm", min_arm, "Minimum rows per arm in each child")->capture_default_str();
    app.add_option("--min-node", min_node, "Smallest node that may be split")->capture_default_str();
    app.add_option("--max-depth", max_depth, "Maximum tree depth")->capture_default_str();
    app.add_option("--split-method", split_method, "Best-cut search for continuous covariates")
        ->capture_default_str()
        ->check(CLI::IsMember({"gs", "sss"}));
    app.add_option("--a", a, "Sigmoid shape parameter")->capture_default_str()->check(CLI::Range(1.0, 1000.0));
    app.add_option("--brent-tol", brent_tol, "Brent tolerance on the standardized scale")->capture_default_str();
    app.add_option("--brent-max-iter", brent_max_iter, "Brent iteration cap")->capture_default_str();
  }

  ForestParams params(std::uint64_t seed, unsigned threads) const {
    ForestParams p;
    p.b = b;
    p.seed = seed;
    p.threads = threads;
    p.tree.mtry = mtry;
    p.tree.min_arm = min_arm;
    p.tree.min_node = min_node;
    p.tree.max_depth = max_depth;
    p.tree.split_method = split_method == "gs" ? SplitMethod::gs : SplitMethod::sss;
    p.tree.sss.a = a;
    p.tree.sss.brent_tol = brent_tol;
    p.tree.sss.brent_max_iter = brent_max_iter;
    p.tree.sss.validate();
    return p;
  }
};

struct Common {
  std::uint64_t seed = kDefaultSeed;
  std::optional<unsigned> threads;
  std::string out;
  std::string config;

  void add_to(CLI::App& app) {
    app.add_option("--seed", seed, "Seed for all randomness")->capture_default_str();
    app.add_option("--threads", threads, "Worker threads (default: $RFIT_THREADS, else all cores)");
    app.add_option("--out", out, "Output directory")->required();
    app.add_option("--config", config, "JSON file of option values; flags take precedence");
  }

  unsigned resolved_threads() const {
    if (threads) return *threads;
    if (const char* env = std::getenv("RFIT_THREADS")) {
      try {
        return static_cast<unsigned>(std::stoul(env));
      } catch (const std::exception&) {
        throw Error(std::string("RFIT_THREADS is not a number: '") + env + "'");
      }
    }
    return 0;
  }
};

std::string prediction_csv(const std::vector<ItePrediction>& preds, SeVariant se, bool sort_by_ite) {
  std::vector<std::size_t> order(preds.size());
  std::iota(order.begin(), order.end(), 0);
  if (sort_by_ite) {
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return preds[a].estimate < preds[b].estimate; });
  }
  std::string s = "row_id,ite,se,se_raw,se_c0,se_c,clamped_c0,clamped_c\n";
  for (const std::size_t i : order) {
    const auto& p = preds[i];
    s += std::to_string(i) + ',' + format_double(p.estimate) + ',' + format_double(p.se(se)) + ',' +
         format_double(p.se(SeVariant::raw)) + ',' + format_double(p.se(SeVariant::c0)) + ',' +
         format_double(p.se(SeVariant::c)) + ',' + (p.clamped_c0 ? "1" : "0") + ',' + (p.clamped_c ? "1" : "0") +
         '\n';
  }
  return s;
}

std::string point_csv(const std::vector<double>& ite) {
  std::string s = "row_id,ite\n";
  for (std::size_t i = 0; i < ite.size(); ++i) s += std::to_string(i) + ',' + format_double(ite[i]) + '\n';
  return s;
}

std::string sr_csv(const std::vector<double>& ite) {
  std::string s = "row_id,ite_sr\n";
  for (std::size_t i = 0; i < ite.size(); ++i) s += std::to_string(i) + ',' + format_double(ite[i]) + '\n';
  return s;
}

SeVariant parse_se(const std::string& s) {
  if (s == "raw") return SeVariant::raw;
  if (s == "c0") return SeVariant::c0;
  return SeVariant::c;
}

void write_report(const ExperimentReport& r, const fs::path& dir, OutputGuard& guard) {
  guard.file(dir / "report.json");
  guard.file(dir / "report.csv");
  r.write(dir);
  if (r.experiment == "timing") {
    std::ostringstream table;
    write_timing_table(table, r);
    write_text(guard.file(dir / "timing_table.csv"), table.str());
  }
}

struct TimingFlags {
  std::string n_grid = "50,100,500,1000,2000,5000,10000";
  std::string k_grid = "10,100,500";
  std::size_t repeats = 10;
  double a = 10.0;
  double min_arm = 5;

  void add_to(CLI::App& app) {
    app.add_option("--n-grid", n_grid, "Comma-separated sample sizes")->capture_default_str();
    app.add_option("--k-grid", k_grid, "Comma-separated distinct-value counts")->capture_default_str();
    app.add_option("--repeats", repeats, "Timed calls averaged per cell")->capture_default_str();
    app.add_option("--a", a, "Sigmoid shape parameter")->capture_default_str();
    app.add_option("--min-arm", min_arm, "Minimum rows per arm in each child")->capture_default_str();
  }

  TimingBenchConfig config() const {
    TimingBenchConfig c;
    c.n_grid = parse_numbers<std::size_t>(n_grid, "--n-grid");
    c.k_grid = parse_numbers<std::size_t>(k_grid, "--k-grid");
    c.repeats = repeats;
    c.a = a;
    c.min_arm = min_arm;
    return c;
  }
};

std::vector<std::string> with_config(std::vector<std::string> args) {
  std::optional<std::string> path;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (!path) return args;
  std::ifstream in(*path);
  if (!in) throw Error("cannot open config file " + *path);
  std::stringstream text;
  text << in.rdbuf();
  auto injected = config_to_args(text.str());
  std::size_t at = std::min<std::size_t>(args.size(), 2);
  if (args.size() > 2 && args[1] == "simulate" && args[2].rfind('-', 0) != 0) at = 3;
  args.insert(args.begin() + static_cast<std::ptrdiff_t>(at), injected.begin(), injected.end());
  return args;
}

}  // namespace

std::vector<std::string> config_to_args(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("config file is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ParseError("config file must hold a JSON object");
  std::vector<std::string> args;
  for (const auto& [key, value] : j.items()) {
    if (key == "config") continue;
    std::string flag = "--" + key;
    std::replace(flag.begin(), flag.end(), '_', '-');
    const auto scalar = [](const nlohmann::json& v) -> std::string {
      if (v.is_string()) return v.get<std::string>();
      if (v.is_number_float()) return format_double(v.get<double>());
      return v.dump();
    };
    if (value.is_boolean()) {
      if (value.get<bool>()) args.push_back(flag);
    } else if (value.is_array()) {
      std::string list;
      for (const auto& item : value) list += (list.empty() ? "" : ",") + scalar(item);
      args.push_back(flag);
      args.push_back(list);
    } else if (value.is_null() || value.is_object()) {
      throw ParseError("config key '" + key + "' must be a scalar or a list");
    } else {
      args.push_back(flag);
      args.push_back(scalar(value));
    }
  }
  return args;
}

int run(const std::vector<std::string>& argv_in, std::ostream& out, std::ostream& err) {
  CLI::App app{"Random forests of interaction trees for individualized treatment effects", "rfit"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  // fit
  auto* fit = app.add_subcommand("fit", "Fit a forest on a trial CSV and predict its own rows");
  Common fit_common;
  TreeFlags fit_tree;
  std::string data_path, schema_path, response, treatment, covariates, nominal, exclude, on_missing;
  std::string fit_se = "c";
  bool fit_sr = false;
  fit_common.add_to(*fit);
  fit_tree.add_to(*fit, 2000);
  fit->add_option("--data", data_path, "Training CSV")->required()->check(CLI::ExistingFile);
  fit->add_option("--schema", schema_path, "Schema JSON (response, treatment, covariates, ...)")
      ->check(CLI::ExistingFile);
  fit->add_option("--response", response, "Response column");
  fit->add_option("--treatment", treatment, "0/1 treatment column");
  fit->add_option("--covariates", covariates, "Comma-separated covariates (default: all other columns)");
  fit->add_option("--nominal", nominal, "Comma-separated nominal covariates");
  fit->add_option("--exclude", exclude, "Comma-separated columns to ignore");
  fit->add_option("--on-missing", on_missing, "Missing cells: error or drop")->check(CLI::IsMember({"error", "drop"}));
  fit->add_option("--se", fit_se, "SE column variant")->capture_default_str()->check(CLI::IsMember({"c", "c0", "raw"}));
  fit->add_flag("--sr", fit_sr, "Also fit the separate-regression baseline");

  // predict
  auto* predict = app.add_subcommand("predict", "Predict ITEs with standard errors from a saved forest");
  Common pred_common;
  std::string model_dir, rows_path, se = "c", unseen = "error";
  bool sort_by_ite = false;
  pred_common.add_to(*predict);
  predict->add_option("--model", model_dir, "Model directory written by fit")->required()->check(CLI::ExistingDirectory);
  predict->add_option("--data", rows_path, "CSV of covariate rows")->required()->check(CLI::ExistingFile);
  predict->add_option("--se", se, "SE column variant")->capture_default_str()->check(CLI::IsMember({"c", "c0", "raw"}));
  predict->add_flag("--sort-by-ite", sort_by_ite, "Order rows by estimated ITE");
  predict->add_option("--unseen", unseen, "Unseen nominal labels: error or nearest")
      ->capture_default_str()
      ->check(CLI::IsMember({"error", "nearest"}));

  // simulate
  auto* simulate = app.add_subcommand("simulate", "Run a simulation experiment");
  simulate->require_subcommand(1);

  auto* cut = simulate->add_subcommand("cutpoint", "Cutoff recovery, greedy versus smoothed search");
  Common cut_common;
  CutpointStudyConfig cut_cfg;
  std::string a_grid = "1,5,10,20,50";
  cut_common.add_to(*cut);
  cut->add_option("--n", cut_cfg.n, "Sample size")->capture_default_str();
  cut->add_option("--k", cut_cfg.k, "Distinct x values (0 = continuous)")->capture_default_str();
  cut->add_option("--c0", cut_cfg.c0, "True cutoff")->capture_default_str();
  cut->add_option("--noise-sd", cut_cfg.noise_sd, "Noise standard deviation")->capture_default_str();
  cut->add_option("--reps", cut_cfg.replicates, "Replicates")->capture_default_str();
  cut->add_option("--a-grid", a_grid, "Comma-separated sigmoid shape values")->capture_default_str();
  cut->add_option("--min-arm", cut_cfg.min_arm, "Minimum rows per arm in each child")->capture_default_str();

  auto* mse = simulate->add_subcommand("mse", "RFIT versus separate regression on models I-IV");
  Common mse_common;
  TreeFlags mse_tree;
  MseStudyConfig mse_cfg;
  std::string models = "I,II,III,IV";
  mse_common.add_to(*mse);
  mse_tree.add_to(*mse, 500);
  mse->add_option("--models", models, "Comma-separated models")->capture_default_str();
  mse->add_option("--n", mse_cfg.n, "Training size")->capture_default_str();
  mse->add_option("--n-test", mse_cfg.n_test, "Test size")->capture_default_str();
  mse->add_option("--reps", mse_cfg.replicates, "Replicates")->capture_default_str();

  auto* sesim = simulate->add_subcommand("se", "Standard errors against replicate spread");
  Common se_common;
  TreeFlags se_tree;
  SeStudyConfig se_cfg;
  std::string se_model = "III";
  se_common.add_to(*sesim);
  se_tree.add_to(*sesim, 2000);
  sesim->add_option("--model", se_model, "Model")->capture_default_str();
  sesim->add_option("--n", se_cfg.n, "Training size")->capture_default_str();
  sesim->add_option("--n-test", se_cfg.n_test, "Test points")->capture_default_str();
  sesim->add_option("--reps", se_cfg.replicates, "Replicates")->capture_default_str();

  auto* timing = simulate->add_subcommand("timing", "Split-search timing grid");
  Common timing_common;
  TimingFlags timing_flags;
  timing_common.add_to(*timing);
  timing_flags.add_to(*timing);

  // bench
  auto* bench = app.add_subcommand("bench", "Split-search timing grid (same as simulate timing)");
  Common bench_common;
  TimingFlags bench_flags;
  bench_common.add_to(*bench);
  bench_flags.add_to(*bench);

  std::vector<std::string> args;
  try {
    args = with_config(argv_in);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  std::vector<const char*> cargs;
  for (const auto& a : args) cargs.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(cargs.size()), cargs.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  OutputGuard guard;
  try {
    if (fit->parsed()) {
      SchemaConfig schema;
      if (!schema_path.empty()) schema = SchemaConfig::from_json_file(schema_path);
      if (!response.empty()) schema.response = response;
      if (!treatment.empty()) schema.treatment = treatment;
      if (!covariates.empty()) schema.covariates = split_list(covariates);
      if (!nominal.empty()) schema.nominal = split_list(nominal);
      if (!exclude.empty()) schema.exclude = split_list(exclude);
      if (!on_missing.empty()) schema.on_missing = on_missing == "drop" ? MissingPolicy::drop : MissingPolicy::error;
      if (schema.response.empty() || schema.treatment.empty())
        throw SchemaError("the schema needs --response and --treatment (or a --schema file naming them)");

      const auto data = load_csv(data_path, schema);
      const unsigned threads = fit_common.resolved_threads();
      const auto params = fit_tree.params(fit_common.seed, threads);
      const auto forest = RfitForest::fit(data, params);
      const auto rows = dataset_rows(data);
      const auto preds = forest.predict_with_se(rows, threads);

      const fs::path dir = fit_common.out;
      guard.make_dir(dir);
      guard.file(dir / "model");
      fs::remove_all(dir / "model");
      save_forest(forest, dir / "model");
      write_text(guard.file(dir / "predictions.csv"), prediction_csv(preds, parse_se(fit_se), false));
      if (fit_sr) {
        const auto sr = SrModel::fit(data, params);
        write_text(guard.file(dir / "predictions_sr.csv"), sr_csv(sr.predict(rows)));
      }

      double mean_ite = 0;
      for (const auto& p : preds) mean_ite += p.estimate;
      mean_ite /= static_cast<double>(preds.size());
      out << "n=" << data.n() << " p=" << data.p() << " B=" << params.b << " a=" << format_double(params.tree.sss.a)
          << " split=" << fit_tree.split_method << '\n'
          << "mean in-sample ITE: " << format_double(mean_ite) << '\n'
          << "unadjusted difference: " << format_double(data.unadjusted_effect()) << '\n';
    } else if (predict->parsed()) {
      const auto forest = load_forest(model_dir);
      const auto rows = load_covariate_rows(rows_path, forest.columns(),
                                            unseen == "nearest" ? UnseenLevelPolicy::nearest : UnseenLevelPolicy::error);
      const unsigned threads = pred_common.resolved_threads();
      const fs::path dir = pred_common.out;
      std::string csv;
      if (forest.size() >= 2) {
        csv = prediction_csv(forest.predict_with_se(rows, threads), parse_se(se), sort_by_ite);
      } else {
        auto ite = forest.predict(rows);
        if (sort_by_ite) throw Error("--sort-by-ite needs a forest with standard errors (b >= 2)");
        csv = point_csv(ite);
      }
      guard.make_dir(dir);
      write_text(guard.file(dir / "predictions.csv"), csv);
      out << "predicted " << rows.size() << " rows with " << forest.size() << " trees\n";
    } else if (cut->parsed()) {
      cut_cfg.a_grid = parse_numbers<double>(a_grid, "--a-grid");
      cut_cfg.threads = cut_common.resolved_threads();
      const auto r = run_cutpoint_study(cut_cfg, cut_common.seed);
      guard.make_dir(cut_common.out);
      write_report(r, cut_common.out, guard);
      for (const auto& [k, v] : r.summary)
        if (k.rfind("mse.", 0) == 0) out << k << " = " << format_double(v) << '\n';
    } else if (mse->parsed()) {
      mse_cfg.models.clear();
      for (const auto& m : split_list(models)) mse_cfg.models.push_back(parse_model(m));
      mse_cfg.threads = mse_common.resolved_threads();
      mse_cfg.forest = mse_tree.params(mse_common.seed, 1);
      const auto r = run_mse_study(mse_cfg, mse_common.seed);
      guard.make_dir(mse_common.out);
      write_report(r, mse_common.out, guard);
      for (const auto& [k, v] : r.summary)
        if (k.rfind("mean_mse.", 0) == 0) out << k << " = " << format_double(v) << '\n';
    } else if (sesim->parsed()) {
      se_cfg.model = parse_model(se_model);
      se_cfg.threads = se_common.resolved_threads();
      se_cfg.forest = se_tree.params(se_common.seed, 1);
      const auto r = run_se_study(se_cfg, se_common.seed);
      guard.make_dir(se_common.out);
      write_report(r, se_common.out, guard);
      out << "median corrected SE / SD = " << format_double(r.summary_value("median_ratio_c")) << '\n';
    } else {
      const bool is_bench = bench->parsed();
      const auto& common = is_bench ? bench_common : timing_common;
      const auto& flags = is_bench ? bench_flags : timing_flags;
      const auto r = run_timing_bench(flags.config(), common.seed);
      guard.make_dir(common.out);
      write_report(r, common.out, guard);
      out << "SSS speedup over naive GS at the largest cell: "
          << format_double(r.summary_value("speedup_sss_vs_naive")) << '\n';
    }
    guard.commit();
    return 0;
  } catch (const CLI::ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace rfit::cli
