#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "rfit/random.hpp"
#include "rfit_cli/cli.hpp"

namespace fs = std::filesystem;

namespace {

struct Scratch {
  fs::path dir;
  explicit Scratch(const std::string& name) : dir(fs::temp_directory_path() / ("rfit_cli_" + name)) {
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Scratch() { fs::remove_all(dir); }
  std::string operator/(const std::string& leaf) const { return (dir / leaf).string(); }
};

struct Result {
  int code;
  std::string out, err;
};

Result call(std::vector<std::string> args) {
  args.insert(args.begin(), "rfit");
  std::ostringstream out, err;
  const int code = rfit::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::vector<std::string>> read_csv(const std::string& path) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(slurp(path));
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

// n rows of id,y,trt,x1,x2 with `treated` treated rows.
void write_trial(const std::string& path, std::size_t n, std::size_t treated, const std::string& bad_trt = "") {
  rfit::Rng rng(42);
  std::ofstream out(path);
  out << "id,y,trt,x1,x2\n";
  for (std::size_t i = 0; i < n; ++i) {
    const double x1 = rng.uniform(), x2 = rng.uniform();
    const int t = i < treated ? 1 : 0;
    const double y = x1 + (t ? 2 * x2 : 0) + 0.3 * rng.normal();
    out << i << ',' << y << ',' << (i == 3 && !bad_trt.empty() ? bad_trt : std::to_string(t)) << ',' << x1 << ','
        << x2 << '\n';
  }
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("fit then predict on the training rows") {
    Scratch s("fit");
    write_trial(s / "train.csv", 40, 20);
    const auto fit = call({"fit", "--data", s / "train.csv", "--response", "y", "--treatment", "trt", "--exclude",
                           "id", "--b", "20", "--out", s / "run", "--threads", "1"});
    REQUIRE_MESSAGE(fit.code == 0, fit.err);
    CHECK(fit.out.find("n=40 p=2 B=20") != std::string::npos);
    CHECK(fs::exists(s / "run/model/manifest.json"));
    const auto in_sample = read_csv(s / "run/predictions.csv");
    CHECK(in_sample.size() == 41);

    const auto pred = call({"predict", "--model", s / "run/model", "--data", s / "train.csv", "--out", s / "pred"});
    REQUIRE_MESSAGE(pred.code == 0, pred.err);
    const auto rows = read_csv(s / "pred/predictions.csv");
    REQUIRE(rows.size() == 41);
    CHECK(rows[0] == std::vector<std::string>{"row_id", "ite", "se", "se_raw", "se_c0", "se_c", "clamped_c0",
                                              "clamped_c"});
    for (std::size_t i = 1; i < rows.size(); ++i) {
      CHECK(rows[i][2] == rows[i][5]);
      CHECK(rows[i][1] == in_sample[i][1]);
    }

    const auto sorted = call({"predict", "--model", s / "run/model", "--data", s / "train.csv", "--out",
                              s / "sorted", "--sort-by-ite", "--se", "raw"});
    REQUIRE(sorted.code == 0);
    const auto srows = read_csv(s / "sorted/predictions.csv");
    for (std::size_t i = 2; i < srows.size(); ++i) CHECK(std::stod(srows[i - 1][1]) <= std::stod(srows[i][1]));
    for (std::size_t i = 1; i < srows.size(); ++i) CHECK(srows[i][2] == srows[i][3]);
  }

  TEST_CASE("fit with --sr writes baseline predictions") {
    Scratch s("sr");
    write_trial(s / "train.csv", 60, 30);
    const auto r = call({"fit", "--data", s / "train.csv", "--response", "y", "--treatment", "trt", "--exclude", "id",
                         "--b", "10", "--sr", "--out", s / "run"});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    const auto rows = read_csv(s / "run/predictions_sr.csv");
    CHECK(rows.size() == 61);
    CHECK(rows[0] == std::vector<std::string>{"row_id", "ite_sr"});
  }

  TEST_CASE("a bad treatment value fails with a message naming it") {
    Scratch s("badtrt");
    write_trial(s / "train.csv", 40, 20, "2");
    const auto r = call({"fit", "--data", s / "train.csv", "--response", "y", "--treatment", "trt", "--exclude", "id",
                         "--out", s / "run"});
    CHECK(r.code != 0);
    CHECK(r.err.find("'2'") != std::string::npos);
    CHECK_FALSE(fs::exists(s / "run"));
  }

  TEST_CASE("a failing command removes the outputs it created") {
    Scratch s("partial");
    // 10 treated rows: enough for the forest, too few for the separate-regression arm.
    write_trial(s / "train.csv", 40, 10);
    const auto r = call({"fit", "--data", s / "train.csv", "--response", "y", "--treatment", "trt", "--exclude", "id",
                         "--b", "5", "--sr", "--out", s / "nested/run"});
    CHECK(r.code == 1);
    CHECK_FALSE(fs::exists(s / "nested"));
  }

  TEST_CASE("usage errors") {
    Scratch s("usage");
    CHECK(call({"simulate", "nosuch", "--out", s / "x"}).code != 0);
    CHECK(call({"simulate", "cutpoint"}).code != 0);
    CHECK(call({}).code != 0);
    const auto bad = call({"simulate", "cutpoint", "--reps", "12", "--a-grid", "1,x", "--out", s / "x"});
    CHECK(bad.code == 2);
    CHECK(bad.err.find("'x'") != std::string::npos);
  }

  TEST_CASE("config files: values become flags and explicit flags win") {
    const auto args = rfit::cli::config_to_args(R"({"reps": 12, "a_grid": [1, 2.5], "sort_by_ite": true,
                                                  "split_method": "gs"})");
    CHECK(args == std::vector<std::string>{"--a-grid", "1,2.5", "--reps", "12", "--sort-by-ite", "--split-method",
                                           "gs"});
    CHECK_THROWS(rfit::cli::config_to_args("[1,2]"));
    CHECK_THROWS(rfit::cli::config_to_args("{bad"));

    Scratch s("config");
    std::ofstream(s / "cfg.json") << R"({"reps": 10, "n": 100, "a_grid": [10]})";
    const auto r = call({"simulate", "cutpoint", "--config", s / "cfg.json", "--reps", "11", "--out", s / "out"});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    const auto rows = read_csv(s / "out/report.csv");
    CHECK(rows.size() == 1 + 11 * 2);
    CHECK(slurp(s / "out/report.json").find("\"n\": \"100\"") != std::string::npos);
  }

  TEST_CASE("simulate timing writes the table") {
    Scratch s("timing");
    const auto r = call({"bench", "--n-grid", "100", "--k-grid", "10", "--repeats", "1", "--out", s / "t"});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    CHECK(fs::exists(s / "t/timing_table.csv"));
    CHECK(fs::exists(s / "t/report.json"));
  }
}
