#include "rfit/serialize.hpp"

#include <fstream>
#include <sstream>

namespace rfit {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

std::string split_method_name(SplitMethod m) { return m == SplitMethod::gs ? "gs" : "sss"; }

SplitMethod parse_split_method(const std::string& s) {
  if (s == "gs") return SplitMethod::gs;
  if (s == "sss") return SplitMethod::sss;
  throw ParseError("unknown split method '" + s + "'");
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void write_json(const ojson& j, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(1) << '\n';
  if (!out) throw Error("failed writing " + path.string());
}

int column_index(const std::vector<ColumnMeta>& columns, const std::string& name) {
  for (std::size_t j = 0; j < columns.size(); ++j)
    if (columns[j].name == name) return static_cast<int>(j);
  throw ParseError("tree refers to unknown covariate '" + name + "'");
}

}  // namespace

ojson column_to_json(const ColumnMeta& meta) {
  ojson j;
  j["name"] = meta.name;
  j["kind"] = meta.is_nominal() ? "nominal" : "continuous";
  if (meta.is_nominal()) j["levels"] = meta.levels;
  j["mean"] = meta.mean;
  j["sd"] = meta.sd;
  return j;
}

ColumnMeta column_from_json(const nlohmann::json& j) {
  ColumnMeta m;
  m.name = j.at("name").get<std::string>();
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "nominal") {
    m.kind = ColumnKind::nominal;
    m.levels = j.at("levels").get<std::vector<std::string>>();
  } else if (kind != "continuous") {
    throw ParseError("unknown column kind '" + kind + "'");
  }
  m.mean = j.value("mean", 0.0);
  m.sd = j.value("sd", 0.0);
  return m;
}

ojson params_to_json(const ForestParams& p) {
  ojson j;
  j["b"] = p.b;
  j["mtry"] = p.tree.mtry;
  j["min_arm"] = p.tree.min_arm;
  j["min_node"] = p.tree.min_node;
  j["max_depth"] = p.tree.max_depth;
  j["split_method"] = split_method_name(p.tree.split_method);
  j["a"] = p.tree.sss.a;
  j["brent_tol"] = p.tree.sss.brent_tol;
  j["brent_max_iter"] = p.tree.sss.brent_max_iter;
  j["seed"] = p.seed;
  return j;
}

ForestParams params_from_json(const nlohmann::json& j) {
  ForestParams p;
  p.b = j.at("b").get<std::size_t>();
  p.tree.mtry = j.at("mtry").get<std::size_t>();
  p.tree.min_arm = j.at("min_arm").get<std::size_t>();
  p.tree.min_node = j.at("min_node").get<std::size_t>();
  p.tree.max_depth = j.at("max_depth").get<std::size_t>();
  p.tree.split_method = parse_split_method(j.at("split_method").get<std::string>());
  p.tree.sss.a = j.at("a").get<double>();
  p.tree.sss.brent_tol = j.at("brent_tol").get<double>();
  p.tree.sss.brent_max_iter = j.at("brent_max_iter").get<int>();
  p.seed = j.at("seed").get<std::uint64_t>();
  return p;
}

ojson tree_to_json(const InteractionTree& tree, const std::vector<ColumnMeta>& columns) {
  ojson nodes = ojson::array();
  for (const auto& nd : tree.nodes()) {
    ojson n;
    if (nd.is_terminal()) {
      n["covariate"] = nullptr;
    } else {
      n["covariate"] = columns.at(static_cast<std::size_t>(nd.covariate)).name;
      n["cutpoint"] = nd.cutpoint;
      n["left"] = nd.left;
      n["right"] = nd.right;
      n["q"] = nd.q;
    }
    n["effect"] = nd.effect;
    n["n1"] = nd.n1;
    n["n0"] = nd.n0;
    nodes.push_back(std::move(n));
  }
  ojson coding = ojson::object();
  for (std::size_t j = 0; j < tree.coding().size(); ++j) {
    const auto& c = tree.coding()[j];
    if (c.empty()) continue;
    ojson codes = ojson::object();
    for (std::size_t l = 0; l < c.code_of_level.size(); ++l) codes[columns.at(j).levels.at(l)] = c.code_of_level[l];
    coding[columns[j].name] = {{"codes", std::move(codes)}, {"fallback", c.fallback}};
  }
  ojson out;
  out["nodes"] = std::move(nodes);
  out["nominal_coding"] = std::move(coding);
  return out;
}

InteractionTree tree_from_json(const nlohmann::json& j, const std::vector<ColumnMeta>& columns) {
  std::vector<TreeNode> nodes;
  for (const auto& n : j.at("nodes")) {
    TreeNode nd;
    if (!n.at("covariate").is_null()) {
      nd.covariate = column_index(columns, n.at("covariate").get<std::string>());
      nd.cutpoint = n.at("cutpoint").get<double>();
      nd.left = n.at("left").get<std::int32_t>();
      nd.right = n.at("right").get<std::int32_t>();
      nd.q = n.value("q", 0.0);
    }
    nd.effect = n.at("effect").get<double>();
    nd.n1 = n.at("n1").get<std::uint32_t>();
    nd.n0 = n.at("n0").get<std::uint32_t>();
    nodes.push_back(nd);
  }
  std::vector<NominalCoding> coding(columns.size());
  if (j.contains("nominal_coding")) {
    for (const auto& [name, c] : j.at("nominal_coding").items()) {
      const auto col = static_cast<std::size_t>(column_index(columns, name));
      const auto& levels = columns[col].levels;
      auto& nc = coding[col];
      nc.code_of_level.assign(levels.size(), 0.0);
      for (std::size_t l = 0; l < levels.size(); ++l) {
        const auto& codes = c.at("codes");
        if (!codes.contains(levels[l])) throw ParseError("coding for '" + name + "' lacks level '" + levels[l] + "'");
        nc.code_of_level[l] = codes.at(levels[l]).get<double>();
      }
      nc.fallback = c.at("fallback").get<double>();
    }
  }
  try {
    return InteractionTree(std::move(nodes), std::move(coding));
  } catch (const std::invalid_argument& e) {
    throw ParseError(std::string("invalid tree: ") + e.what());
  }
}

void save_forest(const RfitForest& forest, const fs::path& dir) {
  fs::create_directories(dir);
  ojson manifest;
  manifest["format"] = kForestFormat;
  manifest["version"] = kForestFormatVersion;
  manifest["params"] = params_to_json(forest.params());
  manifest["n_train"] = forest.n_train();
  manifest["n_trees"] = forest.size();
  ojson cols = ojson::array();
  for (const auto& c : forest.columns()) cols.push_back(column_to_json(c));
  manifest["columns"] = std::move(cols);
  write_json(manifest, dir / "manifest.json");

  for (std::size_t b = 0; b < forest.size(); ++b) {
    ojson t = tree_to_json(forest.trees()[b], forest.columns());
    const auto row = forest.counts().row(b);
    t["bootstrap_counts"] = std::vector<std::uint16_t>(row.begin(), row.end());
    write_json(t, dir / ("tree_" + std::to_string(b) + ".json"));
  }
}

RfitForest load_forest(const fs::path& dir) {
  const auto manifest = read_json(dir / "manifest.json");
  try {
    if (manifest.at("format").get<std::string>() != kForestFormat) throw ParseError("not an rfit forest manifest");
    if (manifest.at("version").get<int>() != kForestFormatVersion) throw ParseError("unsupported forest format version");
    const auto params = params_from_json(manifest.at("params"));
    const auto n = manifest.at("n_train").get<std::size_t>();
    const auto b = manifest.at("n_trees").get<std::size_t>();
    std::vector<ColumnMeta> columns;
    for (const auto& c : manifest.at("columns")) columns.push_back(column_from_json(c));

    std::vector<InteractionTree> trees;
    trees.reserve(b);
    CountMatrix counts(b, n);
    for (std::size_t k = 0; k < b; ++k) {
      const auto path = dir / ("tree_" + std::to_string(k) + ".json");
      const auto j = read_json(path);
      trees.push_back(tree_from_json(j, columns));
      const auto c = j.at("bootstrap_counts").get<std::vector<std::uint16_t>>();
      if (c.size() != n) throw ParseError(path.string() + ": bootstrap_counts has wrong length");
      std::copy(c.begin(), c.end(), counts.row(k).begin());
    }
    return RfitForest(std::move(trees), std::move(counts), params, std::move(columns));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError((dir / "manifest.json").string() + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw ParseError(std::string("inconsistent forest: ") + e.what());
  }
}

}  // namespace rfit
