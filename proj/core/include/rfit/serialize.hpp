#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rfit/data.hpp"
#include "rfit/forest.hpp"
#include "rfit/tree.hpp"

namespace rfit {

inline constexpr const char* kForestFormat = "rfit-forest";
inline constexpr int kForestFormatVersion = 1;

nlohmann::ordered_json column_to_json(const ColumnMeta& meta);
ColumnMeta column_from_json(const nlohmann::json& j);

nlohmann::ordered_json params_to_json(const ForestParams& params);
ForestParams params_from_json(const nlohmann::json& j);

/// Node list with covariate names, cutpoints, effects and arm counts, plus
/// the level codes of any nominal covariate.
nlohmann::ordered_json tree_to_json(const InteractionTree& tree, const std::vector<ColumnMeta>& columns);
InteractionTree tree_from_json(const nlohmann::json& j, const std::vector<ColumnMeta>& columns);

/// Writes `dir/manifest.json` and one `dir/tree_<b>.json` per tree (b from 0).
/// Each tree file also carries that tree's bootstrap counts.
void save_forest(const RfitForest& forest, const std::filesystem::path& dir);
/// Throws ParseError on malformed or inconsistent files.
RfitForest load_forest(const std::filesystem::path& dir);

}  // namespace rfit
