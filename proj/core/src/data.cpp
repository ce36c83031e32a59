#include "rfit/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

namespace rfit {

namespace {

std::vector<std::string> string_list(const nlohmann::json& j, const char* key) {
  std::vector<std::string> out;
  if (!j.contains(key)) return out;
  const auto& v = j.at(key);
  if (!v.is_array()) throw SchemaError(std::string("schema key '") + key + "' must be an array of names");
  for (const auto& e : v) out.push_back(e.get<std::string>());
  return out;
}

}  // namespace

SchemaConfig SchemaConfig::from_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError(std::string("schema is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw SchemaError("schema must be a JSON object");
  SchemaConfig s;
  try {
    s.response = j.value("response", std::string{});
    s.treatment = j.value("treatment", std::string{});
    s.covariates = string_list(j, "covariates");
    s.nominal = string_list(j, "nominal");
    s.exclude = string_list(j, "exclude");
    const auto on_missing = j.value("on_missing", std::string("error"));
    if (on_missing == "error") {
      s.on_missing = MissingPolicy::error;
    } else if (on_missing == "drop") {
      s.on_missing = MissingPolicy::drop;
    } else {
      throw SchemaError("on_missing must be \"error\" or \"drop\", got \"" + on_missing + "\"");
    }
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed schema: ") + e.what());
  }
  return s;
}

SchemaConfig SchemaConfig::from_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open schema file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

TrialDataset::TrialDataset(std::vector<double> y, std::vector<std::uint8_t> t,
                           std::vector<std::vector<double>> columns, std::vector<ColumnMeta> meta)
    : y_(std::move(y)), t_(std::move(t)), columns_(std::move(columns)), meta_(std::move(meta)) {
  const std::size_t n = y_.size();
  if (n < 2) throw DomainError("a trial dataset needs at least 2 rows");
  if (t_.size() != n) throw SchemaError("treatment length does not match response length");
  if (columns_.size() != meta_.size()) throw SchemaError("column metadata count does not match column count");
  for (std::size_t j = 0; j < columns_.size(); ++j) {
    if (columns_[j].size() != n) throw SchemaError("covariate '" + meta_[j].name + "' has the wrong length");
    if (meta_[j].is_nominal() && meta_[j].levels.size() < 2) {
      throw SchemaError("nominal covariate '" + meta_[j].name + "' has fewer than 2 levels");
    }
    for (double v : columns_[j]) {
      if (std::isnan(v)) throw MissingValueError("covariate '" + meta_[j].name + "' has missing values");
    }
  }
  std::size_t treated = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (t_[i] > 1) throw DomainError("treatment value " + std::to_string(t_[i]) + " at row " + std::to_string(i) + " is not 0 or 1");
    if (!std::isfinite(y_[i])) throw MissingValueError("response at row " + std::to_string(i) + " is missing or not finite");
    treated += t_[i];
  }
  if (treated == 0 || treated == n) throw DomainError("both treatment arms must be nonempty");
}

std::vector<double> TrialDataset::row(std::size_t i) const {
  std::vector<double> r(columns_.size());
  for (std::size_t j = 0; j < columns_.size(); ++j) r[j] = columns_[j].at(i);
  return r;
}

std::size_t TrialDataset::n_treated() const noexcept {
  return static_cast<std::size_t>(std::count(t_.begin(), t_.end(), std::uint8_t{1}));
}

double TrialDataset::unadjusted_effect() const noexcept {
  double s1 = 0, s0 = 0;
  std::size_t n1 = 0, n0 = 0;
  for (std::size_t i = 0; i < n(); ++i) {
    if (t_[i]) {
      s1 += y_[i];
      ++n1;
    } else {
      s0 += y_[i];
      ++n0;
    }
  }
  return s1 / static_cast<double>(n1) - s0 / static_cast<double>(n0);
}

std::optional<Standardized> standardize_column(std::span<const double> values) {
  const std::size_t n = values.size();
  if (n < 2) return std::nullopt;
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  if (!(sd > 0.0)) return std::nullopt;
  Standardized out{std::vector<double>(n), mean, sd};
  for (std::size_t i = 0; i < n; ++i) out.values[i] = (values[i] - mean) / sd;
  return out;
}

NominalEncoding rank_levels(std::span<const int> level, std::span<const std::string> labels,
                            std::span<const double> y, std::span<const std::uint8_t> t,
                            std::span<const double> weights) {
  const std::size_t n_levels = labels.size();
  std::vector<double> n1(n_levels, 0.0), n0(n_levels, 0.0), s1(n_levels, 0.0), s0(n_levels, 0.0);
  double all_n1 = 0, all_n0 = 0, all_s1 = 0, all_s0 = 0;
  for (std::size_t i = 0; i < level.size(); ++i) {
    const double w = weights.empty() ? 1.0 : weights[i];
    if (w == 0.0) continue;
    const auto l = static_cast<std::size_t>(level[i]);
    if (t[i]) {
      n1[l] += w;
      s1[l] += w * y[i];
      all_n1 += w;
      all_s1 += w * y[i];
    } else {
      n0[l] += w;
      s0[l] += w * y[i];
      all_n0 += w;
      all_s0 += w * y[i];
    }
  }
  const double mean1 = all_n1 > 0 ? all_s1 / all_n1 : 0.0;
  const double mean0 = all_n0 > 0 ? all_s0 / all_n0 : 0.0;

  NominalEncoding enc;
  enc.effect_of_level.resize(n_levels);
  std::size_t observed = 0;
  for (std::size_t l = 0; l < n_levels; ++l) {
    if (n1[l] > 0 && n0[l] > 0) {
      enc.effect_of_level[l] = s1[l] / n1[l] - s0[l] / n0[l];
    } else if (n1[l] > 0) {
      enc.effect_of_level[l] = s1[l] / n1[l] - mean0;
    } else if (n0[l] > 0) {
      enc.effect_of_level[l] = mean1 - s0[l] / n0[l];
    } else {
      enc.effect_of_level[l] = mean1 - mean0;
    }
    if (n1[l] > 0 || n0[l] > 0) ++observed;
  }
  enc.degenerate = observed < 2;

  std::vector<std::size_t> order(n_levels);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (enc.effect_of_level[a] != enc.effect_of_level[b]) return enc.effect_of_level[a] < enc.effect_of_level[b];
    return labels[a] < labels[b];
  });
  enc.rank_of_level.resize(n_levels);
  for (std::size_t r = 0; r < n_levels; ++r) enc.rank_of_level[order[r]] = static_cast<int>(r);

  enc.codes.resize(level.size());
  for (std::size_t i = 0; i < level.size(); ++i) enc.codes[i] = enc.rank_of_level[static_cast<std::size_t>(level[i])];
  return enc;
}

NominalEncoding encode_nominal(std::span<const std::string> labels, std::span<const double> y,
                               std::span<const std::uint8_t> t) {
  std::map<std::string, int> index;
  for (const auto& l : labels) index.emplace(l, 0);
  std::vector<std::string> levels;
  for (auto& [name, idx] : index) {
    idx = static_cast<int>(levels.size());
    levels.push_back(name);
  }
  std::vector<int> level(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) level[i] = index.at(labels[i]);
  return rank_levels(level, levels, y, t);
}

}  // namespace rfit
