#include "rfit/report.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <ostream>
#include <stdexcept>

#include "rfit/error.hpp"

namespace rfit {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

std::string cell_text(const Cell& c) {
  if (const auto* i = std::get_if<std::int64_t>(&c)) return std::to_string(*i);
  if (const auto* d = std::get_if<double>(&c)) return format_double(*d);
  return csv_field(std::get<std::string>(c));
}

nlohmann::ordered_json cell_json(const Cell& c) {
  if (const auto* i = std::get_if<std::int64_t>(&c)) return *i;
  if (const auto* d = std::get_if<double>(&c)) {
    if (std::isfinite(*d)) return *d;
    return nullptr;
  }
  return std::get<std::string>(c);
}

}  // namespace

void ExperimentReport::set_config(std::string key, std::string value) {
  for (auto& [k, v] : config) {
    if (k == key) {
      v = std::move(value);
      return;
    }
  }
  config.emplace_back(std::move(key), std::move(value));
}

void ExperimentReport::set_summary(std::string key, double value) {
  for (auto& [k, v] : summary) {
    if (k == key) {
      v = value;
      return;
    }
  }
  summary.emplace_back(std::move(key), value);
}

double ExperimentReport::summary_value(const std::string& key) const {
  for (const auto& [k, v] : summary)
    if (k == key) return v;
  throw std::out_of_range("report has no summary entry '" + key + "'");
}

std::size_t ExperimentReport::column_index(const std::string& name) const {
  for (std::size_t j = 0; j < columns.size(); ++j)
    if (columns[j] == name) return j;
  throw std::out_of_range("report has no column '" + name + "'");
}

void ExperimentReport::add_row(std::vector<Cell> row) {
  if (row.size() != columns.size()) throw std::invalid_argument("report row width does not match its columns");
  rows.push_back(std::move(row));
}

nlohmann::ordered_json ExperimentReport::to_json() const {
  nlohmann::ordered_json j;
  j["experiment"] = experiment;
  j["seed"] = seed;
  auto& cfg = j["config"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : config) cfg[k] = v;
  auto& sum = j["summary"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : summary) sum[k] = std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr);
  j["columns"] = columns;
  auto& rs = j["rows"] = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    auto row = nlohmann::ordered_json::array();
    for (const auto& c : r) row.push_back(cell_json(c));
    rs.push_back(std::move(row));
  }
  return j;
}

void ExperimentReport::write_csv(std::ostream& out) const {
  for (std::size_t j = 0; j < columns.size(); ++j) out << (j ? "," : "") << csv_field(columns[j]);
  out << '\n';
  for (const auto& r : rows) {
    for (std::size_t j = 0; j < r.size(); ++j) out << (j ? "," : "") << cell_text(r[j]);
    out << '\n';
  }
}

void ExperimentReport::write(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "report.json", std::ios::binary);
    out << to_json().dump(1) << '\n';
    if (!out) throw Error("failed writing " + (dir / "report.json").string());
  }
  std::ofstream out(dir / "report.csv", std::ios::binary);
  write_csv(out);
  if (!out) throw Error("failed writing " + (dir / "report.csv").string());
}

}  // namespace rfit
