#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

#include "rfit/data.hpp"

namespace rfit {

namespace {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_of_row;  // 1-based line number in the file
};

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string> split_record(std::string_view line, std::size_t line_no) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (quoted) throw ParseError("unterminated quote on line " + std::to_string(line_no));
  fields.emplace_back(trim(cur));
  return fields;
}

CsvTable read_table(std::istream& in) {
  CsvTable table;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    if (trim(line).empty()) continue;
    auto fields = split_record(line, line_no);
    if (!have_header) {
      table.header = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != table.header.size()) {
      throw ParseError("line " + std::to_string(line_no) + " has " + std::to_string(fields.size()) +
                       " fields, header has " + std::to_string(table.header.size()));
    }
    table.rows.push_back(std::move(fields));
    table.line_of_row.push_back(line_no);
  }
  if (!have_header) throw ParseError("CSV input has no header row");
  return table;
}

bool is_missing(std::string_view cell) { return cell.empty() || cell == "NA" || cell == "NaN" || cell == "nan"; }

std::optional<double> parse_double(std::string_view cell) {
  double v = 0.0;
  if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
  const auto* end = cell.data() + cell.size();
  auto [ptr, ec] = std::from_chars(cell.data(), end, v);
  if (ec != std::errc{} || ptr != end || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::size_t column_index(const CsvTable& table, const std::string& name, const char* role) {
  const auto it = std::find(table.header.begin(), table.header.end(), name);
  if (it == table.header.end()) throw SchemaError(std::string(role) + " column '" + name + "' not found in CSV header");
  return static_cast<std::size_t>(it - table.header.begin());
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string quote_if_needed(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  return out + "\"";
}

}  // namespace

TrialDataset read_csv(std::istream& in, const SchemaConfig& schema) {
  if (schema.response.empty()) throw SchemaError("schema must name a response column");
  if (schema.treatment.empty()) throw SchemaError("schema must name a treatment column");
  const CsvTable table = read_table(in);

  const std::size_t y_col = column_index(table, schema.response, "response");
  const std::size_t t_col = column_index(table, schema.treatment, "treatment");

  std::vector<std::string> cov_names = schema.covariates;
  if (cov_names.empty()) {
    for (const auto& h : table.header) {
      if (h == schema.response || h == schema.treatment) continue;
      if (std::find(schema.exclude.begin(), schema.exclude.end(), h) != schema.exclude.end()) continue;
      cov_names.push_back(h);
    }
  }
  if (cov_names.empty()) throw SchemaError("schema selects no covariate columns");
  for (const auto& nom : schema.nominal) {
    if (std::find(cov_names.begin(), cov_names.end(), nom) == cov_names.end()) {
      throw SchemaError("nominal column '" + nom + "' is not among the covariates");
    }
  }
  std::vector<std::size_t> cov_cols;
  for (const auto& name : cov_names) {
    if (name == schema.response || name == schema.treatment) {
      throw SchemaError("column '" + name + "' cannot be both a covariate and the response/treatment");
    }
    cov_cols.push_back(column_index(table, name, "covariate"));
  }

  // Missing-data pass.
  std::vector<std::size_t> keep;
  std::vector<std::string> missing_report;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    std::vector<std::string> missing;
    if (is_missing(row[y_col])) missing.push_back(schema.response);
    if (is_missing(row[t_col])) missing.push_back(schema.treatment);
    for (std::size_t k = 0; k < cov_cols.size(); ++k) {
      if (is_missing(row[cov_cols[k]])) missing.push_back(cov_names[k]);
    }
    if (missing.empty()) {
      keep.push_back(r);
    } else if (schema.on_missing == MissingPolicy::error) {
      std::string entry = "line " + std::to_string(table.line_of_row[r]) + " (";
      for (std::size_t m = 0; m < missing.size(); ++m) entry += (m ? ", " : "") + missing[m];
      missing_report.push_back(entry + ")");
    }
  }
  if (!missing_report.empty()) {
    std::string msg = std::to_string(missing_report.size()) + " row(s) with missing values: ";
    for (std::size_t m = 0; m < missing_report.size() && m < 10; ++m) msg += (m ? "; " : "") + missing_report[m];
    if (missing_report.size() > 10) msg += "; ...";
    throw MissingValueError(msg);
  }

  const std::size_t n = keep.size();
  std::vector<double> y(n);
  std::vector<std::uint8_t> t(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& row = table.rows[keep[i]];
    const auto line = std::to_string(table.line_of_row[keep[i]]);
    const auto yv = parse_double(row[y_col]);
    if (!yv) throw ParseError("response '" + schema.response + "' on line " + line + " is not numeric: '" + row[y_col] + "'");
    y[i] = *yv;
    const auto tv = parse_double(row[t_col]);
    if (!tv || (*tv != 0.0 && *tv != 1.0)) {
      throw DomainError("treatment '" + schema.treatment + "' on line " + line + " must be 0 or 1, got '" + row[t_col] + "'");
    }
    t[i] = static_cast<std::uint8_t>(*tv);
  }

  std::vector<std::vector<double>> columns(cov_cols.size(), std::vector<double>(n));
  std::vector<ColumnMeta> meta(cov_cols.size());
  for (std::size_t k = 0; k < cov_cols.size(); ++k) {
    meta[k].name = cov_names[k];
    const bool nominal = std::find(schema.nominal.begin(), schema.nominal.end(), cov_names[k]) != schema.nominal.end();
    if (nominal) {
      meta[k].kind = ColumnKind::nominal;
      std::set<std::string> levels;
      for (std::size_t i = 0; i < n; ++i) levels.insert(table.rows[keep[i]][cov_cols[k]]);
      meta[k].levels.assign(levels.begin(), levels.end());
      for (std::size_t i = 0; i < n; ++i) {
        const auto& cell = table.rows[keep[i]][cov_cols[k]];
        const auto it = std::lower_bound(meta[k].levels.begin(), meta[k].levels.end(), cell);
        columns[k][i] = static_cast<double>(it - meta[k].levels.begin());
      }
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        const auto& cell = table.rows[keep[i]][cov_cols[k]];
        const auto v = parse_double(cell);
        if (!v) {
          throw ParseError("covariate '" + cov_names[k] + "' on line " + std::to_string(table.line_of_row[keep[i]]) +
                           " is not numeric: '" + cell + "' (declare it nominal?)");
        }
        columns[k][i] = *v;
      }
      double mean = 0.0;
      for (double v : columns[k]) mean += v;
      mean /= static_cast<double>(n);
      double ss = 0.0;
      for (double v : columns[k]) ss += (v - mean) * (v - mean);
      meta[k].mean = mean;
      meta[k].sd = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
    }
  }
  return TrialDataset(std::move(y), std::move(t), std::move(columns), std::move(meta));
}

TrialDataset load_csv(const std::filesystem::path& path, const SchemaConfig& schema) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open CSV file " + path.string());
  return read_csv(in, schema);
}

void write_csv(std::ostream& out, const TrialDataset& data, std::string_view response, std::string_view treatment) {
  out << response << ',' << treatment;
  for (const auto& m : data.columns_meta()) out << ',' << quote_if_needed(m.name);
  out << '\n';
  for (std::size_t i = 0; i < data.n(); ++i) {
    out << format_double(data.y()[i]) << ',' << static_cast<int>(data.t()[i]);
    for (std::size_t j = 0; j < data.p(); ++j) {
      const auto& m = data.meta(j);
      out << ',';
      if (m.is_nominal()) {
        out << quote_if_needed(m.levels.at(static_cast<std::size_t>(data.column(j)[i])));
      } else {
        out << format_double(data.column(j)[i]);
      }
    }
    out << '\n';
  }
}

std::vector<std::vector<double>> read_covariate_rows(std::istream& in, const std::vector<ColumnMeta>& meta,
                                                     UnseenLevelPolicy unseen) {
  const CsvTable table = read_table(in);
  std::vector<std::size_t> cols;
  for (const auto& m : meta) cols.push_back(column_index(table, m.name, "covariate"));

  std::vector<std::vector<double>> rows(table.rows.size(), std::vector<double>(meta.size()));
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto line = std::to_string(table.line_of_row[r]);
    for (std::size_t j = 0; j < meta.size(); ++j) {
      const auto& cell = table.rows[r][cols[j]];
      if (is_missing(cell)) {
        throw MissingValueError("covariate '" + meta[j].name + "' is missing on line " + line);
      }
      if (meta[j].is_nominal()) {
        const auto it = std::lower_bound(meta[j].levels.begin(), meta[j].levels.end(), cell);
        if (it == meta[j].levels.end() || *it != cell) {
          if (unseen == UnseenLevelPolicy::error) {
            throw DomainError("level '" + cell + "' of nominal covariate '" + meta[j].name + "' on line " + line +
                              " was not seen during fitting");
          }
          rows[r][j] = kUnseenLevel;
        } else {
          rows[r][j] = static_cast<double>(it - meta[j].levels.begin());
        }
      } else {
        const auto v = parse_double(cell);
        if (!v) throw ParseError("covariate '" + meta[j].name + "' on line " + line + " is not numeric: '" + cell + "'");
        rows[r][j] = *v;
      }
    }
  }
  return rows;
}

std::vector<std::vector<double>> load_covariate_rows(const std::filesystem::path& path,
                                                     const std::vector<ColumnMeta>& meta, UnseenLevelPolicy unseen) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open CSV file " + path.string());
  return read_covariate_rows(in, meta, unseen);
}

}  // namespace rfit
