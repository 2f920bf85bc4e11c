#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "frtrain/dataset.hpp"
#include "frtrain/error.hpp"

namespace frtrain {

namespace {

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::string where(std::size_t row, const std::string& column) {
  return "row " + std::to_string(row) + ", column '" + column + "'";
}

double parse_real(const std::string& cell, std::size_t row, const std::string& column) {
  if (cell.empty()) throw ParseError("empty cell at " + where(row, column));
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(cell.c_str(), &end);
  if (end != cell.c_str() + cell.size() || errno == ERANGE || !std::isfinite(v)) {
    throw ParseError("non-numeric value '" + cell + "' at " + where(row, column));
  }
  return v;
}

int parse_int(const std::string& cell, std::size_t row, const std::string& column) {
  const double v = parse_real(cell, row, column);
  if (v != std::floor(v)) throw ParseError("expected an integer code, got '" + cell + "' at " + where(row, column));
  return static_cast<int>(v);
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    lines.push_back(line);
  }
  if (lines.empty()) throw ParseError(path + ": missing header row");
  // Drop a UTF-8 byte order mark.
  if (lines[0].rfind("\xEF\xBB\xBF", 0) == 0) lines[0].erase(0, 3);
  return lines;
}

std::size_t column_index(const std::vector<std::string>& header, const std::string& name,
                         const std::string& path) {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw ParseError(path + ": missing column '" + name + "'");
  return static_cast<std::size_t>(it - header.begin());
}

}  // namespace

Dataset load_csv(const std::string& path, const CsvSchema& schema) {
  const auto lines = read_lines(path);
  const auto header = split_row(lines[0]);

  std::vector<std::string> feature_names = schema.feature_columns;
  if (feature_names.empty()) {
    for (std::size_t k = 0;; ++k) {
      const std::string name = "x" + std::to_string(k);
      if (std::find(header.begin(), header.end(), name) == header.end()) break;
      feature_names.push_back(name);
    }
    if (feature_names.empty()) throw ParseError(path + ": missing column 'x0'");
  }
  std::vector<std::size_t> feature_cols;
  for (const auto& name : feature_names) feature_cols.push_back(column_index(header, name, path));
  const std::size_t z_col = column_index(header, schema.sensitive_column, path);
  const std::size_t y_col = column_index(header, schema.label_column, path);
  const auto w_it = std::find(header.begin(), header.end(), schema.weight_column);
  const bool has_weight = !schema.weight_column.empty() && w_it != header.end();
  const std::size_t w_col = has_weight ? static_cast<std::size_t>(w_it - header.begin()) : 0;

  std::vector<Example> examples;
  examples.reserve(lines.size() - 1);
  int max_z = 1;
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto cells = split_row(lines[r]);
    if (cells.size() != header.size()) {
      throw ParseError("row " + std::to_string(r) + ": expected " + std::to_string(header.size()) + " cells, got " +
                       std::to_string(cells.size()));
    }
    Example e;
    for (std::size_t k = 0; k < feature_cols.size(); ++k) {
      e.features.push_back(parse_real(cells[feature_cols[k]], r, feature_names[k]));
    }
    e.sensitive = parse_int(cells[z_col], r, schema.sensitive_column);
    if (e.sensitive < 0 || (schema.z_cardinality > 0 && e.sensitive >= schema.z_cardinality)) {
      throw ParseError("sensitive code " + cells[z_col] + " out of range at " + where(r, schema.sensitive_column));
    }
    e.label = parse_int(cells[y_col], r, schema.label_column);
    if (e.label != 0 && e.label != 1) {
      throw ParseError("label " + cells[y_col] + " is not 0/1 at " + where(r, schema.label_column));
    }
    if (has_weight) {
      e.weight = parse_real(cells[w_col], r, schema.weight_column);
      if (e.weight < 0.0) throw ParseError("negative weight at " + where(r, schema.weight_column));
    }
    max_z = std::max(max_z, e.sensitive);
    examples.push_back(std::move(e));
  }
  const int z_card = schema.z_cardinality > 0 ? schema.z_cardinality : max_z + 1;
  return Dataset(feature_names.size(), z_card, std::move(examples));
}

void save_csv(const Dataset& d, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  for (std::size_t k = 0; k < d.feature_dim(); ++k) out << 'x' << k << ',';
  out << "z,y,w\n";
  char buf[64];
  for (const auto& e : d.examples()) {
    for (double v : e.features) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out << buf << ',';
    }
    std::snprintf(buf, sizeof buf, "%.17g", e.weight);
    out << e.sensitive << ',' << e.label << ',' << buf << '\n';
  }
}

std::vector<CrowdResponse> load_crowd_csv(const std::string& path) {
  const auto lines = read_lines(path);
  const auto header = split_row(lines[0]);
  const std::size_t q_col = column_index(header, "question_id", path);
  const std::size_t w_col = column_index(header, "worker_id", path);
  const std::size_t r_col = column_index(header, "rating", path);
  std::vector<CrowdResponse> out;
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto cells = split_row(lines[r]);
    if (cells.size() != header.size()) throw ParseError("row " + std::to_string(r) + ": wrong number of cells");
    CrowdResponse resp{parse_int(cells[q_col], r, "question_id"), parse_int(cells[w_col], r, "worker_id"),
                       parse_int(cells[r_col], r, "rating")};
    if (resp.rating < 1 || resp.rating > 4) throw ParseError("rating outside 1..4 at " + where(r, "rating"));
    out.push_back(resp);
  }
  return out;
}

std::map<int, int> load_gold_csv(const std::string& path) {
  const auto lines = read_lines(path);
  const auto header = split_row(lines[0]);
  const std::size_t q_col = column_index(header, "question_id", path);
  const std::size_t l_col = column_index(header, "label", path);
  std::map<int, int> gold;
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto cells = split_row(lines[r]);
    if (cells.size() != header.size()) throw ParseError("row " + std::to_string(r) + ": wrong number of cells");
    const int label = parse_int(cells[l_col], r, "label");
    if (label != 0 && label != 1) throw ParseError("gold label is not 0/1 at " + where(r, "label"));
    gold[parse_int(cells[q_col], r, "question_id")] = label;
  }
  return gold;
}

}  // namespace frtrain
