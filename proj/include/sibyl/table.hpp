#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "sibyl/csv.hpp"
#include "sibyl/rng.hpp"

namespace sibyl {

using json = nlohmann::json;

enum class TableErrc {
  EmptyTable,
  DuplicateColumn,
  SchemaMismatch,
  UnknownCategory,
  BadValue,
  BadSplit,
  MissingFile,
};

struct TableError : std::runtime_error {
  TableErrc code;
  TableError(TableErrc c, const std::string& what) : std::runtime_error(what), code(c) {}
};

/// Shortest decimal rendering that parses back to the same double.
/// Locale-free; no thousands separators, no units.
inline std::string format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::optional<double> parse_number(std::string_view s) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last) return std::nullopt;
  return v;
}

enum class ColumnKind { Continuous, Categorical };

struct ColumnSchema {
  std::string name;
  ColumnKind kind = ColumnKind::Continuous;
  std::vector<std::string> categories;  // categorical only, ordered
  std::string units;                    // optional free text

  bool operator==(const ColumnSchema&) const = default;

  /// Case-insensitive, whitespace-trimmed category lookup. No fuzzy matching.
  std::optional<std::int32_t> category_index(std::string_view label) const {
    auto trim = [](std::string_view s) {
      while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
      while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
      return s;
    };
    auto lower_eq = [](std::string_view a, std::string_view b) {
      if (a.size() != b.size()) return false;
      for (std::size_t i = 0; i < a.size(); ++i) {
        if (std::tolower(static_cast<unsigned char>(a[i])) !=
            std::tolower(static_cast<unsigned char>(b[i])))
          return false;
      }
      return true;
    };
    const std::string_view needle = trim(label);
    for (std::size_t i = 0; i < categories.size(); ++i) {
      if (lower_eq(categories[i], needle)) return static_cast<std::int32_t>(i);
    }
    return std::nullopt;
  }
};

enum class CellKind : std::uint8_t { Number, Label, Absent };

/// Three-state cell: a number, an interned category label, or absent.
/// Injected vs. native missingness is tracked by MissingnessMask, not here.
struct Cell {
  CellKind kind = CellKind::Absent;
  double num = 0.0;
  std::int32_t cat = -1;

  static Cell number(double v) { return Cell{CellKind::Number, v, -1}; }
  static Cell label(std::int32_t i) { return Cell{CellKind::Label, 0.0, i}; }
  static Cell absent() { return Cell{}; }
  bool is_absent() const { return kind == CellKind::Absent; }

  bool operator==(const Cell& o) const {
    if (kind != o.kind) return false;
    if (kind == CellKind::Number) return num == o.num;
    if (kind == CellKind::Label) return cat == o.cat;
    return true;
  }
};

/// A tabular dataset plus schema, natural-language description and target
/// column. Immutable after construction; treat as a value.
struct TableBundle {
  std::vector<ColumnSchema> schema;
  std::vector<std::vector<Cell>> rows;
  std::string description;
  std::string target;
  std::string domain;  // optional taxonomy label used in reports

  int n() const { return static_cast<int>(rows.size()); }
  int p() const { return static_cast<int>(schema.size()); }

  int column_index(std::string_view name) const {
    for (int i = 0; i < p(); ++i)
      if (schema[i].name == name) return i;
    throw TableError(TableErrc::SchemaMismatch, "no such column: " + std::string(name));
  }
  int target_index() const { return column_index(target); }

  /// Canonical text of a cell: shortest round-trip decimal or the stored
  /// category label. Absent cells have no text.
  std::string cell_text(int row, int col) const {
    const Cell& c = rows[row][col];
    if (c.kind == CellKind::Number) return format_number(c.num);
    if (c.kind == CellKind::Label) return schema[col].categories[c.cat];
    throw TableError(TableErrc::BadValue, "cell_text on absent cell");
  }

  bool operator==(const TableBundle& o) const {
    return schema == o.schema && rows == o.rows && description == o.description &&
           target == o.target && domain == o.domain;
  }

  void validate() const {
    if (schema.empty()) throw TableError(TableErrc::EmptyTable, "EmptyTable: no columns");
    std::set<std::string> seen;
    for (const auto& col : schema) {
      if (col.name.empty())
        throw TableError(TableErrc::SchemaMismatch, "column with empty name");
      if (!seen.insert(col.name).second)
        throw TableError(TableErrc::DuplicateColumn, "DuplicateColumn: " + col.name);
      if (col.kind == ColumnKind::Categorical && col.categories.empty())
        throw TableError(TableErrc::SchemaMismatch,
                         "categorical column without categories: " + col.name);
    }
    const int ti = target_index();
    if (schema[ti].kind != ColumnKind::Categorical)
      throw TableError(TableErrc::SchemaMismatch, "target column must be categorical");
    if (description.empty())
      throw TableError(TableErrc::SchemaMismatch, "bundle description must be nonempty");
    for (const auto& row : rows) {
      if (static_cast<int>(row.size()) != p())
        throw TableError(TableErrc::SchemaMismatch, "row width differs from schema");
      for (int c = 0; c < p(); ++c) {
        const Cell& cell = row[c];
        if (cell.kind == CellKind::Number && schema[c].kind != ColumnKind::Continuous)
          throw TableError(TableErrc::SchemaMismatch, "number in categorical column");
        if (cell.kind == CellKind::Label) {
          if (schema[c].kind != ColumnKind::Categorical)
            throw TableError(TableErrc::SchemaMismatch, "label in continuous column");
          if (cell.cat < 0 || cell.cat >= static_cast<std::int32_t>(schema[c].categories.size()))
            throw TableError(TableErrc::UnknownCategory, "UnknownCategory index");
        }
        if (cell.kind == CellKind::Number && !std::isfinite(cell.num))
          throw TableError(TableErrc::BadValue, "non-finite number in table");
      }
    }
  }
};

struct Split {
  std::vector<int> train;
  std::vector<int> test;
  bool operator==(const Split&) const = default;
};

enum class Mechanism { MAR, Native };

/// Per-cell missingness overlay. Records which cells are held out and how:
/// cells are (row, column-name) pairs; `conditioning` maps each MAR-masked
/// column to the column whose observed values drove the masking.
struct MissingnessMask {
  std::set<std::pair<int, std::string>> cells;
  Mechanism mechanism = Mechanism::Native;
  std::map<std::string, std::string> conditioning;

  bool contains(int row, const std::string& col) const {
    return cells.count({row, col}) > 0;
  }
  std::vector<std::string> masked_columns() const {
    std::set<std::string> s;
    for (const auto& [r, c] : cells) s.insert(c);
    return {s.begin(), s.end()};
  }
  std::vector<int> masked_rows(const std::string& col) const {
    std::vector<int> out;
    for (const auto& [r, c] : cells)
      if (c == col) out.push_back(r);
    std::sort(out.begin(), out.end());
    return out;
  }

  json to_json() const {
    json cells_j = json::array();
    for (const auto& [r, c] : cells) cells_j.push_back(json::array({r, c}));
    return json{{"mechanism", mechanism == Mechanism::MAR ? "MAR" : "native"},
                {"cells", cells_j},
                {"conditioning", conditioning}};
  }
  static MissingnessMask from_json(const json& j) {
    MissingnessMask m;
    m.mechanism = j.at("mechanism") == "MAR" ? Mechanism::MAR : Mechanism::Native;
    for (const auto& c : j.at("cells")) m.cells.insert({c.at(0).get<int>(), c.at(1).get<std::string>()});
    if (j.contains("conditioning"))
      m.conditioning = j.at("conditioning").get<std::map<std::string, std::string>>();
    return m;
  }

  void validate(const TableBundle& b) const {
    for (const auto& [r, c] : cells) {
      if (r < 0 || r >= b.n()) throw TableError(TableErrc::SchemaMismatch, "mask row out of range");
      b.column_index(c);
    }
  }
};

inline Cell parse_cell(const std::string& text, const ColumnSchema& col) {
  if (text.empty()) return Cell::absent();
  if (col.kind == ColumnKind::Continuous) {
    auto v = parse_number(text);
    if (!v || !std::isfinite(*v))
      throw TableError(TableErrc::BadValue,
                       "bad numeric value '" + text + "' in column " + col.name);
    return Cell::number(*v);
  }
  auto idx = col.category_index(text);
  if (!idx)
    throw TableError(TableErrc::UnknownCategory,
                     "UnknownCategory: '" + text + "' in column " + col.name);
  return Cell::label(*idx);
}

/// Load a bundle directory: `data.csv` (header row, empty field = absent)
/// plus `meta.json` {description, target, columns:[{name,kind,categories?,units?}]}.
inline TableBundle load_bundle(const std::filesystem::path& dir) {
  const auto meta_path = dir / "meta.json";
  const auto data_path = dir / "data.csv";
  std::ifstream meta_in(meta_path);
  if (!meta_in) throw TableError(TableErrc::MissingFile, "missing " + meta_path.string());
  json meta = json::parse(meta_in);

  TableBundle b;
  b.description = meta.at("description").get<std::string>();
  b.target = meta.at("target").get<std::string>();
  b.domain = meta.value("domain", std::string{});
  for (const auto& cj : meta.at("columns")) {
    ColumnSchema col;
    col.name = cj.at("name").get<std::string>();
    const std::string kind = cj.at("kind").get<std::string>();
    if (kind == "continuous") col.kind = ColumnKind::Continuous;
    else if (kind == "categorical") col.kind = ColumnKind::Categorical;
    else throw TableError(TableErrc::SchemaMismatch, "unknown column kind: " + kind);
    if (cj.contains("categories"))
      col.categories = cj.at("categories").get<std::vector<std::string>>();
    col.units = cj.value("units", std::string{});
    b.schema.push_back(std::move(col));
  }

  if (!std::filesystem::exists(data_path))
    throw TableError(TableErrc::MissingFile, "missing " + data_path.string());
  auto records = csv::parse_file(data_path.string());
  if (records.empty()) throw TableError(TableErrc::EmptyTable, "EmptyTable: no header row");
  const auto& header = records[0];
  if (static_cast<int>(header.size()) != b.p())
    throw TableError(TableErrc::SchemaMismatch, "csv header width differs from meta.json");
  for (int i = 0; i < b.p(); ++i) {
    if (header[i] != b.schema[i].name)
      throw TableError(TableErrc::SchemaMismatch,
                       "csv header '" + header[i] + "' != meta column '" + b.schema[i].name + "'");
  }
  if (records.size() == 1) throw TableError(TableErrc::EmptyTable, "EmptyTable: no data rows");
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (static_cast<int>(rec.size()) != b.p())
      throw TableError(TableErrc::SchemaMismatch, "csv row width differs from schema");
    std::vector<Cell> row;
    row.reserve(b.p());
    for (int c = 0; c < b.p(); ++c) row.push_back(parse_cell(rec[c], b.schema[c]));
    b.rows.push_back(std::move(row));
  }
  b.validate();
  return b;
}

inline void save_bundle(const TableBundle& b, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  json cols = json::array();
  for (const auto& col : b.schema) {
    json cj{{"name", col.name},
            {"kind", col.kind == ColumnKind::Continuous ? "continuous" : "categorical"}};
    if (col.kind == ColumnKind::Categorical) cj["categories"] = col.categories;
    if (!col.units.empty()) cj["units"] = col.units;
    cols.push_back(std::move(cj));
  }
  json meta{{"description", b.description}, {"target", b.target}, {"columns", cols}};
  if (!b.domain.empty()) meta["domain"] = b.domain;
  std::ofstream meta_out(dir / "meta.json");
  meta_out << meta.dump(2) << "\n";

  std::vector<std::vector<std::string>> records;
  std::vector<std::string> header;
  for (const auto& col : b.schema) header.push_back(col.name);
  records.push_back(std::move(header));
  for (int r = 0; r < b.n(); ++r) {
    std::vector<std::string> rec;
    for (int c = 0; c < b.p(); ++c)
      rec.push_back(b.rows[r][c].is_absent() ? std::string{} : b.cell_text(r, c));
    records.push_back(std::move(rec));
  }
  std::ofstream data_out(dir / "data.csv", std::ios::binary);
  data_out << csv::format(records);
}

/// Deterministic train/test partition. Train size is round(fraction*n) with
/// ties toward train, clamped so both sides stay nonempty.
inline Split split_train_test(const TableBundle& b, double fraction, std::uint64_t seed) {
  const int n = b.n();
  if (n < 2) throw TableError(TableErrc::BadSplit, "need at least 2 rows to split");
  if (!(fraction > 0.0 && fraction < 1.0))
    throw TableError(TableErrc::BadSplit, "fraction must be in (0, 1)");
  int train_size = static_cast<int>(std::llround(fraction * n));
  train_size = std::clamp(train_size, 1, n - 1);
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  rng::Engine eng(seed);
  rng::shuffle(idx, eng);
  Split s;
  s.train.assign(idx.begin(), idx.begin() + train_size);
  s.test.assign(idx.begin() + train_size, idx.end());
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

}  // namespace sibyl
