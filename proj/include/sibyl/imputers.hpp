#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sibyl/forest.hpp"
#include "sibyl/prompting.hpp"
#include "sibyl/table.hpp"

namespace sibyl {

enum class ImputeErrc { FullyMaskedColumn, NoCandidates, Degenerate };

struct ImputeError : std::runtime_error {
  ImputeErrc code;
  ImputeError(ImputeErrc c, const std::string& what) : std::runtime_error(what), code(c) {}
};

/// The output of one imputation method: a value for exactly the masked cells.
struct ImputedTable {
  TableBundle base;
  std::map<std::pair<int, int>, Cell> filled;  // (row, column index) -> value
  std::string method;
  struct Failure {
    int row;
    int col;
    std::string error;
  };
  std::vector<Failure> failures;  // cells where the LLM fallback fired

  /// Completed copy of the base table.
  TableBundle apply() const {
    TableBundle out = base;
    for (const auto& [rc, cell] : filled) out.rows[rc.first][rc.second] = cell;
    return out;
  }
};

namespace detail {

inline bool observed(const TableBundle& b, const MissingnessMask& mask, int row, int col) {
  return !b.rows[row][col].is_absent() && !mask.contains(row, b.schema[col].name);
}

inline std::vector<std::pair<int, int>> masked_cells_ordered(const TableBundle& b,
                                                             const MissingnessMask& mask) {
  std::vector<std::pair<int, int>> out;
  for (const auto& [r, name] : mask.cells) out.emplace_back(r, b.column_index(name));
  std::sort(out.begin(), out.end());
  return out;
}

struct TrainStats {
  double mean = 0.0;
  std::int32_t mode = -1;
  double min = std::numeric_limits<double>::infinity();
  double max = -std::numeric_limits<double>::infinity();
  int count = 0;
};

/// Per-column statistics over observed training cells only; the test
/// partition never leaks into them. Mode ties break lexicographically.
inline TrainStats train_stats(const TableBundle& b, const Split& split,
                              const MissingnessMask& mask, int col) {
  TrainStats st;
  if (b.schema[col].kind == ColumnKind::Continuous) {
    double sum = 0.0;
    for (int r : split.train) {
      if (!observed(b, mask, r, col)) continue;
      const double v = b.rows[r][col].num;
      sum += v;
      st.min = std::min(st.min, v);
      st.max = std::max(st.max, v);
      ++st.count;
    }
    if (st.count > 0) st.mean = sum / st.count;
  } else {
    std::map<std::int32_t, int> counts;
    for (int r : split.train) {
      if (!observed(b, mask, r, col)) continue;
      ++counts[b.rows[r][col].cat];
      ++st.count;
    }
    int best = -1;
    for (const auto& [cat, cnt] : counts) {
      if (cnt > best ||
          (cnt == best && b.schema[col].categories[cat] < b.schema[col].categories[st.mode])) {
        best = cnt;
        st.mode = cat;
      }
    }
  }
  return st;
}

inline Cell fallback_cell(const ColumnSchema& schema, const TrainStats& st) {
  return schema.kind == ColumnKind::Continuous ? Cell::number(st.mean) : Cell::label(st.mode);
}

}  // namespace detail

/// Mean (continuous) / mode (categorical) imputation from training-partition
/// statistics.
inline ImputedTable impute_mean_mode(const TableBundle& b, const Split& split,
                                     const MissingnessMask& mask) {
  ImputedTable out;
  out.base = b;
  out.method = "mean_mode";
  std::map<int, detail::TrainStats> stats;
  for (const auto& [r, c] : detail::masked_cells_ordered(b, mask)) {
    auto it = stats.find(c);
    if (it == stats.end()) {
      auto st = detail::train_stats(b, split, mask, c);
      if (st.count == 0)
        throw ImputeError(ImputeErrc::FullyMaskedColumn,
                          "no observed training values in column " + b.schema[c].name);
      it = stats.emplace(c, st).first;
    }
    out.filled[{r, c}] = detail::fallback_cell(b.schema[c], it->second);
  }
  return out;
}

/// k-NN imputation with a nan-aware mixed distance: squared differences of
/// min-max scaled continuous features plus 0/1 categorical mismatches,
/// averaged over the features observed in both rows. Rows sharing no
/// observed feature are excluded.
inline ImputedTable impute_knn(const TableBundle& b, const Split& split,
                               const MissingnessMask& mask, int k = 5) {
  if (k < 1) throw ImputeError(ImputeErrc::Degenerate, "k must be >= 1");
  ImputedTable out;
  out.base = b;
  out.method = "knn";

  std::vector<double> lo(b.p()), range(b.p());
  for (int c = 0; c < b.p(); ++c) {
    if (b.schema[c].kind != ColumnKind::Continuous) continue;
    const auto st = detail::train_stats(b, split, mask, c);
    lo[c] = st.min;
    range[c] = st.count > 0 ? st.max - st.min : 0.0;
  }
  auto scaled = [&](int r, int c) {
    const double v = b.rows[r][c].num;
    return range[c] > 0 ? (v - lo[c]) / range[c] : 0.0;
  };

  auto distance = [&](int r1, int r2, int skip_col) {
    double sq = 0.0;
    int common = 0;
    for (int c = 0; c < b.p(); ++c) {
      if (c == skip_col) continue;
      if (!detail::observed(b, mask, r1, c) || !detail::observed(b, mask, r2, c)) continue;
      ++common;
      if (b.schema[c].kind == ColumnKind::Continuous) {
        const double d = scaled(r1, c) - scaled(r2, c);
        sq += d * d;
      } else if (b.rows[r1][c].cat != b.rows[r2][c].cat) {
        sq += 1.0;
      }
    }
    if (common == 0) return std::numeric_limits<double>::infinity();
    return std::sqrt(sq / common);
  };

  for (const auto& [r, c] : detail::masked_cells_ordered(b, mask)) {
    std::vector<std::pair<double, int>> near;  // (distance, train row)
    for (int tr : split.train) {
      if (tr == r || !detail::observed(b, mask, tr, c)) continue;
      const double d = distance(r, tr, c);
      if (std::isfinite(d)) near.emplace_back(d, tr);
    }
    if (near.empty())
      throw ImputeError(ImputeErrc::NoCandidates,
                        "no usable neighbours for column " + b.schema[c].name);
    std::sort(near.begin(), near.end());
    const int take = std::min<int>(k, static_cast<int>(near.size()));
    std::vector<int> rows;
    for (int i = 0; i < take; ++i) rows.push_back(near[i].second);
    std::sort(rows.begin(), rows.end());

    if (b.schema[c].kind == ColumnKind::Continuous) {
      double sum = 0.0;
      for (int rr : rows) sum += b.rows[rr][c].num;
      out.filled[{r, c}] = Cell::number(sum / take);
    } else {
      std::map<std::int32_t, int> counts;
      for (int rr : rows) ++counts[b.rows[rr][c].cat];
      std::int32_t mode = -1;
      int best = -1;
      for (const auto& [cat, cnt] : counts) {
        if (cnt > best ||
            (cnt == best && b.schema[c].categories[cat] < b.schema[c].categories[mode])) {
          best = cnt;
          mode = cat;
        }
      }
      out.filled[{r, c}] = Cell::label(mode);
    }
  }
  return out;
}

namespace detail {

/// Feature matrix over all columns except `skip`, with current fills applied.
inline FeatureSet matrix_without(const TableBundle& b,
                                 const std::map<std::pair<int, int>, Cell>& fills,
                                 const std::vector<int>& rows, int skip,
                                 std::vector<int>& col_of_feature) {
  FeatureSet X;
  X.n_rows = static_cast<int>(rows.size());
  col_of_feature.clear();
  for (int c = 0; c < b.p(); ++c) {
    if (c == skip) continue;
    FeatureSet::Column col;
    col.categorical = b.schema[c].kind == ColumnKind::Categorical;
    col.n_categories = static_cast<int>(b.schema[c].categories.size());
    col.values.reserve(rows.size());
    for (int r : rows) {
      auto it = fills.find({r, c});
      const Cell& cell = it != fills.end() ? it->second : b.rows[r][c];
      col.values.push_back(cell.kind == CellKind::Number ? cell.num
                                                         : static_cast<double>(cell.cat));
    }
    X.cols.push_back(std::move(col));
    col_of_feature.push_back(c);
  }
  return X;
}

}  // namespace detail

struct MissForestConfig {
  int n_trees = 100;
  int max_iter = 10;
  std::uint64_t seed = 0;
};

/// Iterative random-forest imputation: initialize with mean/mode, then visit
/// masked columns in ascending-missingness order, refitting a forest on the
/// observed training rows and re-predicting the masked cells, until the
/// change metric (normalized continuous change + categorical disagreement
/// rate) increases. Returns the previous iteration's values on the upturn.
inline ImputedTable impute_missforest(const TableBundle& b, const Split& split,
                                      const MissingnessMask& mask,
                                      const MissForestConfig& cfg = {}) {
  if (b.p() < 2)
    throw ImputeError(ImputeErrc::Degenerate, "iterative imputation needs at least 2 columns");
  ImputedTable out = impute_mean_mode(b, split, mask);
  out.method = "missforest";
  if (cfg.max_iter == 0) return out;

  std::map<int, std::vector<int>> masked_by_col;
  for (const auto& [r, c] : detail::masked_cells_ordered(b, mask)) masked_by_col[c].push_back(r);
  std::vector<int> col_order;
  for (const auto& [c, rows] : masked_by_col) col_order.push_back(c);
  std::sort(col_order.begin(), col_order.end(), [&](int a, int bidx) {
    const auto na = masked_by_col[a].size(), nb = masked_by_col[
        bidx].size();
    if (na != nb) return na < nb;
    return a < bidx;
  });

  auto fills = out.filled;
  double prev_delta = std::numeric_limits<double>::infinity();
  for (int iter = 1; iter <= cfg.max_iter; ++iter) {
    const auto before = fills;
    for (int c : col_order) {
      std::vector<int> fit_rows;
      for (int r : split.train)
        if (detail::observed(b, mask, r, c)) fit_rows.push_back(r);
      if (fit_rows.empty()) continue;

      std::vector<int> cols_map;
      const FeatureSet X = detail::matrix_without(b, fills, fit_rows, c, cols_map);
      ForestConfig fc;
      fc.n_trees = cfg.n_trees;
      fc.seed = rng::derive_seed(cfg.seed, static_cast<std::uint64_t>(iter) * 1024 + c);

      const auto& masked_rows = masked_by_col[c];
      std::vector<int> dummy;
      const FeatureSet Xq = detail::matrix_without(b, fills, masked_rows, c, dummy);
      if (b.schema[c].kind == ColumnKind::Continuous) {
        std::vector<double> y;
        for (int r : fit_rows) y.push_back(b.rows[r][c].num);
        RandomForestRegressor rf;
        rf.fit(X, y, fc);
        for (std::size_t i = 0; i < masked_rows.size(); ++i)
          fills[{masked_rows[i], c}] = Cell::number(rf.predict(Xq.row(static_cast<int>(i))));
      } else {
        std::vector<int> y;
        for (int r : fit_rows) y.push_back(b.rows[r][c].cat);
        RandomForestClassifier rf;
        rf.fit(X, y, static_cast<int>(b.schema[c].categories.size()), fc);
        for (std::size_t i = 0; i < masked_rows.size(); ++i)
          fills[{masked_rows[i], c}] =
              Cell::label(rf.predict(Xq.row(static_cast<int>(i))));
      }
    }

    double num_change = 0.0, num_scale = 0.0;
    int cat_changed = 0, cat_total = 0;
    for (const auto& [rc, cell] : fills) {
      const auto& old = before.at(rc);
      if (cell.kind == CellKind::Number) {
        num_change += (cell.num - old.num) * (cell.num - old.num);
        num_scale += cell.num * cell.num;
      } else {
        ++cat_total;
        if (cell.cat != old.cat) ++cat_changed;
      }
    }
    const double delta = (num_scale > 0 ? num_change / num_scale : 0.0) +
                         (cat_total > 0 ? double(cat_changed) / cat_total : 0.0);
    if (delta > prev_delta) {
      fills = before;  // keep the last improving iteration
      break;
    }
    prev_delta = delta;
    if (delta == 0.0) break;
  }
  out.filled = std::move(fills);
  return out;
}

struct LlmImputeOptions {
  std::string model;
  std::string system_suffix;
  /// Observer for every constructed prompt (row, column name, prompts,
  /// attempt index); used by --dump-prompts.
  std::function<void(int, const std::string&, const PromptPair&, int)> on_prompt;
};

/// Thrown when the gateway fails hard mid-run; carries the partial table so
/// the caller can persist what finished.
struct LlmImputeAborted : std::runtime_error {
  ImputedTable partial;
  LlmImputeAborted(const std::string& what, ImputedTable p)
      : std::runtime_error(what), partial(std::move(p)) {}
};

/// The LLM imputer: serialize the row, ask the expert persona for the masked
/// value, parse the JSON reply. One call per masked cell plus at most one
/// retry; a second parse failure falls back to mean/mode and is recorded.
inline ImputedTable impute_llm(const TableBundle& b, const Split& split,
                               const MissingnessMask& mask, Gateway& gateway,
                               const ExpertProfile& profile, const LlmImputeOptions& opts) {
  ImputedTable out;
  out.base = b;
  out.method = "llm";
  std::map<int, detail::TrainStats> stats;
  auto fallback_for = [&](int c) {
    auto it = stats.find(c);
    if (it == stats.end()) {
      auto st = detail::train_stats(b, split, mask, c);
      if (st.count == 0)
        throw ImputeError(ImputeErrc::FullyMaskedColumn,
                          "no observed training values in column " + b.schema[c].name);
      it = stats.emplace(c, st).first;
    }
    return detail::fallback_cell(b.schema[c], it->second);
  };

  for (const auto& [r, c] : detail::masked_cells_ordered(b, mask)) {
    const std::string& col_name = b.schema[c].name;
    const std::string ds = serialize_row(b, r, col_name, mask);
    PromptPair prompts = build_ts_prompt(profile, ds, opts.system_suffix);

    std::string last_error;
    bool filled = false;
    for (int attempt = 0; attempt < 2 && !filled; ++attempt) {
      if (attempt == 1) prompts.user += std::string("\n\n") + std::string(tpl::kJsonRetrySuffix);
      if (opts.on_prompt) opts.on_prompt(r, col_name, prompts, attempt);
      ChatExchange ex;
      try {
        ex = gateway.complete(opts.model, prompts.system, prompts.user);
      } catch (const GatewayError& e) {
        throw LlmImputeAborted(std::string("gateway failure at cell (") + std::to_string(r) +
                                   ", " + col_name + "): " + e.what(),
                               std::move(out));
      }
      const auto parsed = parse_imputation_response(ex.response, b.schema[c]);
      if (parsed.ok()) {
        out.filled[{r, c}] = *parsed.value;
        filled = true;
      } else {
        last_error = std::string(to_string(parsed.error)) + ": " + parsed.detail;
      }
    }
    if (!filled) {
      out.filled[{r, c}] = fallback_for(c);
      out.failures.push_back({r, c, last_error});
    }
  }
  return out;
}

}  // namespace sibyl
