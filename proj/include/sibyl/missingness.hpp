#pragma once

#include <algorithm>
#include <stdexcept>
#include <string>
#include <vector>

#include "sibyl/table.hpp"

namespace sibyl {

namespace detail {

/// Sort keys for percentile ranking of a conditioning column: numbers by
/// value, labels by category index, absent last; ties broken by row index.
inline std::vector<int> rank_by_column(const TableBundle& b, const std::vector<int>& rows,
                                       int col) {
  std::vector<int> order = rows;
  auto key = [&](int r) -> double {
    const Cell& c = b.rows[r][col];
    if (c.kind == CellKind::Number) return c.num;
    if (c.kind == CellKind::Label) return static_cast<double>(c.cat);
    return std::numeric_limits<double>::infinity();
  };
  std::stable_sort(order.begin(), order.end(), [&](int a, int bb) {
    const double ka = key(a), kb = key(bb);
    if (ka != kb) return ka < kb;
    return a < bb;
  });
  return order;
}

}  // namespace detail

/// Inject MAR missingness: min(p-1, 3) non-target columns get masked; for
/// each, rows whose conditioning-column values fall in a seeded contiguous
/// percentile window are hidden, independently within train and test. Mask
/// membership depends only on observed conditioning values, never on the
/// masked values themselves.
inline MissingnessMask inject_mar(const TableBundle& b, const Split& split, int n_train_missing,
                                  int n_test_missing, std::uint64_t seed) {
  if (b.p() < 2)
    throw TableError(TableErrc::SchemaMismatch, "inject_mar needs at least 2 columns");
  if (n_train_missing > static_cast<int>(split.train.size()))
    throw TableError(TableErrc::BadSplit, "n_train_missing exceeds train partition");
  if (n_test_missing > static_cast<int>(split.test.size()))
    throw TableError(TableErrc::BadSplit, "n_test_missing exceeds test partition");

  const int ti = b.target_index();
  std::vector<int> candidates;
  for (int c = 0; c < b.p(); ++c)
    if (c != ti) candidates.push_back(c);

  rng::Engine eng(rng::derive_seed(seed, 0x6d6172));  // column/window stream
  const int n_masked = std::min(static_cast<int>(candidates.size()), 3);
  std::vector<int> masked_cols;
  {
    auto picks = rng::sample_without_replacement(eng, static_cast<int>(candidates.size()), n_masked);
    for (int i : picks) masked_cols.push_back(candidates[i]);
    std::sort(masked_cols.begin(), masked_cols.end());
  }

  // Conditioning pool: non-masked, non-target columns, consumed without
  // replacement; falls back to the target column (never masked, always
  // observed) when the pool runs dry.
  std::vector<int> cond_pool;
  for (int c : candidates)
    if (std::find(masked_cols.begin(), masked_cols.end(), c) == masked_cols.end())
      cond_pool.push_back(c);

  MissingnessMask mask;
  mask.mechanism = Mechanism::MAR;
  for (int col : masked_cols) {
    int cond;
    if (!cond_pool.empty()) {
      const std::size_t j = rng::below(eng, cond_pool.size());
      cond = cond_pool[j];
      cond_pool.erase(cond_pool.begin() + j);
    } else {
      cond = ti;
    }
    mask.conditioning[b.schema[col].name] = b.schema[cond].name;

    for (const auto* part : {&split.train, &split.test}) {
      const int want = (part == &split.train) ? n_train_missing : n_test_missing;
      if (want == 0) continue;
      const auto order = detail::rank_by_column(b, *part, cond);
      const int max_start = static_cast<int>(order.size()) - want;
      const int start = max_start > 0 ? static_cast<int>(rng::below(eng, max_start + 1)) : 0;
      for (int i = start; i < start + want; ++i)
        mask.cells.insert({order[i], b.schema[col].name});
    }
  }
  return mask;
}

/// Constructive MAR check: the masked rows of every column must occupy one
/// contiguous run of the conditioning column's percentile order, separately
/// within each partition. Returns false if any column fails.
inline bool mask_is_percentile_window(const TableBundle& b, const Split& split,
                                      const MissingnessMask& mask) {
  for (const auto& col_name : mask.masked_columns()) {
    const auto it = mask.conditioning.find(col_name);
    if (it == mask.conditioning.end()) return false;
    const int cond = b.column_index(it->second);
    for (const auto* part : {&split.train, &split.test}) {
      const auto order = detail::rank_by_column(b, *part, cond);
      std::vector<bool> hit;
      hit.reserve(order.size());
      for (int r : order) hit.push_back(mask.contains(r, col_name));
      // exactly one contiguous block of true values (or none)
      int transitions = 0;
      for (std::size_t i = 1; i < hit.size(); ++i)
        if (hit[i] != hit[i - 1]) ++transitions;
      const bool any = std::find(hit.begin(), hit.end(), true) != hit.end();
      if (any && transitions > 2) return false;
    }
  }
  return true;
}

}  // namespace sibyl
