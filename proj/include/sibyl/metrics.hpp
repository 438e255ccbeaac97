#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sibyl/forest.hpp"
#include "sibyl/table.hpp"

namespace sibyl {

struct MetricError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline double rmse(const std::vector<double>& original, const std::vector<double>& imputed) {
  if (original.empty()) throw MetricError("rmse: empty input");
  if (original.size() != imputed.size()) throw MetricError("rmse: length mismatch");
  double ss = 0.0;
  for (std::size_t i = 0; i < original.size(); ++i) {
    const double d = original[i] - imputed[i];
    ss += d * d;
  }
  return std::sqrt(ss / original.size());
}

/// RMSE normalized by the range of the original values. A zero range has no
/// defined scale: the result is reported as absent and the record is dropped,
/// never coerced to 0 or infinity.
inline std::optional<double> nrmse(const std::vector<double>& original,
                                   const std::vector<double>& imputed) {
  const double e = rmse(original, imputed);
  const auto [lo, hi] = std::minmax_element(original.begin(), original.end());
  const double range = *hi - *lo;
  if (range == 0.0) return std::nullopt;
  return e / range;
}

/// F1 for imputed labels. Two distinct labels across both lists: standard
/// binary F1 with the lexicographically greater label as the positive class.
/// More: macro-average of per-class F1, skipping classes absent from both.
inline double f1(const std::vector<std::string>& original,
                 const std::vector<std::string>& imputed) {
  if (original.empty()) throw MetricError("f1: empty input");
  if (original.size() != imputed.size()) throw MetricError("f1: length mismatch");
  std::set<std::string> labels(original.begin(), original.end());
  labels.insert(imputed.begin(), imputed.end());

  auto class_f1 = [&](const std::string& positive) {
    int tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < original.size(); ++i) {
      const bool truth = original[i] == positive;
      const bool pred = imputed[i] == positive;
      if (truth && pred) ++tp;
      else if (!truth && pred) ++fp;
      else if (truth && !pred) ++fn;
    }
    if (tp == 0 && fp == 0 && fn == 0) return std::optional<double>{};  // class absent
    const double precision = tp + fp > 0 ? double(tp) / (tp + fp) : 0.0;
    const double recall = tp + fn > 0 ? double(tp) / (tp + fn) : 0.0;
    if (precision + recall == 0.0) return std::optional<double>{0.0};
    return std::optional<double>{2.0 * precision * recall / (precision + recall)};
  };

  if (labels.size() == 2) {
    const std::string positive = *labels.rbegin();
    return class_f1(positive).value_or(0.0);
  }
  double sum = 0.0;
  int counted = 0;
  for (const auto& label : labels) {
    if (auto v = class_f1(label)) {
      sum += *v;
      ++counted;
    }
  }
  return counted > 0 ? sum / counted : 0.0;
}

/// Relative change of a downstream prediction score against the
/// incomplete-data baseline.
inline double downstream_improvement(double score_imputed, double score_incomplete) {
  if (score_incomplete <= 0.0)
    throw MetricError("downstream_improvement: baseline score must be positive");
  return (score_imputed - score_incomplete) / score_incomplete;
}

/// One metric observation; the row type of every emitted report.
struct EvalRecord {
  std::string dataset;
  std::string domain;
  std::string method;
  std::string metric;
  std::string column;  // empty for dataset-level metrics
  double value = 0.0;

  nlohmann::json to_json() const {
    nlohmann::json j{{"dataset", dataset}, {"domain", domain}, {"method", method},
                     {"metric", metric},   {"value", value}};
    if (!column.empty()) j["column"] = column;
    return j;
  }
  static EvalRecord from_json(const nlohmann::json& j) {
    EvalRecord r;
    r.dataset = j.at("dataset");
    r.domain = j.value("domain", "");
    r.method = j.at("method");
    r.metric = j.at("metric");
    r.column = j.value("column", "");
    r.value = j.at("value");
    return r;
  }
};

/// Feature matrix for the downstream classifier: every non-target column,
/// with an optional extra "missing" code on categorical columns so sentinel
/// fills stay representable.
inline FeatureSet downstream_features(const TableBundle& b, const std::vector<int>& rows,
                                      bool reserve_missing_code = false) {
  FeatureSet X;
  X.n_rows = static_cast<int>(rows.size());
  const int ti = b.target_index();
  for (int c = 0; c < b.p(); ++c) {
    if (c == ti) continue;
    FeatureSet::Column col;
    col.categorical = b.schema[c].kind == ColumnKind::Categorical;
    col.n_categories =
        static_cast<int>(b.schema[c].categories.size()) + (reserve_missing_code ? 1 : 0);
    for (int r : rows) {
      const Cell& cell = b.rows[r][c];
      if (cell.is_absent())
        throw MetricError("downstream_features: absent cell in " + b.schema[c].name +
                          "; complete the table first");
      col.values.push_back(cell.kind == CellKind::Number ? cell.num
                                                         : static_cast<double>(cell.cat));
    }
    X.cols.push_back(std::move(col));
  }
  return X;
}

/// Random forest classifier on the bundle's target column; deterministic for
/// a fixed seed.
inline RandomForestClassifier train_rf_classifier(const TableBundle& b,
                                                  const std::vector<int>& train_rows,
                                                  const ForestConfig& cfg = {},
                                                  bool reserve_missing_code = false) {
  const int ti = b.target_index();
  std::vector<int> y;
  std::set<int> distinct;
  for (int r : train_rows) {
    y.push_back(b.rows[r][ti].cat);
    distinct.insert(b.rows[r][ti].cat);
  }
  if (distinct.size() < 2)
    throw MetricError("train_rf_classifier: training target has a single class");
  const FeatureSet X = downstream_features(b, train_rows, reserve_missing_code);
  RandomForestClassifier rf;
  rf.fit(X, y, static_cast<int>(b.schema[ti].categories.size()), cfg);
  return rf;
}

inline double classifier_accuracy(const RandomForestClassifier& rf, const TableBundle& b,
                                  const std::vector<int>& rows,
                                  bool reserve_missing_code = false) {
  const FeatureSet X = downstream_features(b, rows, reserve_missing_code);
  const int ti = b.target_index();
  int hits = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rf.predict(X.row(static_cast<int>(i))) == b.rows[rows[i]][ti].cat) ++hits;
  }
  return rows.empty() ? 0.0 : double(hits) / rows.size();
}

}  // namespace sibyl
