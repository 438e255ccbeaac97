#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <thread>
#include <vector>

#include "sibyl/rng.hpp"

namespace sibyl {

/// Feature matrix for tree learners: continuous columns hold raw doubles,
/// categorical columns hold category codes stored as doubles. All cells must
/// be present; imputation/sentinel filling happens before matrix assembly.
struct FeatureSet {
  struct Column {
    bool categorical = false;
    int n_categories = 0;
    std::vector<double> values;
  };
  std::vector<Column> cols;
  int n_rows = 0;

  std::vector<double> row(int r) const {
    std::vector<double> out(cols.size());
    for (std::size_t c = 0; c < cols.size(); ++c) out[c] = cols[c].values[r];
    return out;
  }
};

struct ForestConfig {
  int n_trees = 100;
  int min_leaf = 1;
  std::uint64_t seed = 0;
  int n_threads = 1;  // tree builds are independent; output is schedule-invariant
};

namespace detail {

/// One tree node: internal nodes carry either a numeric threshold
/// (go left when value <= threshold) or a category subset (go left when the
/// code is in the subset); leaves carry a mean value and a class histogram.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  std::vector<std::int32_t> cats;
  int left = -1;
  int right = -1;
  double leaf_mean = 0.0;
  int leaf_class = -1;
  bool is_leaf() const { return feature < 0; }
};

struct DecisionTree {
  std::vector<TreeNode> nodes;

  int descend(const std::vector<double>& x) const {
    int i = 0;
    while (!nodes[i].is_leaf()) {
      const auto& nd = nodes[i];
      bool go_left;
      if (nd.cats.empty()) {
        go_left = x[nd.feature] <= nd.threshold;
      } else {
        const auto code = static_cast<std::int32_t>(x[nd.feature]);
        go_left = std::find(nd.cats.begin(), nd.cats.end(), code) != nd.cats.end();
      }
      i = go_left ? nd.left : nd.right;
    }
    return i;
  }
  double predict_value(const std::vector<double>& x) const { return nodes[descend(x)].leaf_mean; }
  int predict_class(const std::vector<double>& x) const { return nodes[descend(x)].leaf_class; }
};

struct SplitChoice {
  double gain = 0.0;
  int feature = -1;
  double threshold = 0.0;
  std::vector<std::int32_t> cats;
  bool valid() const { return feature >= 0; }
};

/// Shared tree builder for classification (Gini) and regression (variance
/// reduction). Feature subsampling follows the usual convention: a feature
/// only counts against mtry when it offers a valid split, so a tree keeps
/// looking past constant features rather than going leaf early.
class TreeBuilder {
 public:
  TreeBuilder(const FeatureSet& X, const std::vector<double>& y_reg,
              const std::vector<int>& y_cls, int n_classes, int mtry, int min_leaf,
              rng::Engine& eng)
      : X_(X), y_reg_(y_reg), y_cls_(y_cls), n_classes_(n_classes), mtry_(mtry),
        min_leaf_(min_leaf), eng_(eng) {}

  DecisionTree build(std::vector<int> rows) {
    tree_.nodes.clear();
    grow(std::move(rows));
    return std::move(tree_);
  }

 private:
  bool regression() const { return n_classes_ == 0; }

  int make_leaf(const std::vector<int>& rows) {
    TreeNode node;
    if (regression()) {
      double s = 0.0;
      for (int r : rows) s += y_reg_[r];
      node.leaf_mean = s / rows.size();
    } else {
      std::vector<int> counts(n_classes_, 0);
      for (int r : rows) ++counts[y_cls_[r]];
      node.leaf_class =
          static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
      double s = 0.0;
      for (int r : rows) s += y_cls_[r];
      node.leaf_mean = s / rows.size();
    }
    tree_.nodes.push_back(std::move(node));
    return static_cast<int>(tree_.nodes.size()) - 1;
  }

  bool pure(const std::vector<int>& rows) const {
    if (regression()) {
      for (std::size_t i = 1; i < rows.size(); ++i)
        if (y_reg_[rows[i]] != y_reg_[rows[0]]) return false;
    } else {
      for (std::size_t i = 1; i < rows.size(); ++i)
        if (y_cls_[rows[i]] != y_cls_[rows[0]]) return false;
    }
    return true;
  }

  double node_impurity(const std::vector<int>& rows) const {
    if (regression()) {
      double s = 0.0, ss = 0.0;
      for (int r : rows) {
        s += y_reg_[r];
        ss += y_reg_[r] * y_reg_[r];
      }
      const double m = s / rows.size();
      return ss / rows.size() - m * m;
    }
    std::vector<int> counts(n_classes_, 0);
    for (int r : rows) ++counts[r >= 0 ? y_cls_[r] : 0];
    double g = 1.0;
    for (int c : counts) {
      const double p = double(c) / rows.size();
      g -= p * p;
    }
    return g;
  }

  SplitChoice best_numeric_split(const std::vector<int>& rows, int f) const {
    std::vector<int> order = rows;
    const auto& v = X_.cols[f].values;
    std::sort(order.begin(), order.end(), [&](int a, int b) { return v[a] < v[b]; });
    const int n = static_cast<int>(order.size());
    SplitChoice best;
    if (regression()) {
      double total = 0.0;
      for (int r : order) total += y_reg_[r];
      double left = 0.0;
      for (int i = 0; i < n - 1; ++i) {
        left += y_reg_[order[i]];
        if (v[order[i]] == v[order[i + 1]]) continue;
        const int nl = i + 1, nr = n - nl;
        if (nl < min_leaf_ || nr < min_leaf_) continue;
        const double right = total - left;
        // variance reduction up to constants: maximize sum of (sum^2 / count)
        const double score = left * left / nl + right * right / nr - total * total / n;
        if (!best.valid() || score > best.gain) {
          best.gain = score;
          best.feature = f;
          best.threshold = (v[order[i]] + v[order[i + 1]]) / 2.0;
        }
      }
    } else {
      std::vector<int> left_counts(n_classes_, 0), total_counts(n_classes_, 0);
      for (int r : order) ++total_counts[y_cls_[r]];
      auto gini_term = [](const std::vector<int>& counts, int n_side) {
        double s = 0.0;
        for (int c : counts) s += double(c) * c;
        return s / n_side;  // n_side * (1 - gini)
      };
      for (int i = 0; i < n - 1; ++i) {
        ++left_counts[y_cls_[order[i]]];
        if (v[order[i]] == v[order[i + 1]]) continue;
        const int nl = i + 1, nr = n - nl;
        if (nl < min_leaf_ || nr < min_leaf_) continue;
        std::vector<int> right_counts(n_classes_);
        for (int c = 0; c < n_classes_; ++c) right_counts[c] = total_counts[c] - left_counts[c];
        const double score =
            gini_term(left_counts, nl) + gini_term(right_counts, nr) - gini_term(total_counts, n);
        if (!best.valid() || score > best.gain) {
          best.gain = score;
          best.feature = f;
          best.threshold = (v[order[i]] + v[order[i + 1]]) / 2.0;
        }
      }
    }
    return best;
  }

  SplitChoice best_categorical_split(const std::vector<int>& rows, int f) const {
    const auto& v = X_.cols[f].values;
    const int n = static_cast<int>(rows.size());
    SplitChoice best;
    std::vector<std::int32_t> present;
    for (int r : rows) {
      const auto code = static_cast<std::int32_t>(v[r]);
      if (std::find(present.begin(), present.end(), code) == present.end()) present.push_back(code);
    }
    if (present.size() < 2) return best;
    std::sort(present.begin(), present.end());
    for (std::int32_t code : present) {
      std::vector<int> in, out;
      for (int r : rows) (static_cast<std::int32_t>(v[r]) == code ? in : out).push_back(r);
      const int nl = static_cast<int>(in.size()), nr = n - nl;
      if (nl < min_leaf_ || nr < min_leaf_) continue;
      double score;
      if (regression()) {
        double sl = 0.0, sr = 0.0, st = 0.0;
        for (int r : in) sl += y_reg_[r];
        for (int r : out) sr += y_reg_[r];
        st = sl + sr;
        score = sl * sl / nl + sr * sr / nr - st * st / n;
      } else {
        std::vector<int> cl(n_classes_, 0), cr(n_classes_, 0), ct(n_classes_, 0);
        for (int r : in) ++cl[y_cls_[r]];
        for (int r : out) ++cr[y_cls_[r]];
        for (int c = 0; c < n_classes_; ++c) ct[c] = cl[c] + cr[c];
        auto term = [](const std::vector<int>& counts, int n_side) {
          double s = 0.0;
          for (int c : counts) s += double(c) * c;
          return s / n_side;
        };
        score = term(cl, nl) + term(cr, nr) - term(ct, n);
      }
      if (!best.valid() || score > best.gain) {
        best.gain = score;
        best.feature = f;
        best.cats = {code};
      }
    }
    return best;
  }

  int grow(std::vector<int> rows) {
    if (static_cast<int>(rows.size()) < 2 * min_leaf_ || rows.size() < 2 || pure(rows))
      return make_leaf(rows);

    std::vector<int> feats(X_.cols.size());
    std::iota(feats.begin(), feats.end(), 0);
    rng::shuffle(feats, eng_);

    SplitChoice best;
    int examined = 0;
    for (int f : feats) {
      if (examined >= mtry_ && best.valid()) break;
      SplitChoice cand = X_.cols[f].categorical ? best_categorical_split(rows, f)
                                                : best_numeric_split(rows, f);
      if (!cand.valid() || cand.gain <= 1e-12) continue;
      ++examined;
      if (!best.valid() || cand.gain > best.gain) best = cand;
    }
    if (!best.valid()) return make_leaf(rows);

    std::vector<int> left_rows, right_rows;
    const auto& v = X_.cols[best.feature].values;
    for (int r : rows) {
      bool go_left;
      if (best.cats.empty()) go_left = v[r] <= best.threshold;
      else
        go_left = std::find(best.cats.begin(), best.cats.end(),
                            static_cast<std::int32_t>(v[r])) != best.cats.end();
      (go_left ? left_rows : right_rows).push_back(r);
    }
    if (left_rows.empty() || right_rows.empty()) return make_leaf(rows);

    TreeNode node;
    node.feature = best.feature;
    node.threshold = best.threshold;
    node.cats = best.cats;
    tree_.nodes.push_back(std::move(node));
    const int self = static_cast<int>(tree_.nodes.size()) - 1;
    const int li = grow(std::move(left_rows));
    const int ri = grow(std::move(right_rows));
    tree_.nodes[self].left = li;
    tree_.nodes[self].right = ri;
    return self;
  }

  const FeatureSet& X_;
  const std::vector<double>& y_reg_;
  const std::vector<int>& y_cls_;
  int n_classes_;
  int mtry_;
  int min_leaf_;
  rng::Engine& eng_;
  DecisionTree tree_;
};

inline std::vector<DecisionTree> build_forest(const FeatureSet& X, const std::vector<double>& y_reg,
                                              const std::vector<int>& y_cls, int n_classes,
                                              int mtry, const ForestConfig& cfg) {
  std::vector<DecisionTree> trees(cfg.n_trees);
  std::vector<std::uint64_t> seeds(cfg.n_trees);
  for (int t = 0; t < cfg.n_trees; ++t) seeds[t] = rng::derive_seed(cfg.seed, t);

  auto build_one = [&](int t) {
    rng::Engine eng(seeds[t]);
    std::vector<int> bootstrap(X.n_rows);
    for (int i = 0; i < X.n_rows; ++i)
      bootstrap[i] = static_cast<int>(rng::below(eng, X.n_rows));
    std::sort(bootstrap.begin(), bootstrap.end());
    TreeBuilder builder(X, y_reg, y_cls, n_classes, mtry, cfg.min_leaf, eng);
    trees[t] = builder.build(std::move(bootstrap));
  };

  const int n_threads = std::max(1, cfg.n_threads);
  if (n_threads == 1) {
    for (int t = 0; t < cfg.n_trees; ++t) build_one(t);
  } else {
    // static partitioning: each tree's RNG is self-contained, so the result
    // does not depend on which thread builds it
    std::vector<std::thread> workers;
    for (int w = 0; w < n_threads; ++w) {
      workers.emplace_back([&, w] {
        for (int t = w; t < cfg.n_trees; t += n_threads) build_one(t);
      });
    }
    for (auto& th : workers) th.join();
  }
  return trees;
}

}  // namespace detail

/// Random forest regressor: variance-reduction splits, mtry = max(1, p/3),
/// bootstrap sampling, prediction = mean over trees.
class RandomForestRegressor {
 public:
  void fit(const FeatureSet& X, const std::vector<double>& y, const ForestConfig& cfg = {}) {
    const int mtry = std::max(1, static_cast<int>(X.cols.size()) / 3);
    static const std::vector<int> no_cls;
    trees_ = detail::build_forest(X, y, no_cls, 0, mtry, cfg);
  }
  double predict(const std::vector<double>& x) const {
    double s = 0.0;
    for (const auto& t : trees_) s += t.predict_value(x);
    return s / trees_.size();
  }

 private:
  std::vector<detail::DecisionTree> trees_;
};

/// Random forest classifier: Gini splits, mtry = max(1, floor(sqrt(p))),
/// majority vote with ties going to the smallest class index.
class RandomForestClassifier {
 public:
  void fit(const FeatureSet& X, const std::vector<int>& y, int n_classes,
           const ForestConfig& cfg = {}) {
    n_classes_ = n_classes;
    const int mtry =
        std::max(1, static_cast<int>(std::sqrt(static_cast<double>(X.cols.size()))));
    static const std::vector<double> no_reg;
    trees_ = detail::build_forest(X, no_reg, y, n_classes, mtry, cfg);
  }
  int predict(const std::vector<double>& x) const {
    std::vector<int> votes(n_classes_, 0);
    for (const auto& t : trees_) ++votes[t.predict_class(x)];
    return static_cast<int>(std::max_element(votes.begin(), votes.end()) - votes.begin());
  }

 private:
  std::vector<detail::DecisionTree> trees_;
  int n_classes_ = 0;
};

}  // namespace sibyl
