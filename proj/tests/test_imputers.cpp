#include <catch2/catch_amalgamated.hpp>

#include "sibyl/imputers.hpp"
#include "sibyl/metrics.hpp"
#include "sibyl/missingness.hpp"
#include "test_support.hpp"

using namespace sibyl;

namespace {

struct Scenario {
  TableBundle bundle;
  Split split;
  MissingnessMask mask;
};

/// Continuous column "X" plus categorical "C" and target; X masked in the
/// given rows.
Scenario masked_x(int n, const std::vector<int>& masked_rows,
                  const std::vector<double>& x_values) {
  Scenario s;
  s.bundle.description = "imputer scenario";
  s.bundle.target = "T";
  s.bundle.schema = {{"X", ColumnKind::Continuous, {}, ""},
                     {"C", ColumnKind::Categorical, {"M", "F"}, ""},
                     {"T", ColumnKind::Categorical, {"a", "b"}, ""}};
  for (int i = 0; i < n; ++i) {
    s.bundle.rows.push_back({Cell::number(x_values[i]), Cell::label(i % 2),
                             Cell::label((i / 2) % 2)});
  }
  s.bundle.validate();
  for (int i = 0; i < n; ++i) s.split.train.push_back(i);
  s.mask.mechanism = Mechanism::MAR;
  for (int r : masked_rows) s.mask.cells.insert({r, "X"});
  return s;
}

}  // namespace

TEST_CASE("mean imputation uses the observed training mean") {
  auto s = masked_x(4, {3}, {1, 2, 3, 999});
  const auto t = impute_mean_mode(s.bundle, s.split, s.mask);
  CHECK(t.filled.at({3, 0}) == Cell::number(2.0));
  CHECK(t.filled.size() == 1);
}

TEST_CASE("mode imputation picks the most frequent label, ties lexicographic") {
  TableBundle b;
  b.description = "mode";
  b.target = "T";
  b.schema = {{"C", ColumnKind::Categorical, {"M", "F"}, ""},
              {"T", ColumnKind::Categorical, {"a", "b"}, ""}};
  b.rows = {{Cell::label(0), Cell::label(0)},
            {Cell::label(0), Cell::label(1)},
            {Cell::label(1), Cell::label(0)},
            {Cell::label(1), Cell::label(1)}};
  Split split{{0, 1, 2, 3}, {}};
  MissingnessMask mask;
  mask.cells = {{3, "C"}};

  // observed train: M, M, F -> M
  const auto t = impute_mean_mode(b, split, mask);
  CHECK(b.schema[0].categories[t.filled.at({3, 0}).cat] == "M");

  // tie between M and F -> lexicographically smaller "F"
  MissingnessMask tie_mask;
  tie_mask.cells = {{3, "C"}, {1, "C"}};  // observed: M, F
  const auto t2 = impute_mean_mode(b, split, tie_mask);
  CHECK(b.schema[0].categories[t2.filled.at({3, 0}).cat] == "F");
}

TEST_CASE("fully masked columns are an error") {
  auto s = masked_x(3, {0, 1, 2}, {1, 2, 3});
  CHECK_THROWS_AS(impute_mean_mode(s.bundle, s.split, s.mask), ImputeError);
}

TEST_CASE("mean/mode imputation is idempotent") {
  auto s = masked_x(6, {1, 4}, {1, -5, 3, 9, -5, 2});
  const auto t = impute_mean_mode(s.bundle, s.split, s.mask);
  const auto completed = t.apply();
  const auto t2 = impute_mean_mode(completed, s.split, s.mask);
  CHECK(t2.apply() == completed);
}

TEST_CASE("knn with one candidate copies its value") {
  auto s = masked_x(2, {0}, {42.0, 9.0});
  const auto t = impute_knn(s.bundle, s.split, s.mask, 1);
  CHECK(t.filled.at({0, 0}) == Cell::number(9.0));
}

TEST_CASE("knn matches brute-force distance enumeration on a 4-row table") {
  // rows: X masked on row 0; neighbours at varying distance via C and T
  TableBundle b;
  b.description = "knn brute force";
  b.target = "T";
  b.schema = {{"X", ColumnKind::Continuous, {}, ""},
              {"Y", ColumnKind::Continuous, {}, ""},
              {"C", ColumnKind::Categorical, {"M", "F"}, ""},
              {"T", ColumnKind::Categorical, {"a", "b"}, ""}};
  b.rows = {
      {Cell::number(0), Cell::number(0.0), Cell::label(0), Cell::label(0)},
      {Cell::number(10), Cell::number(0.1), Cell::label(0), Cell::label(0)},
      {Cell::number(20), Cell::number(0.9), Cell::label(0), Cell::label(1)},
      {Cell::number(40), Cell::number(1.0), Cell::label(1), Cell::label(1)},
  };
  b.validate();
  Split split{{0, 1, 2, 3}, {}};
  MissingnessMask mask;
  mask.cells = {{0, "X"}};

  // by hand: scaled Y in [0,1] over train-observed values; distances from row 0:
  //   row1: sqrt((0.1111..^2 + 0 + 0)/3), row2: sqrt((1^2+0+1)/3)... with
  //   Y range = 0.0..1.0 over observed train rows (0.0,0.1,0.9,1.0) -> scale x1
  auto dist = [&](double dy, double dc, double dt) {
    return std::sqrt((dy * dy + dc + dt) / 3.0);
  };
  const double d1 = dist(0.1, 0, 0), d2 = dist(0.9, 0, 1), d3 = dist(1.0, 1, 1);
  REQUIRE(d1 < d2);
  REQUIRE(d2 < d3);

  const auto t1 = impute_knn(b, split, mask, 1);
  CHECK(t1.filled.at({0, 0}) == Cell::number(10.0));
  const auto t3 = impute_knn(b, split, mask, 3);
  CHECK(t3.filled.at({0, 0}) == Cell::number((10.0 + 20.0 + 40.0) / 3.0));
}

TEST_CASE("knn with k >= candidates equals mean imputation exactly") {
  rng::Engine eng(2024);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> xs;
    const int n = 8 + static_cast<int>(rng::below(eng, 20));
    for (int i = 0; i < n; ++i) xs.push_back(std::round(rng::gaussian(eng) * 100) / 10.0);
    auto s = masked_x(n, {0, n / 2}, xs);
    const auto knn = impute_knn(s.bundle, s.split, s.mask, 10000);
    const auto mean = impute_mean_mode(s.bundle, s.split, s.mask);
    for (const auto& [rc, cell] : mean.filled)
      CHECK(knn.filled.at(rc).num == cell.num);  // bitwise equal
  }
}

TEST_CASE("knn requires candidates with the target column observed") {
  auto s = masked_x(3, {0, 1, 2}, {1, 2, 3});
  CHECK_THROWS_AS(impute_knn(s.bundle, s.split, s.mask, 2), ImputeError);
}

TEST_CASE("missforest with max_iter 0 is mean/mode initialization") {
  auto s = masked_x(10, {2, 7}, {5, 6, 7, 8, 9, 10, 11, 12, 13, 14});
  MissForestConfig cfg;
  cfg.max_iter = 0;
  const auto mf = impute_missforest(s.bundle, s.split, s.mask, cfg);
  const auto mm = impute_mean_mode(s.bundle, s.split, s.mask);
  CHECK(mf.filled == mm.filled);
}

TEST_CASE("missforest recovers a copied column") {
  // masked column X equals column D exactly; D takes 4 repeated levels
  TableBundle b;
  b.description = "copied column";
  b.target = "T";
  b.schema = {{"X", ColumnKind::Continuous, {}, ""},
              {"D", ColumnKind::Continuous, {}, ""},
              {"T", ColumnKind::Categorical, {"a", "b"}, ""}};
  rng::Engine eng(555);
  const int n = 100;
  for (int i = 0; i < n; ++i) {
    const double v = 5.0 * static_cast<double>(rng::below(eng, 4));
    // target is a function of D, so no split can strand a level of D
    b.rows.push_back({Cell::number(v), Cell::number(v), Cell::label(v >= 10.0 ? 1 : 0)});
  }
  b.validate();
  const auto split = split_train_test(b, 0.8, 1);
  MissingnessMask mask;
  mask.mechanism = Mechanism::MAR;
  for (int i = 0; i < 20; ++i) mask.cells.insert({split.train[i], "X"});
  for (int i = 0; i < 5; ++i) mask.cells.insert({split.test[i], "X"});

  MissForestConfig cfg;
  cfg.seed = 7;
  const auto mf = impute_missforest(b, split, mask, cfg);
  std::vector<double> truth, imputed;
  for (const auto& [rc, cell] : mf.filled) {
    truth.push_back(b.rows[rc.first][rc.second].num);
    imputed.push_back(cell.num);
  }
  const auto err = nrmse(truth, imputed);
  REQUIRE(err.has_value());
  CHECK(*err <= 1e-9);
}

TEST_CASE("missforest is deterministic for a fixed seed") {
  auto b = testutil::small_bundle(40);
  const auto split = split_train_test(b, 0.8, 3);
  const auto mask = inject_mar(b, split, 8, 2, 12);
  MissForestConfig cfg;
  cfg.seed = 31;
  cfg.n_trees = 30;
  const auto a = impute_missforest(b, split, mask, cfg);
  const auto c = impute_missforest(b, split, mask, cfg);
  CHECK(a.filled == c.filled);
}

TEST_CASE("missforest needs two columns") {
  TableBundle b;
  b.description = "d";
  b.target = "T";
  b.schema = {{"T", ColumnKind::Categorical, {"a", "b"}, ""}};
  b.rows = {{Cell::label(0)}, {Cell::label(1)}};
  Split s{{0, 1}, {}};
  MissingnessMask mask;
  CHECK_THROWS_AS(impute_missforest(b, s, mask), ImputeError);
}

namespace {

Gateway mock_gateway(MockScript script) {
  GatewayConfig cfg;
  cfg.backend = GatewayBackend::Mock;
  return Gateway(cfg, std::move(script));
}

}  // namespace

TEST_CASE("llm imputer fills every masked cell from scripted responses") {
  auto s = masked_x(6, {1, 3}, {10, 0, 30, 0, 50, 60});
  MockScript script;
  script.fallback = "{\"output\": 0}";
  auto gw = mock_gateway(script);
  ExpertProfile profile{"You are a measurement technician.", ProfileOrigin::Expert};
  LlmImputeOptions opts;
  opts.model = "mock";
  const auto t = impute_llm(s.bundle, s.split, s.mask, gw, profile, opts);
  CHECK(t.filled.size() == 2);
  CHECK(t.filled.at({1, 0}) == Cell::number(0.0));
  CHECK(t.filled.at({3, 0}) == Cell::number(0.0));
  CHECK(t.failures.empty());
  CHECK(gw.backend_calls() == 2);  // one initial call per masked cell
}

TEST_CASE("llm imputer echo plumbing: response mirrors a serialized value") {
  auto s = masked_x(4, {2}, {7, 8, 9, 10});
  // the serialized row contains "The C is M." for row 2; script echoes Age-like info
  MockScript script;
  script.entries = {{"The C is M.", "{\"output\": 123}", false}};
  script.fallback = "{\"output\": -1}";
  auto gw = mock_gateway(script);
  ExpertProfile profile{"You are a tester.", ProfileOrigin::Expert};
  LlmImputeOptions opts;
  opts.model = "mock";
  const auto t = impute_llm(s.bundle, s.split, s.mask, gw, profile, opts);
  CHECK(t.filled.at({2, 0}) == Cell::number(123.0));
}

TEST_CASE("llm imputer scripted to training means equals mean/mode imputation") {
  auto b = testutil::small_bundle(30);
  const auto split = split_train_test(b, 0.8, 9);
  const auto mask = inject_mar(b, split, 6, 2, 77);
  const auto mm = impute_mean_mode(b, split, mask);

  MockScript script;
  for (const auto& col_name : mask.masked_columns()) {
    const int c = b.column_index(col_name);
    // find this column's mean/mode from the reference imputation
    for (const auto& [rc, cell] : mm.filled) {
      if (rc.second != c) continue;
      const std::string value = cell.kind == CellKind::Number
                                    ? format_number(cell.num)
                                    : b.schema[c].categories[cell.cat];
      script.entries.push_back(
          {"The " + col_name + " is <missing>.", "{\"output\": \"" + value + "\"}", false});
      break;
    }
  }
  script.fallback = "unparseable";
  auto gw = mock_gateway(script);
  ExpertProfile profile{"You are a clinician.", ProfileOrigin::Expert};
  LlmImputeOptions opts;
  opts.model = "mock";
  const auto t = impute_llm(b, split, mask, gw, profile, opts);
  CHECK(t.filled == mm.filled);
  CHECK(t.failures.empty());
}

TEST_CASE("llm imputer retries once then falls back to mean/mode") {
  auto s = masked_x(5, {4}, {1, 2, 3, 4, 100});
  MockScript script;
  script.fallback = "I cannot answer that.";
  auto gw = mock_gateway(script);
  ExpertProfile profile{"You are a tester.", ProfileOrigin::Expert};
  LlmImputeOptions opts;
  opts.model = "mock";
  int prompt_count = 0;
  std::vector<std::string> users;
  opts.on_prompt = [&](int, const std::string&, const PromptPair& p, int) {
    ++prompt_count;
    users.push_back(p.user);
  };
  const auto t = impute_llm(s.bundle, s.split, s.mask, gw, profile, opts);
  CHECK(prompt_count == 2);  // initial + one retry
  CHECK(users[1].find("Respond with only the JSON object.") != std::string::npos);
  CHECK(t.filled.at({4, 0}) == Cell::number(2.5));  // train mean of 1,2,3,4
  REQUIRE(t.failures.size() == 1);
  CHECK(t.failures[0].row == 4);
  CHECK(t.failures[0].error.find("NoJsonFound") != std::string::npos);
}

TEST_CASE("every imputer touches exactly the masked cells with schema-valid values") {
  auto b = testutil::small_bundle(40);
  const auto split = split_train_test(b, 0.8, 4);
  const auto mask = inject_mar(b, split, 10, 3, 99);
  MockScript script;
  script.fallback = "{\"output\": \"M\"}";
  auto gw = mock_gateway(script);
  ExpertProfile profile{"You are a clinician.", ProfileOrigin::Expert};
  LlmImputeOptions lo;
  lo.model = "mock";

  MissForestConfig mf_cfg;
  mf_cfg.n_trees = 20;
  const std::vector<ImputedTable> results = {
      impute_mean_mode(b, split, mask),
      impute_knn(b, split, mask),
      impute_missforest(b, split, mask, mf_cfg),
      impute_llm(b, split, mask, gw, profile, lo),
  };
  for (const auto& t : results) {
    CHECK(t.filled.size() == mask.cells.size());
    for (const auto& [rc, cell] : t.filled) {
      CHECK(mask.contains(rc.first, b.schema[rc.second].name));
      if (b.schema[rc.second].kind == ColumnKind::Continuous) {
        CHECK(cell.kind == CellKind::Number);
        CHECK(std::isfinite(cell.num));
      } else {
        CHECK(cell.kind == CellKind::Label);
        CHECK(cell.cat >= 0);
        CHECK(cell.cat < static_cast<std::int32_t>(b.schema[rc.second].categories.size()));
      }
    }
    const auto completed = t.apply();
    for (int r = 0; r < b.n(); ++r)
      for (int c = 0; c < b.p(); ++c)
        if (!mask.contains(r, b.schema[c].name)) CHECK(completed.rows[r][c] == b.rows[r][c]);
  }
}
