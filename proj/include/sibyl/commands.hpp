#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "sibyl/elicitation.hpp"
#include "sibyl/imputers.hpp"
#include "sibyl/metrics.hpp"
#include "sibyl/missingness.hpp"
#include "sibyl/svg.hpp"
#include "sibyl/weather.hpp"

namespace sibyl {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitPartial = 3;

struct GatewayOptions {
  GatewayBackend backend = GatewayBackend::Live;
  std::string model;
  std::string endpoint;
  std::string api_key;
  std::filesystem::path cache_dir;
  std::filesystem::path mock_script;
  bool offline = false;

  Gateway make_gateway() const {
    GatewayConfig cfg;
    cfg.backend = backend;
    cfg.base_url = endpoint;
    cfg.api_key = api_key;
    cfg.cache_dir = cache_dir;
    cfg.offline = offline;
    MockScript script;
    if (backend == GatewayBackend::Mock) {
      if (mock_script.empty())
        throw ConfigError("mock backend needs a script file (--mock)");
      script = MockScript::from_file(mock_script);
    } else if (endpoint.empty()) {
      throw ConfigError("live backend needs an endpoint (--endpoint or SIBYL_ENDPOINT)");
    }
    return Gateway(cfg, std::move(script));
  }
};

namespace detail {

inline std::string timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
}

inline void write_jsonl(const std::filesystem::path& path,
                        const std::vector<nlohmann::json>& rows) {
  std::string text;
  for (const auto& r : rows) text += r.dump() + "\n";
  write_text(path, text);
}

inline nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path.string());
  return nlohmann::json::parse(in);
}

inline bool cache_is_cold(const std::filesystem::path& dir) {
  if (dir.empty() || !std::filesystem::exists(dir)) return true;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.path().extension() == ".json") return false;
  return true;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// impute
// ---------------------------------------------------------------------------

struct ImputeOptions {
  std::filesystem::path bundle_dir;
  std::vector<std::string> methods{"mean_mode", "knn", "missforest"};
  std::uint64_t seed = 0;
  double train_fraction = 0.8;
  int n_train_missing = 40;
  int n_test_missing = 10;
  int knn_k = 5;
  int forest_trees = 100;
  int forest_max_iter = 10;
  bool dump_prompts = false;
  std::string system_suffix;
  std::filesystem::path out_dir;
  GatewayOptions gateway;
};

namespace detail {

/// Per-column imputation quality over all masked cells of the column, rows
/// ascending. NRMSE rows with a zero range are dropped, not zeroed.
inline std::vector<EvalRecord> quality_records(const TableBundle& truth,
                                               const ImputedTable& imputed,
                                               const std::string& dataset) {
  std::vector<EvalRecord> out;
  std::map<int, std::vector<std::pair<int, int>>> by_col;
  for (const auto& [rc, cell] : imputed.filled) by_col[rc.second].push_back(rc);
  for (const auto& [c, cells] : by_col) {
    const auto& schema = truth.schema[c];
    EvalRecord rec;
    rec.dataset = dataset;
    rec.domain = truth.domain;
    rec.method = imputed.method;
    rec.column = schema.name;
    if (schema.kind == ColumnKind::Continuous) {
      std::vector<double> orig, imp;
      for (const auto& rc : cells) {
        orig.push_back(truth.rows[rc.first][rc.second].num);
        imp.push_back(imputed.filled.at(rc).num);
      }
      const auto v = nrmse(orig, imp);
      if (!v) continue;  // zero range: drop the record
      rec.metric = "nrmse";
      rec.value = *v;
    } else {
      std::vector<std::string> orig, imp;
      for (const auto& rc : cells) {
        orig.push_back(schema.categories[truth.rows[rc.first][rc.second].cat]);
        imp.push_back(schema.categories[imputed.filled.at(rc).cat]);
      }
      rec.metric = "f1";
      rec.value = f1(orig, imp);
    }
    out.push_back(std::move(rec));
  }
  return out;
}

inline void persist_fills(const std::filesystem::path& dir, const ImputedTable& t) {
  nlohmann::json fills = nlohmann::json::array();
  for (const auto& [rc, cell] : t.filled) {
    nlohmann::json f{{"row", rc.first}, {"column", t.base.schema[rc.second].name}};
    if (cell.kind == CellKind::Number) f["value"] = cell.num;
    else f["value"] = t.base.schema[rc.second].categories[cell.cat];
    fills.push_back(std::move(f));
  }
  nlohmann::json failures = nlohmann::json::array();
  for (const auto& f : t.failures)
    failures.push_back({{"row", f.row},
                        {"column", t.base.schema[f.col].name},
                        {"error", f.error}});
  nlohmann::json doc{{"method", t.method}, {"fills", fills}, {"failures", failures}};
  write_text(dir / ("fills_" + t.method + ".json"), doc.dump(2) + "\n");
}

inline void persist_imputed(const std::filesystem::path& dir, const ImputedTable& t) {
  const TableBundle completed = t.apply();
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> header;
  for (const auto& col : completed.schema) header.push_back(col.name);
  records.push_back(std::move(header));
  for (int r = 0; r < completed.n(); ++r) {
    std::vector<std::string> rec;
    for (int c = 0; c < completed.p(); ++c)
      rec.push_back(completed.rows[r][c].is_absent() ? std::string{}
                                                     : completed.cell_text(r, c));
    records.push_back(std::move(rec));
  }
  write_text(dir / ("imputed_" + t.method + ".csv"), csv::format(records));
  persist_fills(dir, t);
}

}  // namespace detail

/// Split, inject MAR missingness, run the selected imputers and write one
/// run directory: mask + split + per-method imputed tables, fill provenance
/// and imputation-quality metrics JSONL.
inline int cmd_impute(const ImputeOptions& opts) {
  if (opts.out_dir.empty()) throw ConfigError("impute needs --out");
  const bool wants_llm =
      std::find(opts.methods.begin(), opts.methods.end(), "llm") != opts.methods.end();
  if (wants_llm && opts.gateway.backend == GatewayBackend::Live && opts.gateway.offline &&
      detail::cache_is_cold(opts.gateway.cache_dir))
    throw ConfigError("offline run with method llm needs a warmed cache");

  const TableBundle bundle = load_bundle(opts.bundle_dir);
  const std::string dataset = opts.bundle_dir.filename().string();
  const auto split = split_train_test(bundle, opts.train_fraction, opts.seed);
  const auto mask = inject_mar(bundle, split, opts.n_train_missing, opts.n_test_missing,
                               rng::derive_seed(opts.seed, 0xA11C));

  std::filesystem::create_directories(opts.out_dir);
  detail::write_text(opts.out_dir / "mask.json", mask.to_json().dump(2) + "\n");
  detail::write_text(opts.out_dir / "split.json",
                     nlohmann::json{{"train", split.train}, {"test", split.test}}.dump(2) + "\n");

  nlohmann::json manifest{{"command", "impute"},
                          {"bundle", opts.bundle_dir.string()},
                          {"dataset", dataset},
                          {"methods", opts.methods},
                          {"seed", opts.seed},
                          {"train_fraction", opts.train_fraction},
                          {"n_train_missing", opts.n_train_missing},
                          {"n_test_missing", opts.n_test_missing},
                          {"knn_k", opts.knn_k},
                          {"forest_trees", opts.forest_trees},
                          {"forest_max_iter", opts.forest_max_iter},
                          {"model", opts.gateway.model},
                          {"backend",
                           opts.gateway.backend == GatewayBackend::Mock ? "mock" : "live"},
                          {"mock_script", opts.gateway.mock_script.string()},
                          {"offline", opts.gateway.offline},
                          {"dump_prompts", opts.dump_prompts},
                          {"system_suffix", opts.system_suffix},
                          {"started_at", detail::timestamp()},
                          {"status", "running"}};
  detail::write_text(opts.out_dir / "manifest.json", manifest.dump(2) + "\n");

  std::vector<nlohmann::json> metric_rows;
  std::string failed_stage;
  for (const auto& method : opts.methods) {
    try {
      ImputedTable result;
      if (method == "mean_mode") {
        result = impute_mean_mode(bundle, split, mask);
      } else if (method == "knn") {
        result = impute_knn(bundle, split, mask, opts.knn_k);
      } else if (method == "missforest") {
        MissForestConfig cfg;
        cfg.n_trees = opts.forest_trees;
        cfg.max_iter = opts.forest_max_iter;
        cfg.seed = rng::derive_seed(opts.seed, 0xF0);
        result = impute_missforest(bundle, split, mask, cfg);
      } else if (method == "llm") {
        Gateway gateway = opts.gateway.make_gateway();
        const auto profile = elicit_expert_profile(bundle, gateway, opts.gateway.model);
        detail::write_text(opts.out_dir / "expert_profile.txt", profile.text + "\n");
        LlmImputeOptions lo;
        lo.model = opts.gateway.model;
        lo.system_suffix = opts.system_suffix;
        if (opts.dump_prompts) {
          const auto prompt_dir = opts.out_dir / "prompts";
          const auto epi = build_epi_prompt(bundle.description);
          detail::write_text(prompt_dir / "epi.txt",
                             "SYSTEM:\n" + epi.system + "\n\nUSER:\n" + epi.user + "\n");
          lo.on_prompt = [prompt_dir](int row, const std::string& col, const PromptPair& p,
                                      int attempt) {
            detail::write_text(prompt_dir / ("ts_r" + std::to_string(row) + "_" + col + "_a" +
                                             std::to_string(attempt) + ".txt"),
                               "SYSTEM:\n" + p.system + "\n\nUSER:\n" + p.user + "\n");
          };
        }
        try {
          result = impute_llm(bundle, split, mask, gateway, profile, lo);
        } catch (const LlmImputeAborted& e) {
          // provenance only: a completed CSV would expose held-out values for
          // the cells the run never reached
          detail::persist_fills(opts.out_dir, e.partial);
          throw;
        }
      } else {
        throw ConfigError("unknown method: " + method);
      }
      detail::persist_imputed(opts.out_dir, result);
      for (const auto& rec : detail::quality_records(bundle, result, dataset))
        metric_rows.push_back(rec.to_json());
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      failed_stage = method + ": " + e.what();
      break;
    }
  }

  detail::write_jsonl(opts.out_dir / "metrics.jsonl", metric_rows);
  manifest["finished_at"] = detail::timestamp();
  manifest["status"] = failed_stage.empty() ? "complete" : "partial";
  if (!failed_stage.empty()) manifest["failed_stage"] = failed_stage;
  detail::write_text(opts.out_dir / "manifest.json", manifest.dump(2) + "\n");
  return failed_stage.empty() ? kExitOk : kExitPartial;
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

struct EvaluateOptions {
  std::vector<std::filesystem::path> run_dirs;
  std::filesystem::path out_dir;  // default: <first run dir>/report
  bool sensitivity = false;       // also report a mean-fill incomplete baseline
};

namespace detail {

/// Completed copy of the bundle with masked cells made uninformative: an
/// out-of-range constant (train min - 1) for continuous columns, a fresh
/// MISSING code for categorical ones.
inline TableBundle sentinel_filled(const TableBundle& b, const Split& split,
                                   const MissingnessMask& mask) {
  TableBundle out = b;
  for (const auto& [r, name] : mask.cells) {
    const int c = out.column_index(name);
    if (out.schema[c].kind == ColumnKind::Continuous) {
      const auto st = train_stats(b, split, mask, c);
      out.rows[r][c] = Cell::number(st.min - 1.0);
    } else {
      out.rows[r][c] = Cell::label(static_cast<std::int32_t>(out.schema[c].categories.size()));
    }
  }
  return out;
}

inline ImputedTable load_fills(const std::filesystem::path& path, const TableBundle& base) {
  const auto doc = read_json(path);
  ImputedTable t;
  t.base = base;
  t.method = doc.at("method");
  for (const auto& f : doc.at("fills")) {
    const int r = f.at("row");
    const int c = base.column_index(f.at("column").get<std::string>());
    if (base.schema[c].kind == ColumnKind::Continuous)
      t.filled[{r, c}] = Cell::number(f.at("value").get<double>());
    else {
      const auto idx = base.schema[c].category_index(f.at("value").get<std::string>());
      if (!idx) throw ConfigError("fills file refers to unknown category");
      t.filled[{r, c}] = Cell::label(*idx);
    }
  }
  return t;
}

struct GroupKey {
  std::string domain;
  std::string method;
  bool operator<(const GroupKey& o) const {
    return std::tie(domain, method) < std::tie(o.domain, o.method);
  }
};

inline void render_grouped_chart(const std::filesystem::path& path, const std::string& title,
                                 const std::string& y_label,
                                 const std::map<GroupKey, std::pair<double, int>>& groups) {
  std::set<std::string> domains, methods;
  for (const auto& [k, v] : groups) {
    domains.insert(k.domain);
    methods.insert(k.method);
  }
  BarChart chart;
  chart.title = title;
  chart.y_label = y_label;
  chart.groups.assign(domains.begin(), domains.end());
  chart.series.assign(methods.begin(), methods.end());
  for (const auto& m : chart.series) {
    std::vector<double> row;
    for (const auto& d : chart.groups) {
      auto it = groups.find({d, m});
      row.push_back(it == groups.end() || it->second.second == 0
                        ? 0.0
                        : it->second.first / it->second.second);
    }
    chart.values.push_back(std::move(row));
  }
  write_text(path, chart.render());
}

}  // namespace detail

/// Read one or more impute run directories, train the downstream classifier
/// on each imputed table, score it against the sentinel-filled incomplete
/// baseline, and emit per-method tables plus domain-grouped CSV/SVG reports.
inline int cmd_evaluate(const EvaluateOptions& opts) {
  if (opts.run_dirs.empty()) throw ConfigError("evaluate needs at least one run directory");
  const auto out_dir = opts.out_dir.empty() ? opts.run_dirs[0] / "report" : opts.out_dir;
  std::filesystem::create_directories(out_dir);

  std::vector<nlohmann::json> downstream_rows;
  std::vector<EvalRecord> quality_rows;
  for (const auto& run_dir : opts.run_dirs) {
    const auto manifest = detail::read_json(run_dir / "manifest.json");
    const TableBundle bundle = load_bundle(manifest.at("bundle").get<std::string>());
    const std::string dataset = manifest.at("dataset");
    const std::uint64_t seed = manifest.at("seed");
    Split split;
    {
      const auto sj = detail::read_json(run_dir / "split.json");
      split.train = sj.at("train").get<std::vector<int>>();
      split.test = sj.at("test").get<std::vector<int>>();
    }
    const auto mask = MissingnessMask::from_json(detail::read_json(run_dir / "mask.json"));

    // quality rows from the impute stage feed the grouped tables
    {
      std::ifstream metrics_in(run_dir / "metrics.jsonl");
      if (!metrics_in) throw ConfigError("missing metrics.jsonl in " + run_dir.string());
      std::string line;
      while (std::getline(metrics_in, line)) {
        if (line.empty()) continue;
        quality_rows.push_back(EvalRecord::from_json(nlohmann::json::parse(line)));
      }
    }

    ForestConfig fc;
    fc.seed = rng::derive_seed(seed, 0xD0);

    auto accuracy_of = [&](const TableBundle& completed, bool reserve_missing) {
      const auto rf = train_rf_classifier(completed, split.train, fc, reserve_missing);
      return classifier_accuracy(rf, completed, split.test, reserve_missing);
    };

    const double base_sentinel =
        accuracy_of(detail::sentinel_filled(bundle, split, mask), true);
    downstream_rows.push_back(EvalRecord{dataset, bundle.domain, "baseline_sentinel",
                                         "accuracy", "", base_sentinel}
                                  .to_json());
    double base_meanfill = 0.0;
    if (opts.sensitivity) {
      base_meanfill = accuracy_of(impute_mean_mode(bundle, split, mask).apply(), false);
      downstream_rows.push_back(EvalRecord{dataset, bundle.domain, "baseline_meanfill",
                                           "accuracy", "", base_meanfill}
                                    .to_json());
    }

    for (const auto& method : manifest.at("methods").get<std::vector<std::string>>()) {
      const auto fills_path = run_dir / ("fills_" + method + ".json");
      if (!std::filesystem::exists(fills_path))
        throw ConfigError("missing artifact " + fills_path.string());
      const auto imputed = detail::load_fills(fills_path, bundle);
      const double acc = accuracy_of(imputed.apply(), false);
      const double improvement = downstream_improvement(acc, base_sentinel);
      downstream_rows.push_back(
          EvalRecord{dataset, bundle.domain, method, "accuracy", "", acc}.to_json());
      downstream_rows.push_back(
          EvalRecord{dataset, bundle.domain, method, "downstream_improvement", "", improvement}
              .to_json());
      if (opts.sensitivity)
        downstream_rows.push_back(EvalRecord{dataset, bundle.domain, method,
                                             "downstream_improvement_vs_meanfill", "",
                                             downstream_improvement(acc, base_meanfill)}
                                      .to_json());
    }
  }

  detail::write_jsonl(out_dir / "downstream.jsonl", downstream_rows);

  // tidy CSV tables
  {
    std::vector<std::vector<std::string>> rows{{"dataset", "domain", "method", "metric",
                                                "column", "value"}};
    for (const auto& r : quality_rows)
      rows.push_back({r.dataset, r.domain, r.method, r.metric, r.column, format_number(r.value)});
    detail::write_text(out_dir / "quality.csv", csv::format(rows));
  }
  {
    std::vector<std::vector<std::string>> rows{{"dataset", "domain", "method", "metric", "value"}};
    for (const auto& j : downstream_rows) {
      const auto r = EvalRecord::from_json(j);
      rows.push_back({r.dataset, r.domain, r.method, r.metric, format_number(r.value)});
    }
    detail::write_text(out_dir / "downstream.csv", csv::format(rows));
  }

  // domain-grouped means, one CSV + one chart per metric family
  auto grouped = [&](const std::string& metric) {
    std::map<detail::GroupKey, std::pair<double, int>> g;
    for (const auto& r : quality_rows) {
      if (r.metric != metric) continue;
      auto& slot = g[{r.domain, r.method}];
      slot.first += r.value;
      ++slot.second;
    }
    return g;
  };
  auto grouped_downstream = [&](const std::string& metric) {
    std::map<detail::GroupKey, std::pair<double, int>> g;
    for (const auto& j : downstream_rows) {
      const auto r = EvalRecord::from_json(j);
      if (r.metric != metric) continue;
      auto& slot = g[{r.domain, r.method}];
      slot.first += r.value;
      ++slot.second;
    }
    return g;
  };
  auto dump_grouped = [&](const std::filesystem::path& path,
                          const std::map<detail::GroupKey, std::pair<double, int>>& g,
                          const std::string& metric) {
    std::vector<std::vector<std::string>> rows{{"domain", "method", "metric", "mean", "count"}};
    for (const auto& [k, v] : g)
      rows.push_back({k.domain, k.method, metric, format_number(v.first / v.second),
                      std::to_string(v.second)});
    detail::write_text(path, csv::format(rows));
  };

  const auto nrmse_groups = grouped("nrmse");
  const auto f1_groups = grouped("f1");
  const auto improve_groups = grouped_downstream("downstream_improvement");
  dump_grouped(out_dir / "quality_nrmse_by_domain.csv", nrmse_groups, "nrmse");
  dump_grouped(out_dir / "quality_f1_by_domain.csv", f1_groups, "f1");
  dump_grouped(out_dir / "downstream_by_domain.csv", improve_groups, "downstream_improvement");
  if (!nrmse_groups.empty())
    detail::render_grouped_chart(out_dir / "quality_nrmse.svg",
                                 "Imputation quality (continuous features)", "NRMSE",
                                 nrmse_groups);
  if (!f1_groups.empty())
    detail::render_grouped_chart(out_dir / "quality_f1.svg",
                                 "Imputation quality (categorical features)", "F1", f1_groups);
  if (!improve_groups.empty())
    detail::render_grouped_chart(out_dir / "downstream.svg", "Downstream improvement",
                                 "relative accuracy change", improve_groups);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// elicit
// ---------------------------------------------------------------------------

struct ElicitOptions {
  std::filesystem::path task_file;
  std::vector<std::string> models;
  std::vector<Persona> personas{Persona::Expert};
  std::vector<Protocol> protocols{Protocol::Direct};
  std::filesystem::path out_dir;
  std::string system_suffix;
  GatewayOptions gateway;
};

/// Run the full tasks x models x personas x protocols grid. Parse failures
/// are recorded per cell and the run continues.
inline int cmd_elicit(const ElicitOptions& opts) {
  if (opts.out_dir.empty()) throw ConfigError("elicit needs --out");
  if (opts.models.empty()) throw ConfigError("elicit needs at least one model");
  std::vector<ElicitationTask> tasks;
  try {
    tasks = load_tasks(opts.task_file);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("bad task file: ") + e.what());
  }
  Gateway gateway = opts.gateway.make_gateway();
  std::filesystem::create_directories(opts.out_dir);

  std::vector<nlohmann::json> rows;
  for (const auto& model : opts.models) {
    for (const auto& base_task : tasks) {
      for (const auto persona : opts.personas) {
        for (const auto protocol : opts.protocols) {
          ElicitationTask task = base_task;
          task.persona = persona;
          task.protocol = protocol;
          nlohmann::json row{{"task", task.id},       {"domain", task.domain},
                             {"model", model},        {"persona", to_string(persona)},
                             {"protocol", to_string(protocol)},
                             {"family", family_name(task.family)}};
          try {
            ExpertProfile profile;
            if (persona == Persona::NonExpert) {
              profile = non_expert_profile();
            } else {
              const auto epi = build_epi_prompt(task.question);
              const auto ex = gateway.complete(model, epi.system, epi.user);
              if (ex.response.empty())
                throw GatewayError(GatewayErrc::EmptyResponse, "empty EPI response");
              profile = ExpertProfile{ex.response, ProfileOrigin::Expert};
            }
            PromptPair prompts = build_elicitation_prompt(task, profile);
            if (!opts.system_suffix.empty()) prompts.system += opts.system_suffix;

            DistParseResult parsed;
            for (int attempt = 0; attempt < 2; ++attempt) {
              if (attempt == 1)
                prompts.user += std::string(" ") + std::string(tpl::kDistributionRetrySuffix);
              const auto ex = gateway.complete(model, prompts.system, prompts.user);
              parsed = parse_distribution(ex.response, task.family);
              if (parsed.ok()) break;
            }
            if (!parsed.ok()) {
              row["error"] = std::string(to_string(parsed.error)) + ": " + parsed.detail;
            } else {
              row["params"] = parsed.dist->params;
              if (parsed.dist->family == Family::Beta)
                row["ess_heuristic"] = ess_heuristic(*parsed.dist);
            }
          } catch (const GatewayError& e) {
            row["error"] = std::string("gateway: ") + e.what();
          }
          rows.push_back(std::move(row));
        }
      }
    }
  }

  detail::write_jsonl(opts.out_dir / "results.jsonl", rows);
  nlohmann::json manifest{{"command", "elicit"},
                          {"task_file", opts.task_file.string()},
                          {"models", opts.models},
                          {"rows", rows.size()},
                          {"finished_at", detail::timestamp()}};
  detail::write_text(opts.out_dir / "manifest.json", manifest.dump(2) + "\n");
  return kExitOk;
}

// ---------------------------------------------------------------------------
// ess
// ---------------------------------------------------------------------------

struct EssOptions {
  std::filesystem::path results_file;  // results.jsonl from elicit
  std::filesystem::path task_file;     // binds task ids to ground-truth data
  EssMetric metric = EssMetric::Mse;
  int repeats = 100;
  std::uint64_t seed = 0;
  std::filesystem::path out_dir;
  // weather-backed tasks
  std::filesystem::path cities_file;
  std::filesystem::path weather_cache;
  std::string weather_endpoint = "https://archive-api.open-meteo.com";
  bool offline = true;
  int year_from = 2014;
  int year_to = 2023;
};

namespace detail {

/// Ground-truth resolver for ESS: weather-backed series keyed
/// "weather_temp_<City>" / "weather_precip_<City>", or a CSV column named
/// after the task id.
class DataResolver {
 public:
  explicit DataResolver(const EssOptions& opts) : opts_(opts) {
    if (!opts.cities_file.empty()) {
      for (auto& c : load_cities(opts.cities_file)) cities_[c.name] = c;
      WeatherClient::Config wc;
      wc.base_url = opts.weather_endpoint;
      wc.cache_dir = opts.weather_cache;
      wc.offline = opts.offline;
      client_ = std::make_unique<WeatherClient>(wc);
    }
    if (!opts.task_file.empty()) {
      std::ifstream in(opts.task_file);
      if (in) {
        const auto j = nlohmann::json::parse(in);
        const auto& arr = j.is_array() ? j : j.at("tasks");
        for (const auto& tj : arr)
          if (tj.contains("data")) bindings_[tj.at("id")] = tj.at("data");
      }
    }
  }

  std::vector<double> resolve(const std::string& task_id) {
    auto it = bindings_.find(task_id);
    if (it == bindings_.end()) throw ConfigError("no data binding for task " + task_id);
    const auto& binding = it->second;
    const std::string source = binding.at("source");
    if (source == "weather_temperature" || source == "weather_precipitation") {
      const std::string city_name = binding.at("city");
      auto cit = cities_.find(city_name);
      if (cit == cities_.end()) throw ConfigError("unknown city " + city_name);
      if (!client_) throw ConfigError("weather tasks need --cities and --weather-cache");
      const auto series = client_->fetch_city(cit->second, opts_.year_from, opts_.year_to);
      return source == "weather_temperature" ? series.temperatures() : series.precipitation();
    }
    if (source == "csv") {
      const auto table = csv::parse_file(binding.at("path").get<std::string>());
      const std::string column = binding.at("column");
      if (table.empty()) throw ConfigError("empty data csv");
      std::size_t col = table[0].size();
      for (std::size_t i = 0; i < table[0].size(); ++i)
        if (table[0][i] == column) col = i;
      if (col == table[0].size()) throw ConfigError("no column " + column + " in data csv");
      std::vector<double> out;
      for (std::size_t r = 1; r < table.size(); ++r) {
        auto v = parse_number(table[r][col]);
        if (v) out.push_back(*v);
      }
      return out;
    }
    throw ConfigError("unknown data source " + source);
  }

 private:
  const EssOptions& opts_;
  std::map<std::string, CityConfig> cities_;
  std::map<std::string, nlohmann::json> bindings_;
  std::unique_ptr<WeatherClient> client_;
};

}  // namespace detail

/// Join elicitation results with ground-truth data and emit the ESS table:
/// data-dependent ESS per (task, model, persona, protocol) plus the alpha+beta
/// heuristic where the family admits it.
inline int cmd_ess(const EssOptions& opts) {
  if (opts.out_dir.empty()) throw ConfigError("ess needs --out");
  std::ifstream in(opts.results_file);
  if (!in) throw ConfigError("cannot read results " + opts.results_file.string());
  detail::DataResolver resolver(opts);
  std::filesystem::create_directories(opts.out_dir);

  std::vector<std::vector<std::string>> table{
      {"task", "domain", "model", "persona", "protocol", "family", "metric", "ess_heuristic",
       "ess_data", "censored", "grid_max", "prior_score", "error"}};
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto row = nlohmann::json::parse(line);
    std::vector<std::string> rec{row.at("task"),
                                 row.value("domain", ""),
                                 row.at("model"),
                                 row.value("persona", ""),
                                 row.value("protocol", ""),
                                 row.value("family", ""),
                                 to_string(opts.metric),
                                 "", "", "", "", "", ""};
    try {
      if (row.contains("error"))
        throw ConfigError("elicitation failed: " + row.at("error").get<std::string>());
      const auto fam = family_from_name(row.at("family").get<std::string>());
      if (!fam) throw ConfigError("unknown family in results row");
      const auto dist =
          ParametricDistribution::make(*fam, row.at("params").get<std::vector<double>>());
      if (dist.family == Family::Beta) rec[7] = format_number(ess_heuristic(dist));
      const auto data = resolver.resolve(row.at("task"));
      for (double x : data)
        if (!dist.in_support(x))
          throw ConfigError("support mismatch: observation " + format_number(x) +
                            " outside prior support");
      const auto ess = data_dependent_ess(dist, data, opts.metric, opts.repeats, opts.seed);
      rec[8] = format_number(ess.ess);
      rec[9] = ess.censored ? "true" : "false";
      rec[10] = std::to_string(ess.grid_max);
      rec[11] = format_number(ess.prior_score);
    } catch (const std::exception& e) {
      rec[12] = e.what();
    }
    table.push_back(std::move(rec));
  }
  detail::write_text(opts.out_dir / "ess.csv", csv::format(table));
  nlohmann::json manifest{{"command", "ess"},
                          {"results", opts.results_file.string()},
                          {"metric", to_string(opts.metric)},
                          {"repeats", opts.repeats},
                          {"seed", opts.seed},
                          {"finished_at", detail::timestamp()}};
  detail::write_text(opts.out_dir / "manifest.json", manifest.dump(2) + "\n");
  return kExitOk;
}

}  // namespace sibyl
