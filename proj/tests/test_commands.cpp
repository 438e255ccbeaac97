#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>

#include "sibyl/commands.hpp"
#include "test_support.hpp"

using namespace sibyl;
using testutil::TempDir;
using testutil::read_file;
using testutil::write_file;

namespace {

/// Writes a 60-row mixed bundle plus a mock script that answers the EPI ask
/// and every per-column imputation ask.
std::filesystem::path make_bundle_fixture(const std::filesystem::path& dir) {
  auto b = testutil::small_bundle(60);
  save_bundle(b, dir);
  nlohmann::json mock{
      {"entries",
       nlohmann::json::array(
           {{{"match", "Here is the description of the dataset"},
             {"response", "You are a ward nurse with twenty years of triage experience."}},
            {{"match", "The Age is <missing>."}, {"response", "{\"output\": 44.5}"}},
            {{"match", "The Sex is <missing>."}, {"response", "{\"output\": \"F\"}"}},
            {{"match", "The BloodPressure is <missing>."},
             {"response", "{\"output\": 120}"}}})},
      {"fallback", "{\"output\": 1}"}};
  write_file(dir / "mock.json", mock.dump(2));
  return dir;
}

ImputeOptions impute_opts(const std::filesystem::path& bundle,
                          const std::filesystem::path& out) {
  ImputeOptions o;
  o.bundle_dir = bundle;
  o.methods = {"mean_mode", "knn", "missforest", "llm"};
  o.seed = 11;
  o.n_train_missing = 10;
  o.n_test_missing = 3;
  o.forest_trees = 25;
  o.out_dir = out;
  o.gateway.backend = GatewayBackend::Mock;
  o.gateway.mock_script = bundle / "mock.json";
  o.gateway.model = "mock-model";
  return o;
}

}  // namespace

TEST_CASE("impute writes a complete run directory") {
  TempDir tmp;
  const auto bundle = make_bundle_fixture(tmp.path / "bundle");
  const auto rc = cmd_impute(impute_opts(bundle, tmp.path / "run"));
  CHECK(rc == kExitOk);
  for (const char* name :
       {"manifest.json", "mask.json", "split.json", "metrics.jsonl", "imputed_mean_mode.csv",
        "imputed_knn.csv", "imputed_missforest.csv", "imputed_llm.csv", "fills_llm.json",
        "expert_profile.txt"})
    CHECK(std::filesystem::exists(tmp.path / "run" / name));
  const auto manifest = nlohmann::json::parse(read_file(tmp.path / "run" / "manifest.json"));
  CHECK(manifest.at("status") == "complete");
  CHECK(manifest.at("seed") == 11);
}

TEST_CASE("impute then evaluate is rerunnable with byte-identical metrics") {
  TempDir tmp;
  const auto bundle = make_bundle_fixture(tmp.path / "bundle");
  cmd_impute(impute_opts(bundle, tmp.path / "run1"));
  cmd_impute(impute_opts(bundle, tmp.path / "run2"));
  CHECK(read_file(tmp.path / "run1" / "metrics.jsonl") ==
        read_file(tmp.path / "run2" / "metrics.jsonl"));
  CHECK(read_file(tmp.path / "run1" / "mask.json") ==
        read_file(tmp.path / "run2" / "mask.json"));
  CHECK(read_file(tmp.path / "run1" / "imputed_llm.csv") ==
        read_file(tmp.path / "run2" / "imputed_llm.csv"));

  EvaluateOptions ev;
  ev.run_dirs = {tmp.path / "run1"};
  ev.out_dir = tmp.path / "report1";
  CHECK(cmd_evaluate(ev) == kExitOk);
  ev.run_dirs = {tmp.path / "run2"};
  ev.out_dir = tmp.path / "report2";
  CHECK(cmd_evaluate(ev) == kExitOk);
  CHECK(read_file(tmp.path / "report1" / "downstream.jsonl") ==
        read_file(tmp.path / "report2" / "downstream.jsonl"));
  for (const char* name : {"quality.csv", "downstream.csv", "downstream_by_domain.csv"})
    CHECK(std::filesystem::exists(tmp.path / "report1" / name));
  // charts render only when the metric family has rows
  CHECK(std::filesystem::exists(tmp.path / "report1" / "downstream.svg"));
}

TEST_CASE("offline llm run with a cold cache refuses before any work") {
  TempDir tmp;
  const auto bundle = make_bundle_fixture(tmp.path / "bundle");
  auto opts = impute_opts(bundle, tmp.path / "run");
  opts.gateway.backend = GatewayBackend::Live;
  opts.gateway.offline = true;
  opts.gateway.cache_dir = tmp.path / "cold_cache";
  CHECK_THROWS_AS(cmd_impute(opts), ConfigError);
  CHECK(!std::filesystem::exists(tmp.path / "run" / "mask.json"));
}

TEST_CASE("evaluate fails cleanly on missing artifacts") {
  TempDir tmp;
  const auto bundle = make_bundle_fixture(tmp.path / "bundle");
  auto opts = impute_opts(bundle, tmp.path / "run");
  cmd_impute(opts);
  std::filesystem::remove(tmp.path / "run" / "fills_knn.json");
  EvaluateOptions ev;
  ev.run_dirs = {tmp.path / "run"};
  ev.out_dir = tmp.path / "report";
  CHECK_THROWS_AS(cmd_evaluate(ev), ConfigError);
}

TEST_CASE("partial failure persists earlier methods and marks the manifest") {
  TempDir tmp;
  const auto bundle = make_bundle_fixture(tmp.path / "bundle");
  auto opts = impute_opts(bundle, tmp.path / "run");
  // llm first would need a gateway; break it by pointing at a dead endpoint
  opts.methods = {"mean_mode", "llm"};
  opts.gateway.backend = GatewayBackend::Live;
  opts.gateway.endpoint = "http://127.0.0.1:1";
  const auto rc = cmd_impute(opts);
  CHECK(rc == kExitPartial);
  CHECK(std::filesystem::exists(tmp.path / "run" / "imputed_mean_mode.csv"));
  const auto manifest = nlohmann::json::parse(read_file(tmp.path / "run" / "manifest.json"));
  CHECK(manifest.at("status") == "partial");
  CHECK(manifest.at("failed_stage").get<std::string>().find("llm") == 0);
}

TEST_CASE("elicit runs the full grid and keeps going on parse failures") {
  TempDir tmp;
  write_file(tmp.path / "tasks.json", R"([
    {"id": "t_norm", "domain": "weather", "question": "the daily mean temperature in Oslo in December", "family": "normal"},
    {"id": "t_beta", "domain": "healthcare", "question": "the share of patients adhering to medication", "family": "beta", "support": [0, 1]}
  ])");
  nlohmann::json mock{
      {"entries",
       nlohmann::json::array(
           {{{"match", "Here is the description of the dataset"}, {"response", "You are a meteorologist."}},
            {{"match", "single normal distribution"}, {"response", "`y ~ normal(2, 5)`"}},
            {{"match", "single beta distribution"}, {"response", "`y ~ beta(3, 7)`"}}})},
      {"fallback", "cannot help"}};
  write_file(tmp.path / "mock.json", mock.dump());

  ElicitOptions el;
  el.task_file = tmp.path / "tasks.json";
  el.models = {"model-a", "model-b"};
  el.personas = {Persona::Expert, Persona::Conference, Persona::NonExpert};
  el.protocols = {Protocol::Direct, Protocol::Shelf};
  el.out_dir = tmp.path / "elicit";
  el.gateway.backend = GatewayBackend::Mock;
  el.gateway.mock_script = tmp.path / "mock.json";
  el.gateway.model = "unused";
  CHECK(cmd_elicit(el) == kExitOk);

  std::ifstream in(tmp.path / "elicit" / "results.jsonl");
  std::string line;
  int rows = 0, with_params = 0, with_heuristic = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ++rows;
    const auto j = nlohmann::json::parse(line);
    if (j.contains("params")) ++with_params;
    if (j.contains("ess_heuristic")) ++with_heuristic;
  }
  CHECK(rows == 2 * 2 * 3 * 2);  // models x tasks x personas x protocols
  CHECK(with_params == rows);
  CHECK(with_heuristic == rows / 2);  // the beta task rows
}

TEST_CASE("elicit rejects malformed task files as config errors") {
  TempDir tmp;
  write_file(tmp.path / "tasks.json", "this is not json");
  write_file(tmp.path / "mock.json", R"({"fallback": "x"})");
  ElicitOptions el;
  el.task_file = tmp.path / "tasks.json";
  el.models = {"m"};
  el.out_dir = tmp.path / "out";
  el.gateway.backend = GatewayBackend::Mock;
  el.gateway.mock_script = tmp.path / "mock.json";
  CHECK_THROWS_AS(cmd_elicit(el), ConfigError);
}

TEST_CASE("ess command scores results against csv-bound data") {
  TempDir tmp;
  // ground truth: 200 draws near zero
  std::string csv_text = "values\n";
  rng::Engine eng(4);
  for (int i = 0; i < 200; ++i) csv_text += format_number(rng::gaussian(eng)) + "\n";
  write_file(tmp.path / "data.csv", csv_text);
  write_file(tmp.path / "tasks.json", nlohmann::json(nlohmann::json::array(
      {{{"id", "t_norm"},
        {"question", "q"},
        {"family", "normal"},
        {"data",
         {{"source", "csv"}, {"path", (tmp.path / "data.csv").string()}, {"column", "values"}}}},
       {{"id", "t_beta"},
        {"question", "q2"},
        {"family", "beta"},
        {"data",
         {{"source", "csv"}, {"path", (tmp.path / "data.csv").string()}, {"column", "values"}}}}}))
      .dump());
  // results: one mis-specified normal prior, one beta prior on unbounded data
  std::string results;
  results += nlohmann::json{{"task", "t_norm"}, {"model", "m"}, {"persona", "expert"},
                            {"protocol", "direct"}, {"family", "normal"},
                            {"params", {100.0, 1.0}}}.dump() + "\n";
  results += nlohmann::json{{"task", "t_beta"}, {"model", "m"}, {"persona", "expert"},
                            {"protocol", "direct"}, {"family", "beta"},
                            {"params", {2.0, 5.0}}}.dump() + "\n";
  write_file(tmp.path / "results.jsonl", results);

  EssOptions es;
  es.results_file = tmp.path / "results.jsonl";
  es.task_file = tmp.path / "tasks.json";
  es.metric = EssMetric::Mse;
  es.repeats = 30;
  es.seed = 5;
  es.out_dir = tmp.path / "ess";
  CHECK(cmd_ess(es) == kExitOk);

  const auto table = csv::parse_file((tmp.path / "ess" / "ess.csv").string());
  REQUIRE(table.size() == 3);  // header + 2 rows
  const auto& norm_row = table[1];
  CHECK(norm_row[0] == "t_norm");
  CHECK(norm_row[8] == "2");  // mis-specified prior hits the floor
  const auto& beta_row = table[2];
  CHECK(beta_row[7] == "7");  // alpha+beta heuristic
  CHECK(beta_row[12].find("support mismatch") != std::string::npos);
}

TEST_CASE("evaluate handles a run with no methods") {
  TempDir tmp;
  const auto bundle = make_bundle_fixture(tmp.path / "bundle");
  auto opts = impute_opts(bundle, tmp.path / "run");
  opts.methods = {};
  CHECK(cmd_impute(opts) == kExitOk);
  EvaluateOptions ev;
  ev.run_dirs = {tmp.path / "run"};
  ev.out_dir = tmp.path / "report";
  CHECK(cmd_evaluate(ev) == kExitOk);
  // only the incomplete baseline is reported
  const auto text = read_file(tmp.path / "report" / "downstream.jsonl");
  CHECK(text.find("baseline_sentinel") != std::string::npos);
  CHECK(text.find("downstream_improvement") == std::string::npos);
}

TEST_CASE("ess resolves weather-backed tasks from offline fixtures") {
  TempDir tmp;
  // one agreeable temperature prior for Tokyo, fetched from shipped fixtures
  WeatherClient::Config wc;
  wc.cache_dir = testutil::fixture_dir() / "weather";
  wc.offline = true;
  WeatherClient client(wc);
  const auto cities = load_cities(testutil::fixture_dir() / "cities.json");
  const auto tokyo = *std::find_if(cities.begin(), cities.end(),
                                   [](const CityConfig& c) { return c.name == "Tokyo"; });
  const auto series = client.fetch_city(tokyo, 2014, 2023);
  const auto temps = series.temperatures();
  double mean = 0.0;
  for (double t : temps) mean += t;
  mean /= temps.size();

  std::string results;
  results += nlohmann::json{{"task", "weather_temp_tokyo"}, {"model", "m"},
                            {"persona", "expert"}, {"protocol", "direct"},
                            {"family", "normal"},
                            {"params", {mean, 3.0}}}.dump() + "\n";
  write_file(tmp.path / "results.jsonl", results);

  EssOptions es;
  es.results_file = tmp.path / "results.jsonl";
  es.task_file = testutil::fixture_dir() / "tasks" / "weather_tasks.json";
  es.cities_file = testutil::fixture_dir() / "cities.json";
  es.weather_cache = testutil::fixture_dir() / "weather";
  es.offline = true;
  es.metric = EssMetric::Mse;
  es.repeats = 20;
  es.seed = 9;
  es.out_dir = tmp.path / "ess";
  CHECK(cmd_ess(es) == kExitOk);
  const auto table = csv::parse_file((tmp.path / "ess" / "ess.csv").string());
  REQUIRE(table.size() == 2);
  CHECK(table[1][0] == "weather_temp_tokyo");
  CHECK(table[1][12].empty());           // no error
  CHECK(!table[1][8].empty());           // ess_data populated
  // 310 December days: test half 155, pool 155, grid max 51
  CHECK(std::stoi(table[1][10]) == 51);
  CHECK(std::stod(table[1][8]) >= 2.0);
}

TEST_CASE("cli binary wires the subcommands end to end") {
  TempDir tmp;
  const auto bundle = make_bundle_fixture(tmp.path / "bundle");
  const std::string cli = SIBYL_CLI_PATH;
  const std::string run = (tmp.path / "cli_run").string();
  const std::string cmd = cli + " impute --bundle " + bundle.string() +
                          " --methods mean_mode,llm --seed 3 --train-missing 8" +
                          " --test-missing 2 --mock " + (bundle / "mock.json").string() +
                          " --out " + run + " --dump-prompts > /dev/null 2>&1";
  REQUIRE(std::system(cmd.c_str()) == 0);
  CHECK(std::filesystem::exists(run + "/imputed_llm.csv"));
  CHECK(std::filesystem::exists(run + "/prompts/epi.txt"));

  const std::string eval_cmd = cli + " evaluate " + run + " > /dev/null 2>&1";
  REQUIRE(std::system(eval_cmd.c_str()) == 0);
  CHECK(std::filesystem::exists(run + "/report/downstream.jsonl"));

  // config errors exit with code 2
  const std::string bad = cli + " impute --bundle /nonexistent --out " + run +
                          " --methods llm --offline --backend live > /dev/null 2>&1";
  const int status = std::system(bad.c_str());
  CHECK(WEXITSTATUS(status) == kExitConfig);
}

TEST_CASE("cli elicit and ess run the weather grid offline") {
  TempDir tmp;
  nlohmann::json mock{
      {"entries",
       nlohmann::json::array(
           {{{"match", "Here is the description of the dataset"},
             {"response", "You are a field meteorologist."}},
            {{"match", "single gamma distribution"}, {"response", "`y ~ gamma(2, 1)`"}}})},
      {"fallback", "`y ~ normal(10, 5)`"}};
  testutil::write_file(tmp.path / "mock.json", mock.dump());
  const std::string cli = SIBYL_CLI_PATH;
  const auto tasks = (testutil::fixture_dir() / "tasks" / "weather_tasks.json").string();

  const std::string elicit_cmd =
      cli + " elicit --tasks " + tasks + " --models mock-model --personas expert" +
      " --protocols direct,shelf --mock " + (tmp.path / "mock.json").string() + " --out " +
      (tmp.path / "elicit").string() + " > /dev/null 2>&1";
  REQUIRE(std::system(elicit_cmd.c_str()) == 0);

  const std::string ess_cmd =
      cli + " ess --results " + (tmp.path / "elicit" / "results.jsonl").string() +
      " --tasks " + tasks + " --cities " + (testutil::fixture_dir() / "cities.json").string() +
      " --weather-cache " + (testutil::fixture_dir() / "weather").string() +
      " --metric mse --repeats 10 --seed 2 --years 2014:2023 --out " +
      (tmp.path / "ess").string() + " > /dev/null 2>&1";
  REQUIRE(std::system(ess_cmd.c_str()) == 0);

  const auto table = csv::parse_file((tmp.path / "ess" / "ess.csv").string());
  REQUIRE(table.size() == 1 + 25 * 2 * 2);  // header + cities x quantities x protocols
  int scored = 0;
  for (std::size_t i = 1; i < table.size(); ++i)
    if (!table[i][8].empty()) ++scored;
  CHECK(scored == static_cast<int>(table.size()) - 1);  // every row got an ESS
}
