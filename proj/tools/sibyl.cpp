// sibyl: ask an LLM domain expert for missing values and prior
// distributions, then score the answers against classical baselines.

#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sibyl/commands.hpp"

namespace {

std::string env_or(const char* name, const std::string& fallback) {
  const char* v = std::getenv(name);
  return v ? std::string(v) : fallback;
}

void add_gateway_flags(CLI::App* cmd, sibyl::GatewayOptions& gw, std::string& backend) {
  cmd->add_option("--model", gw.model, "model identifier sent to the endpoint");
  cmd->add_option("--endpoint", gw.endpoint,
                  "chat completion base URL (or env SIBYL_ENDPOINT)");
  cmd->add_option("--cache", gw.cache_dir, "replay cache directory");
  cmd->add_option("--mock", gw.mock_script, "mock script JSON; selects the mock backend");
  cmd->add_flag("--offline", gw.offline, "forbid live calls; cache/mock only");
  cmd->add_option("--backend", backend, "live|mock (default: mock when --mock is given)");
}

void finish_gateway(sibyl::GatewayOptions& gw, const std::string& backend) {
  gw.api_key = env_or("SIBYL_API_KEY", "");
  if (gw.endpoint.empty()) gw.endpoint = env_or("SIBYL_ENDPOINT", "");
  if (gw.model.empty()) gw.model = env_or("SIBYL_MODEL", "");
  if (backend == "live") gw.backend = sibyl::GatewayBackend::Live;
  else if (backend == "mock") gw.backend = sibyl::GatewayBackend::Mock;
  else gw.backend = gw.mock_script.empty() ? sibyl::GatewayBackend::Live
                                           : sibyl::GatewayBackend::Mock;
  if (gw.backend == sibyl::GatewayBackend::Mock && gw.model.empty()) gw.model = "mock-model";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LLM-as-domain-expert harness: imputation, prior elicitation, evaluation"};
  app.require_subcommand(1);

  // impute
  sibyl::ImputeOptions imp;
  std::string imp_methods = "mean_mode,knn,missforest";
  std::string imp_backend;
  auto* impute = app.add_subcommand("impute", "split, inject MAR missingness, run imputers");
  impute->add_option("--bundle", imp.bundle_dir, "dataset bundle directory")->required();
  impute->add_option("--methods", imp_methods, "comma list: mean_mode,knn,missforest,llm");
  impute->add_option("--seed", imp.seed, "master seed");
  impute->add_option("--fraction", imp.train_fraction, "train fraction (default 0.8)");
  impute->add_option("--train-missing", imp.n_train_missing, "masked rows per column, train");
  impute->add_option("--test-missing", imp.n_test_missing, "masked rows per column, test");
  impute->add_option("--knn-k", imp.knn_k, "k for the k-NN imputer");
  impute->add_option("--trees", imp.forest_trees, "trees per forest");
  impute->add_option("--out", imp.out_dir, "run directory")->required();
  impute->add_flag("--dump-prompts", imp.dump_prompts, "write every constructed prompt");
  impute->add_option("--system-suffix", imp.system_suffix, "appended to the expert system prompt");
  add_gateway_flags(impute, imp.gateway, imp_backend);

  // evaluate
  sibyl::EvaluateOptions ev;
  auto* evaluate = app.add_subcommand("evaluate", "downstream evaluation + report tables/charts");
  evaluate->add_option("run_dirs", ev.run_dirs, "impute run directories")->required();
  evaluate->add_option("--out", ev.out_dir, "report directory (default <run>/report)");
  evaluate->add_flag("--sensitivity", ev.sensitivity, "also report a mean-fill baseline");

  // elicit
  sibyl::ElicitOptions el;
  std::string el_models, el_personas = "expert", el_protocols = "direct";
  std::string el_backend;
  auto* elicit = app.add_subcommand("elicit", "elicit prior distributions over a task grid");
  elicit->add_option("--tasks", el.task_file, "task file (JSON)")->required();
  elicit->add_option("--models", el_models, "comma list of model identifiers");
  elicit->add_option("--personas", el_personas, "comma list: expert,conference,non_expert");
  elicit->add_option("--protocols", el_protocols, "comma list: direct,shelf,roulette");
  elicit->add_option("--out", el.out_dir, "output directory")->required();
  elicit->add_option("--system-suffix", el.system_suffix, "appended to the system prompt");
  add_gateway_flags(elicit, el.gateway, el_backend);

  // ess
  sibyl::EssOptions es;
  std::string es_metric = "mse";
  auto* ess = app.add_subcommand("ess", "effective sample size of elicited priors");
  ess->add_option("--results", es.results_file, "results.jsonl from elicit")->required();
  ess->add_option("--tasks", es.task_file, "task file with data bindings")->required();
  ess->add_option("--metric", es_metric, "log_loss|crps|mse (default mse)");
  ess->add_option("--repeats", es.repeats, "subsample draws per grid size");
  ess->add_option("--seed", es.seed, "master seed");
  ess->add_option("--out", es.out_dir, "output directory")->required();
  ess->add_option("--cities", es.cities_file, "city config for weather-backed tasks");
  ess->add_option("--weather-cache", es.weather_cache, "weather fixture/cache directory");
  ess->add_option("--weather-endpoint", es.weather_endpoint, "archive API base URL");
  ess->add_option("--years", [&es](const std::vector<std::string>& vals) {
    const auto& s = vals[0];
    const auto dash = s.find(':');
    if (dash == std::string::npos) return false;
    es.year_from = std::stoi(s.substr(0, dash));
    es.year_to = std::stoi(s.substr(dash + 1));
    return true;
  }, "December range as FROM:TO (default 2014:2023)");
  bool es_online = false;
  ess->add_flag("--online", es_online, "allow live archive requests on cache miss");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*impute) {
      imp.methods = CLI::detail::split(imp_methods, ',');
      finish_gateway(imp.gateway, imp_backend);
      return sibyl::cmd_impute(imp);
    }
    if (*evaluate) return sibyl::cmd_evaluate(ev);
    if (*elicit) {
      el.models = CLI::detail::split(el_models, ',');
      el.personas.clear();
      for (auto&& p : CLI::detail::split(el_personas, ',')) {
        auto v = sibyl::persona_from_name(p);
        if (!v) throw sibyl::ConfigError("unknown persona: " + p);
        el.personas.push_back(*v);
      }
      el.protocols.clear();
      for (auto&& p : CLI::detail::split(el_protocols, ',')) {
        auto v = sibyl::protocol_from_name(p);
        if (!v) throw sibyl::ConfigError("unknown protocol: " + p);
        el.protocols.push_back(*v);
      }
      finish_gateway(el.gateway, el_backend);
      return sibyl::cmd_elicit(el);
    }
    if (*ess) {
      auto metric = sibyl::ess_metric_from_name(es_metric);
      if (!metric) throw sibyl::ConfigError("unknown metric: " + es_metric);
      es.metric = *metric;
      es.offline = !es_online;
      return sibyl::cmd_ess(es);
    }
  } catch (const sibyl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return sibyl::kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return sibyl::kExitPartial;
  }
  return 0;
}
