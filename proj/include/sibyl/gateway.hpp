#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <regex>
#include <semaphore>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "sibyl/digest.hpp"

namespace sibyl {

enum class GatewayErrc { Transport, RateLimited, EmptyResponse, Offline, NotConfigured };

struct GatewayError : std::runtime_error {
  GatewayErrc code;
  GatewayError(GatewayErrc c, const std::string& what) : std::runtime_error(what), code(c) {}
};

enum class ExchangeSource { Live, Cache, Mock };

/// One chat completion: the atom of the gateway and its replay cache.
/// All harness traffic is pinned to temperature 0.
struct ChatExchange {
  std::string model;
  std::string system;
  std::string user;
  double temperature = 0.0;
  std::string response;
  long latency_ms = 0;
  ExchangeSource source = ExchangeSource::Mock;

  nlohmann::json to_json() const {
    const char* src = source == ExchangeSource::Live    ? "live"
                      : source == ExchangeSource::Cache ? "cache"
                                                        : "mock";
    return {{"model", model},        {"system", system},
            {"user", user},          {"temperature", temperature},
            {"response", response},  {"latency_ms", latency_ms},
            {"source", src}};
  }
  static ChatExchange from_json(const nlohmann::json& j) {
    ChatExchange e;
    e.model = j.at("model");
    e.system = j.at("system");
    e.user = j.at("user");
    e.temperature = j.at("temperature");
    e.response = j.at("response");
    e.latency_ms = j.value("latency_ms", 0L);
    const std::string src = j.value("source", "live");
    e.source = src == "live" ? ExchangeSource::Live
               : src == "mock" ? ExchangeSource::Mock
                               : ExchangeSource::Cache;
    return e;
  }
};

/// Scripted test double: first matching entry wins, fallback always defined.
struct MockScript {
  struct Entry {
    std::string match;      // substring, or ECMAScript regex when is_regex
    std::string response;
    bool is_regex = false;
  };
  std::vector<Entry> entries;
  std::string fallback;

  const std::string& respond(const std::string& user) const {
    for (const auto& e : entries) {
      if (e.is_regex) {
        if (std::regex_search(user, std::regex(e.match))) return e.response;
      } else if (user.find(e.match) != std::string::npos) {
        return e.response;
      }
    }
    return fallback;
  }

  static MockScript from_json(const nlohmann::json& j) {
    MockScript s;
    for (const auto& ej : j.value("entries", nlohmann::json::array())) {
      Entry e;
      e.match = ej.at("match");
      e.response = ej.at("response");
      e.is_regex = ej.value("regex", false);
      s.entries.push_back(std::move(e));
    }
    s.fallback = j.value("fallback", std::string{});
    return s;
  }
  static MockScript from_file(const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) throw GatewayError(GatewayErrc::NotConfigured, "cannot open mock script " + p.string());
    return from_json(nlohmann::json::parse(in));
  }
};

enum class GatewayBackend { Live, Mock };

struct GatewayConfig {
  GatewayBackend backend = GatewayBackend::Mock;
  std::string base_url;             // e.g. http://localhost:8080 or https://api.example.com
  std::string api_key;
  std::string chat_path = "/v1/chat/completions";
  std::filesystem::path cache_dir;  // empty: in-memory cache only
  bool offline = false;             // forbid live calls entirely
  int max_attempts = 3;
  int backoff_initial_ms = 1000;
  int max_in_flight = 4;
  int timeout_sec = 120;
};

/// Uniform chat-completion interface over a live OpenAI-style endpoint, a
/// content-addressed replay cache and a scripted mock. Safe for concurrent
/// callers; cache writes are write-temp-then-rename.
class Gateway {
 public:
  explicit Gateway(GatewayConfig cfg, MockScript mock = {})
      : cfg_(std::move(cfg)), mock_(std::move(mock)), in_flight_(cfg_.max_in_flight) {
    if (!cfg_.cache_dir.empty()) std::filesystem::create_directories(cfg_.cache_dir);
  }

  /// Cache key: SHA-256 over the canonical (model, system, user, temperature)
  /// tuple.
  static std::string digest(const std::string& model, const std::string& system,
                            const std::string& user, double temperature) {
    nlohmann::json key = nlohmann::json::array({model, system, user, temperature});
    return sha256_hex(key.dump());
  }

  ChatExchange complete(const std::string& model, const std::string& system,
                        const std::string& user) {
    if (system.empty() || user.empty())
      throw GatewayError(GatewayErrc::NotConfigured, "prompts must be nonempty");
    if (model.empty())
      throw GatewayError(GatewayErrc::NotConfigured, "no model configured");
    const std::string key = digest(model, system, user, 0.0);

    if (auto hit = cache_lookup(key)) {
      hit->source = ExchangeSource::Cache;
      ++stats_.cache_hits;
      return *hit;
    }

    ChatExchange ex;
    ex.model = model;
    ex.system = system;
    ex.user = user;
    if (cfg_.backend == GatewayBackend::Mock) {
      ex.response = mock_.respond(user);
      ex.source = ExchangeSource::Mock;
      ++stats_.mock_calls;
    } else {
      if (cfg_.offline)
        throw GatewayError(GatewayErrc::Offline,
                           "offline mode: live call forbidden (cache miss for key " + key + ")");
      ex = live_call(model, system, user);
      ++stats_.live_calls;
    }
    if (ex.response.empty())
      throw GatewayError(GatewayErrc::EmptyResponse, "empty response from backend");
    cache_store(key, ex);
    return ex;
  }

  struct Stats {
    std::atomic<long> live_calls{0};
    std::atomic<long> mock_calls{0};
    std::atomic<long> cache_hits{0};
    std::atomic<long> retries{0};
  };
  const Stats& stats() const { return stats_; }
  long backend_calls() const { return stats_.live_calls + stats_.mock_calls; }
  const GatewayConfig& config() const { return cfg_; }

 private:
  std::optional<ChatExchange> cache_lookup(const std::string& key) {
    {
      std::lock_guard lock(mu_);
      auto it = memory_.find(key);
      if (it != memory_.end()) return it->second;
    }
    if (cfg_.cache_dir.empty()) return std::nullopt;
    const auto path = cfg_.cache_dir / (key + ".json");
    std::ifstream in(path);
    if (!in) return std::nullopt;
    auto ex = ChatExchange::from_json(nlohmann::json::parse(in));
    std::lock_guard lock(mu_);
    memory_.emplace(key, ex);
    return ex;
  }

  void cache_store(const std::string& key, const ChatExchange& ex) {
    {
      std::lock_guard lock(mu_);
      memory_[key] = ex;
    }
    if (cfg_.cache_dir.empty()) return;
    const auto path = cfg_.cache_dir / (key + ".json");
    const auto tmp = cfg_.cache_dir / (key + ".tmp." + std::to_string(
        std::hash<std::thread::id>{}(std::this_thread::get_id())));
    {
      std::ofstream out(tmp, std::ios::binary);
      out << ex.to_json().dump(2) << "\n";
    }
    std::filesystem::rename(tmp, path);
  }

  ChatExchange live_call(const std::string& model, const std::string& system,
                         const std::string& user) {
    in_flight_.acquire();
    struct Release {
      std::counting_semaphore<>& s;
      ~Release() { s.release(); }
    } release{in_flight_};

    nlohmann::json body{
        {"model", model},
        {"temperature", 0.0},
        {"messages",
         {{{"role", "system"}, {"content", system}}, {{"role", "user"}, {"content", user}}}}};
    const std::string payload = body.dump();

    std::string last_error;
    for (int attempt = 0; attempt < cfg_.max_attempts; ++attempt) {
      if (attempt > 0) {
        ++stats_.retries;
        std::this_thread::sleep_for(
            std::chrono::milliseconds(cfg_.backoff_initial_ms << (attempt - 1)));
      }
      httplib::Client client(cfg_.base_url);
      client.set_connection_timeout(cfg_.timeout_sec, 0);
      client.set_read_timeout(cfg_.timeout_sec, 0);
      httplib::Headers headers;
      if (!cfg_.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg_.api_key);
      const auto t0 = std::chrono::steady_clock::now();
      auto res = client.Post(cfg_.chat_path, headers, payload, "application/json");
      const auto t1 = std::chrono::steady_clock::now();
      if (!res) {
        last_error = "transport: " + httplib::to_string(res.error());
        continue;
      }
      if (res->status == 429 || res->status >= 500) {
        last_error = "status " + std::to_string(res->status);
        continue;
      }
      if (res->status != 200)
        throw GatewayError(GatewayErrc::Transport,
                           "endpoint returned status " + std::to_string(res->status));
      nlohmann::json rj = nlohmann::json::parse(res->body, nullptr, false);
      if (rj.is_discarded())
        throw GatewayError(GatewayErrc::Transport, "endpoint returned malformed JSON");
      ChatExchange ex;
      ex.model = model;
      ex.system = system;
      ex.user = user;
      ex.response = rj.at("choices").at(0).at("message").at("content").get<std::string>();
      ex.latency_ms =
          std::chrono::duration_cast<std::chrono::milliseconds>(t1 - t0).count();
      ex.source = ExchangeSource::Live;
      return ex;
    }
    const bool rate = last_error.find("429") != std::string::npos;
    throw GatewayError(rate ? GatewayErrc::RateLimited : GatewayErrc::Transport,
                       "live call failed after " + std::to_string(cfg_.max_attempts) +
                           " attempts: " + last_error);
  }

  GatewayConfig cfg_;
  MockScript mock_;
  std::counting_semaphore<> in_flight_;
  std::mutex mu_;
  std::map<std::string, ChatExchange> memory_;
  Stats stats_;
};

}  // namespace sibyl
