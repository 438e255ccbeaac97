#include <catch2/catch_amalgamated.hpp>

#include <set>
#include <thread>

#include "sibyl/gateway.hpp"
#include "test_support.hpp"

using namespace sibyl;
using testutil::TempDir;

namespace {

MockScript basic_script() {
  MockScript s;
  s.entries = {{"<missing>", "{\"output\": 5}", false},
               {"Here is the description of the dataset", "You are a veteran credit risk officer.", false}};
  s.fallback = "{\"output\": 0}";
  return s;
}

GatewayConfig mock_config(const std::filesystem::path& cache = {}) {
  GatewayConfig cfg;
  cfg.backend = GatewayBackend::Mock;
  cfg.cache_dir = cache;
  return cfg;
}

}  // namespace

TEST_CASE("mock gateway answers by first matching entry") {
  Gateway gw(mock_config(), basic_script());
  const auto ex = gw.complete("m", "sys", "The Age is <missing>.");
  CHECK(ex.response == "{\"output\": 5}");
  CHECK(ex.source == ExchangeSource::Mock);
  CHECK(gw.complete("m", "sys", "unrelated").response == "{\"output\": 0}");
}

TEST_CASE("second identical call is served from cache") {
  Gateway gw(mock_config(), basic_script());
  const auto first = gw.complete("m", "sys", "hello world");
  const auto second = gw.complete("m", "sys", "hello world");
  CHECK(second.source == ExchangeSource::Cache);
  CHECK(second.response == first.response);
  CHECK(gw.backend_calls() == 1);
  CHECK(gw.stats().cache_hits == 1);
}

TEST_CASE("disk cache survives gateway restarts byte-identically") {
  TempDir tmp;
  std::string response;
  {
    Gateway gw(mock_config(tmp.path), basic_script());
    response = gw.complete("m", "sys", "persist me").response;
  }
  {
    MockScript other;
    other.fallback = "DIFFERENT";
    Gateway gw(mock_config(tmp.path), other);
    const auto ex = gw.complete("m", "sys", "persist me");
    CHECK(ex.source == ExchangeSource::Cache);
    CHECK(ex.response == response);
    CHECK(gw.backend_calls() == 0);
  }
}

TEST_CASE("cache keys differ across prompts, models and roles") {
  std::set<std::string> keys;
  rng::Engine eng(7);
  auto random_text = [&] {
    std::string s;
    const int len = 1 + static_cast<int>(rng::below(eng, 40));
    for (int i = 0; i < len; ++i) s.push_back(static_cast<char>('a' + rng::below(eng, 26)));
    return s;
  };
  const int trials = 10000;
  for (int i = 0; i < trials; ++i)
    keys.insert(Gateway::digest(random_text(), random_text(), random_text(), 0.0));
  // collisions would shrink the set (random texts may repeat; allow slack)
  CHECK(keys.size() > trials * 0.99);
  // role boundaries matter: (ab, c) vs (a, bc)
  CHECK(Gateway::digest("m", "ab", "c", 0.0) != Gateway::digest("m", "a", "bc", 0.0));
}

TEST_CASE("empty prompts and empty responses are rejected") {
  MockScript s;
  s.fallback = "";
  Gateway gw(mock_config(), s);
  CHECK_THROWS_AS(gw.complete("m", "", "user"), GatewayError);
  CHECK_THROWS_AS(gw.complete("", "sys", "user"), GatewayError);
  try {
    gw.complete("m", "sys", "user");
    FAIL("expected EmptyResponse");
  } catch (const GatewayError& e) {
    CHECK(e.code == GatewayErrc::EmptyResponse);
  }
}

TEST_CASE("live backend talks to an OpenAI-style endpoint") {
  httplib::Server server;
  std::atomic<int> calls{0};
  server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    ++calls;
    const auto body = nlohmann::json::parse(req.body);
    REQUIRE(body.at("temperature").get<double>() == 0.0);
    const std::string user = body.at("messages").at(1).at("content");
    nlohmann::json reply{
        {"choices", {{{"message", {{"role", "assistant"}, {"content", "echo: " + user}}}}}}};
    res.set_content(reply.dump(), "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread runner([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  GatewayConfig cfg;
  cfg.backend = GatewayBackend::Live;
  cfg.base_url = "http://127.0.0.1:" + std::to_string(port);
  cfg.backoff_initial_ms = 1;
  Gateway gw(cfg);
  const auto ex = gw.complete("test-model", "sys", "ping");
  CHECK(ex.response == "echo: ping");
  CHECK(ex.source == ExchangeSource::Live);
  CHECK(gw.stats().live_calls == 1);
  // cached on the second round
  CHECK(gw.complete("test-model", "sys", "ping").source == ExchangeSource::Cache);
  CHECK(calls == 1);

  server.stop();
  runner.join();
}

TEST_CASE("transient 500s are retried, hard failures give up after 3 attempts") {
  httplib::Server server;
  std::atomic<int> calls{0};
  server.Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    ++calls;
    if (calls < 3) {
      res.status = 500;
      return;
    }
    nlohmann::json reply{
        {"choices", {{{"message", {{"role", "assistant"}, {"content", "ok"}}}}}}};
    res.set_content(reply.dump(), "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread runner([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  GatewayConfig cfg;
  cfg.backend = GatewayBackend::Live;
  cfg.base_url = "http://127.0.0.1:" + std::to_string(port);
  cfg.backoff_initial_ms = 1;
  Gateway gw(cfg);
  CHECK(gw.complete("m", "s", "u").response == "ok");
  CHECK(calls == 3);
  CHECK(gw.stats().retries == 2);
  server.stop();
  runner.join();
}

TEST_CASE("unreachable endpoint raises a transport error after retries") {
  GatewayConfig cfg;
  cfg.backend = GatewayBackend::Live;
  cfg.base_url = "http://127.0.0.1:1";  // nothing listens there
  cfg.backoff_initial_ms = 1;
  cfg.timeout_sec = 1;
  Gateway gw(cfg);
  try {
    gw.complete("m", "s", "u");
    FAIL("expected transport error");
  } catch (const GatewayError& e) {
    CHECK(e.code == GatewayErrc::Transport);
  }
}

TEST_CASE("offline live gateway refuses cache misses but serves hits") {
  TempDir tmp;
  {
    Gateway warm(mock_config(tmp.path), basic_script());
    warm.complete("m", "sys", "warmed");
  }
  GatewayConfig cfg;
  cfg.backend = GatewayBackend::Live;
  cfg.base_url = "http://127.0.0.1:1";
  cfg.offline = true;
  cfg.cache_dir = tmp.path;
  Gateway gw(cfg);
  CHECK(gw.complete("m", "sys", "warmed").source == ExchangeSource::Cache);
  try {
    gw.complete("m", "sys", "cold");
    FAIL("expected Offline error");
  } catch (const GatewayError& e) {
    CHECK(e.code == GatewayErrc::Offline);
  }
}

TEST_CASE("concurrent callers observe consistent cache behavior") {
  TempDir tmp;
  Gateway gw(mock_config(tmp.path), basic_script());
  std::vector<std::thread> threads;
  std::vector<std::string> results(8);
  for (int i = 0; i < 8; ++i) {
    threads.emplace_back([&, i] {
      results[i] = gw.complete("m", "sys", "prompt " + std::to_string(i % 2)).response;
    });
  }
  for (auto& t : threads) t.join();
  for (const auto& r : results) CHECK(r == "{\"output\": 0}");
  CHECK(gw.backend_calls() <= 8);
  CHECK(gw.backend_calls() >= 2);
}
