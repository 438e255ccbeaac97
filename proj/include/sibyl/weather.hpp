#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "sibyl/digest.hpp"
#include "sibyl/table.hpp"  // format_number

namespace sibyl {

struct WeatherError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CityConfig {
  std::string name;
  std::string country;
  double latitude = 0.0;
  double longitude = 0.0;
  std::string population_class;  // "small" | "large"
};

inline std::vector<CityConfig> load_cities(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw WeatherError("cannot open city config " + path.string());
  const auto j = nlohmann::json::parse(in);
  std::vector<CityConfig> out;
  for (const auto& cj : j.at("cities")) {
    CityConfig c;
    c.name = cj.at("name");
    c.country = cj.value("country", "");
    c.latitude = cj.at("latitude");
    c.longitude = cj.at("longitude");
    c.population_class = cj.value("population_class", "");
    if (c.latitude < -90 || c.latitude > 90 || c.longitude < -180 || c.longitude > 180)
      throw WeatherError("bad coordinates for city " + c.name);
    out.push_back(std::move(c));
  }
  return out;
}

struct DailyWeather {
  std::string date;  // YYYY-MM-DD
  double t_mean_c = 0.0;
  double precip_mm = 0.0;
};

/// December daily weather history for one city.
struct CitySeries {
  CityConfig city;
  int year_from = 0;
  int year_to = 0;
  std::vector<DailyWeather> days;

  std::vector<double> temperatures() const {
    std::vector<double> v;
    v.reserve(days.size());
    for (const auto& d : days) v.push_back(d.t_mean_c);
    return v;
  }
  std::vector<double> precipitation() const {
    std::vector<double> v;
    v.reserve(days.size());
    for (const auto& d : days) v.push_back(d.precip_mm);
    return v;
  }

  void validate() const {
    for (const auto& d : days) {
      if (d.date.size() != 10 || d.date.substr(5, 2) != "12")
        throw WeatherError("non-December date in series: " + d.date);
      const int year = std::stoi(d.date.substr(0, 4));
      if (year < year_from || year > year_to)
        throw WeatherError("date outside requested range: " + d.date);
      if (!std::isfinite(d.t_mean_c))
        throw WeatherError("non-finite temperature on " + d.date);
      if (!(d.precip_mm >= 0.0))
        throw WeatherError("negative precipitation on " + d.date);
    }
  }
};

/// Client for an open-meteo-style archive endpoint with a digest-keyed
/// fixture cache. One archive request covers a city's whole December range;
/// replays are byte-stable because the raw response body is what gets cached.
class WeatherClient {
 public:
  struct Config {
    std::string base_url = "https://archive-api.open-meteo.com";
    std::filesystem::path cache_dir;
    bool offline = false;
    int max_attempts = 3;
    int backoff_ms = 500;
    int timeout_sec = 60;
  };
  /// Returns the raw response body for a path+query; throws on failure.
  using Transport = std::function<std::string(const std::string&)>;

  explicit WeatherClient(Config cfg, Transport transport = {})
      : cfg_(std::move(cfg)), transport_(std::move(transport)) {
    if (!cfg_.cache_dir.empty()) std::filesystem::create_directories(cfg_.cache_dir);
  }

  /// Canonical query string; its SHA-256 is the cache key, independent of the
  /// configured endpoint.
  static std::string request_query(const CityConfig& city, int year_from, int year_to) {
    return "latitude=" + format_number(city.latitude) +
           "&longitude=" + format_number(city.longitude) +
           "&start_date=" + std::to_string(year_from) + "-12-01" +
           "&end_date=" + std::to_string(year_to) + "-12-31" +
           "&daily=temperature_2m_mean,precipitation_sum&timezone=UTC";
  }

  CitySeries fetch_city(const CityConfig& city, int year_from, int year_to) {
    if (year_from > year_to) throw WeatherError("empty year range");
    const std::string query = request_query(city, year_from, year_to);
    const std::string key = sha256_hex(query);
    std::string body;
    if (auto cached = cache_lookup(key)) {
      body = *cached;
    } else {
      if (cfg_.offline)
        throw WeatherError("offline mode: no fixture for " + city.name + " (key " + key + ")");
      body = http_get("/v1/archive?" + query);
      ++network_calls_;
      cache_store(key, body);
    }
    return parse_series(city, year_from, year_to, body);
  }

  long network_calls() const { return network_calls_; }

 private:
  std::optional<std::string> cache_lookup(const std::string& key) const {
    if (cfg_.cache_dir.empty()) return std::nullopt;
    std::ifstream in(cfg_.cache_dir / (key + ".json"), std::ios::binary);
    if (!in) return std::nullopt;
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
  }
  void cache_store(const std::string& key, const std::string& body) const {
    if (cfg_.cache_dir.empty()) return;
    const auto path = cfg_.cache_dir / (key + ".json");
    const auto tmp = cfg_.cache_dir / (key + ".tmp");
    {
      std::ofstream out(tmp, std::ios::binary);
      out << body;
    }
    std::filesystem::rename(tmp, path);
  }

  std::string http_get(const std::string& path_and_query) {
    if (transport_) return transport_(path_and_query);
    std::string last_error;
    for (int attempt = 0; attempt < cfg_.max_attempts; ++attempt) {
      if (attempt > 0)
        std::this_thread::sleep_for(
            std::chrono::milliseconds(cfg_.backoff_ms << (attempt - 1)));
      httplib::Client client(cfg_.base_url);
      client.set_connection_timeout(cfg_.timeout_sec, 0);
      client.set_read_timeout(cfg_.timeout_sec, 0);
      auto res = client.Get(path_and_query);
      if (!res) {
        last_error = "transport: " + httplib::to_string(res.error());
        continue;
      }
      if (res->status == 429 || res->status >= 500) {
        last_error = "status " + std::to_string(res->status);
        continue;
      }
      if (res->status != 200)
        throw WeatherError("archive endpoint returned status " + std::to_string(res->status));
      return res->body;
    }
    throw WeatherError("archive request failed after " + std::to_string(cfg_.max_attempts) +
                       " attempts: " + last_error);
  }

  CitySeries parse_series(const CityConfig& city, int year_from, int year_to,
                          const std::string& body) const {
    const auto j = nlohmann::json::parse(body, nullptr, false);
    if (j.is_discarded() || !j.contains("daily"))
      throw WeatherError("malformed archive payload for " + city.name);
    const auto& daily = j["daily"];
    const auto& time = daily.at("time");
    const auto& temp = daily.at("temperature_2m_mean");
    const auto& prec = daily.at("precipitation_sum");
    if (time.size() != temp.size() || time.size() != prec.size())
      throw WeatherError("ragged daily arrays for " + city.name);

    CitySeries series;
    series.city = city;
    series.year_from = year_from;
    series.year_to = year_to;
    for (std::size_t i = 0; i < time.size(); ++i) {
      const std::string date = time[i].get<std::string>();
      if (date.size() != 10 || date.substr(5, 2) != "12") continue;  // December only
      if (temp[i].is_null() || prec[i].is_null()) continue;          // archive gap
      DailyWeather d;
      d.date = date;
      d.t_mean_c = temp[i].get<double>();
      d.precip_mm = prec[i].get<double>();
      series.days.push_back(std::move(d));
    }
    series.validate();
    return series;
  }

  Config cfg_;
  Transport transport_;
  std::atomic<long> network_calls_{0};
};

}  // namespace sibyl
