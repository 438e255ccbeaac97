// Generates synthetic-but-plausible December weather fixtures for every
// configured city, keyed by the same request digest the client computes, so
// offline runs replay them byte-for-byte. The series are seeded per city and
// labeled as synthetic in the fixture payload.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <nlohmann/json.hpp>

#include "sibyl/digest.hpp"
#include "sibyl/rng.hpp"
#include "sibyl/weather.hpp"

using nlohmann::json;

namespace {

int december_days(int year) {
  (void)year;
  return 31;
}

double round1(double v) { return std::round(v * 10.0) / 10.0; }

json synthesize(const sibyl::CityConfig& city, int year_from, int year_to) {
  sibyl::rng::Engine eng(sibyl::sha256_hex(city.name).size() +
                         std::hash<std::string>{}(city.name));
  // December climate by hemisphere and latitude band, plus altitude-free noise
  const bool southern = city.latitude < 0.0;
  const double abs_lat = std::abs(city.latitude);
  const double base_temp = southern ? 26.0 - abs_lat * 0.35 : 24.0 - abs_lat * 0.55;
  const double wet_prob = 0.25 + 0.3 * std::exp(-std::abs(abs_lat - 50.0) / 25.0);

  json time = json::array(), temp = json::array(), prec = json::array();
  for (int year = year_from; year <= year_to; ++year) {
    const double year_offset = sibyl::rng::gaussian(eng) * 1.2;
    for (int day = 1; day <= december_days(year); ++day) {
      char date[16];
      std::snprintf(date, sizeof(date), "%04d-12-%02d", year, day);
      time.push_back(date);
      temp.push_back(round1(base_temp + year_offset + sibyl::rng::gaussian(eng) * 3.0));
      double p = 0.0;
      if (sibyl::rng::unit(eng) < wet_prob) {
        const double g = sibyl::rng::gaussian(eng);
        p = round1(std::min(80.0, std::exp(0.8 + 0.9 * g)));
      }
      prec.push_back(p);
    }
  }
  return json{{"latitude", city.latitude},
              {"longitude", city.longitude},
              {"generationtime_ms", 0.0},
              {"timezone", "UTC"},
              {"note", "synthetic fixture series, not measured data"},
              {"daily_units",
               {{"time", "iso8601"},
                {"temperature_2m_mean", "°C"},
                {"precipitation_sum", "mm"}}},
              {"daily",
               {{"time", time}, {"temperature_2m_mean", temp}, {"precipitation_sum", prec}}}};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 5) {
    std::cerr << "usage: weather_fixture_gen <cities.json> <out_dir> <year_from> <year_to>\n";
    return 2;
  }
  const auto cities = sibyl::load_cities(argv[1]);
  const std::filesystem::path out_dir = argv[2];
  const int year_from = std::stoi(argv[3]);
  const int year_to = std::stoi(argv[4]);
  std::filesystem::create_directories(out_dir);
  for (const auto& city : cities) {
    const std::string query = sibyl::WeatherClient::request_query(city, year_from, year_to);
    const std::string key = sibyl::sha256_hex(query);
    const json payload = synthesize(city, year_from, year_to);
    std::ofstream out(out_dir / (key + ".json"), std::ios::binary);
    out << payload.dump() << "\n";
    std::cout << key << "  " << city.name << "\n";
  }
  return 0;
}
