#include <catch2/catch_amalgamated.hpp>

#include "sibyl/distributions.hpp"
#include "sibyl/rng.hpp"

using namespace sibyl;

TEST_CASE("parameter invariants are enforced at construction") {
  CHECK_THROWS_AS(ParametricDistribution::normal(0, -1), DistributionError);
  CHECK_THROWS_AS(ParametricDistribution::normal(0, 0), DistributionError);
  CHECK_THROWS_AS(ParametricDistribution::beta(-2, 5), DistributionError);
  CHECK_THROWS_AS(ParametricDistribution::gamma(1, 0), DistributionError);
  CHECK_THROWS_AS(ParametricDistribution::student_t(0, 0, 1), DistributionError);
  CHECK_THROWS_AS(ParametricDistribution::uniform(2, 2), DistributionError);
  CHECK_NOTHROW(ParametricDistribution::lognormal(-1, 0.5));
}

TEST_CASE("densities integrate to one") {
  const std::vector<ParametricDistribution> dists = {
      ParametricDistribution::normal(2, 3),
      ParametricDistribution::student_t(5, -1, 2),
      ParametricDistribution::beta(2, 5),
      ParametricDistribution::gamma(3, 0.5),
      ParametricDistribution::lognormal(0.5, 0.8),
      ParametricDistribution::uniform(-2, 7),
  };
  for (const auto& d : dists) {
    const double lo = d.quantile(1e-10);
    const double hi = d.quantile(1.0 - 1e-10);
    const double mass =
        quad::integrate([&](double t) { return d.pdf(t); }, lo, hi, 1e-9);
    INFO(d.to_text());
    CHECK(mass == Catch::Approx(1.0).margin(1e-6));
  }
}

TEST_CASE("cdf is consistent with quantile") {
  const auto d = ParametricDistribution::gamma(2.5, 1.5);
  for (double p : {0.01, 0.1, 0.5, 0.9, 0.99})
    CHECK(d.cdf(d.quantile(p)) == Catch::Approx(p).margin(1e-9));
}

TEST_CASE("parse_distribution reads canonical responses") {
  const auto r = parse_distribution("`y ~ normal(120, 10)`", Family::Normal);
  REQUIRE(r.ok());
  CHECK(r.dist->family == Family::Normal);
  CHECK(r.dist->params == std::vector<double>{120.0, 10.0});

  const auto rb = parse_distribution("`y ~ beta(2, 5)`", Family::Beta);
  REQUIRE(rb.ok());
  CHECK(rb.dist->params == std::vector<double>{2.0, 5.0});
}

TEST_CASE("parse_distribution takes the last backticked expression") {
  const std::string response =
      "Let us start from `y ~ normal(0, 1)` as a sketch...\n"
      "after the discussion, my final answer is `y ~ normal(5.5, 2.25)`";
  const auto r = parse_distribution(response, Family::Normal);
  REQUIRE(r.ok());
  CHECK(r.dist->params == std::vector<double>{5.5, 2.25});
}

TEST_CASE("parse_distribution error taxonomy") {
  CHECK(parse_distribution("sorry, no idea", Family::Normal).error ==
        DistParseErrc::NoDistributionFound);
  CHECK(parse_distribution("`y ~ beta(2, 5)`", Family::Normal).error ==
        DistParseErrc::FamilyMismatch);
  CHECK(parse_distribution("`y ~ normal(0, -1)`", Family::Normal).error ==
        DistParseErrc::InvalidParameters);
  CHECK(parse_distribution("`y ~ normal(a, b)`", Family::Normal).error ==
        DistParseErrc::InvalidParameters);
  CHECK(parse_distribution("`y ~ student_t(3, 1)`", Family::StudentT).error ==
        DistParseErrc::AmbiguousArity);
  const auto t3 = parse_distribution("`y ~ student_t(30, 0.2, 0.1)`", Family::StudentT);
  REQUIRE(t3.ok());
  CHECK(t3.dist->params == std::vector<double>{30.0, 0.2, 0.1});
}

TEST_CASE("parsed distributions satisfy invariants or parsing fails") {
  rng::Engine eng(202);
  const Family families[] = {Family::Normal, Family::Beta, Family::Gamma, Family::Lognormal};
  for (int i = 0; i < 400; ++i) {
    const Family f = families[rng::below(eng, 4)];
    const double a = std::round((rng::gaussian(eng) * 3) * 100) / 100.0;
    const double b = std::round((rng::gaussian(eng) * 3) * 100) / 100.0;
    const std::string text = "`y ~ " + std::string(family_name(f)) + "(" + format_number(a) +
                             ", " + format_number(b) + ")`";
    const auto r = parse_distribution(text, f);
    if (r.ok()) {
      CHECK_NOTHROW(r.dist->check());
    } else {
      CHECK(r.error == DistParseErrc::InvalidParameters);
    }
  }
}

TEST_CASE("log_loss closed-form anchors") {
  // standard normal at 0: 0.5 * log(2 pi)
  CHECK(log_loss(ParametricDistribution::normal(0, 1), {0.0}) ==
        Catch::Approx(0.9189385332).margin(1e-7));
  // uniform density 1 on [0,1]
  CHECK(log_loss(ParametricDistribution::uniform(0, 1), {0.3, 0.7, 0.9}) ==
        Catch::Approx(0.0).margin(1e-12));
  // beta(2,2) at 1/2 has density 1.5
  CHECK(log_loss(ParametricDistribution::beta(2, 2), {0.5}) ==
        Catch::Approx(-std::log(1.5)).margin(1e-9));
}

TEST_CASE("log_loss clamps boundary observations for bounded families") {
  const auto b = ParametricDistribution::beta(2, 2);
  CHECK(std::isfinite(log_loss(b, {0.0, 1.0, 0.5})));
  CHECK_THROWS_AS(log_loss(b, {1.5}), DistributionError);
  const auto g = ParametricDistribution::gamma(2, 1);
  CHECK(std::isfinite(log_loss(g, {0.0, 1.0})));
  CHECK_THROWS_AS(log_loss(g, {-0.5}), DistributionError);
}

TEST_CASE("normal crps closed form matches the frozen value") {
  CHECK(crps(ParametricDistribution::normal(0, 1), 0.0) ==
        Catch::Approx(0.2336950).margin(1e-5));
}

TEST_CASE("closed form and quadrature agree over a grid") {
  rng::Engine eng(606);
  for (int i = 0; i < 100; ++i) {
    const double mu = rng::gaussian(eng) * 5;
    const double sigma = 0.1 + rng::unit(eng) * 5;
    const double x = mu + rng::gaussian(eng) * 3 * sigma;
    const auto d = ParametricDistribution::normal(mu, sigma);
    CHECK(crps_normal(mu, sigma, x) == Catch::Approx(crps_quadrature(d, x)).margin(1e-6));
  }
}

TEST_CASE("crps scales linearly in sigma at the center") {
  const double c1 = crps(ParametricDistribution::normal(0, 1), 0.0);
  const double c2 = crps(ParametricDistribution::normal(0, 2), 0.0);
  CHECK(c2 == Catch::Approx(2.0 * c1).margin(1e-9));
}

TEST_CASE("near-degenerate forecasts score near zero at the truth") {
  CHECK(crps(ParametricDistribution::normal(0, 1e-9), 0.0) ==
        Catch::Approx(0.0).margin(1e-8));
}

TEST_CASE("uniform crps has a closed form to verify the quadrature against") {
  // F(t)=t on [0,1]: crps(x) = x^3/3 + (1-x)^3/3
  const auto u = ParametricDistribution::uniform(0, 1);
  for (double x : {0.1, 0.25, 0.5, 0.8}) {
    const double expect = x * x * x / 3.0 + std::pow(1.0 - x, 3) / 3.0;
    CHECK(crps(u, x) == Catch::Approx(expect).margin(1e-7));
  }
  // outside the support the score grows linearly
  CHECK(crps(u, 2.0) == Catch::Approx(1.0 / 3.0 + 1.0).margin(1e-6));
}

TEST_CASE("crps is nonnegative across families and observations") {
  rng::Engine eng(14);
  const std::vector<ParametricDistribution> dists = {
      ParametricDistribution::normal(1, 2), ParametricDistribution::student_t(4, 0, 1),
      ParametricDistribution::beta(2, 3), ParametricDistribution::gamma(2, 0.7),
      ParametricDistribution::lognormal(0, 0.6)};
  for (const auto& d : dists) {
    for (int i = 0; i < 10; ++i) {
      const double x = d.quantile(0.02 + 0.96 * rng::unit(eng));
      CHECK(crps(d, x) >= 0.0);
    }
  }
}

TEST_CASE("crps rejects infinite-mean forecasts") {
  CHECK_THROWS_AS(crps(ParametricDistribution::student_t(1, 0, 1), 0.0), DistributionError);
  CHECK_NOTHROW(crps(ParametricDistribution::student_t(1.5, 0, 1), 0.0));
}

TEST_CASE("mean_crps equals the average of pointwise scores") {
  rng::Engine eng(77);
  const std::vector<ParametricDistribution> dists = {
      ParametricDistribution::normal(0, 1.5), ParametricDistribution::gamma(2, 1),
      ParametricDistribution::beta(2, 4)};
  for (const auto& d : dists) {
    std::vector<double> xs;
    for (int i = 0; i < 12; ++i) xs.push_back(d.quantile(0.05 + 0.9 * rng::unit(eng)));
    double direct = 0.0;
    for (double x : xs) direct += crps(d, x);
    direct /= xs.size();
    CHECK(mean_crps(d, xs) == Catch::Approx(direct).margin(1e-5));
  }
}

TEST_CASE("distribution json round-trip") {
  const auto d = ParametricDistribution::student_t(5, 0.3, 1.2);
  const auto d2 = ParametricDistribution::from_json(d.to_json());
  CHECK(d2.family == d.family);
  CHECK(d2.params == d.params);
  CHECK(d.to_text() == "student_t(5, 0.3, 1.2)");
}
