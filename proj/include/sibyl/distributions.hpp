#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include <boost/math/distributions/beta.hpp>
#include <boost/math/distributions/gamma.hpp>
#include <boost/math/distributions/lognormal.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include <nlohmann/json.hpp>

#include "sibyl/table.hpp"  // format_number / parse_number

namespace sibyl {

enum class Family { Normal, StudentT, Beta, Gamma, Lognormal, Uniform };

inline const char* family_name(Family f) {
  switch (f) {
    case Family::Normal: return "normal";
    case Family::StudentT: return "student_t";
    case Family::Beta: return "beta";
    case Family::Gamma: return "gamma";
    case Family::Lognormal: return "lognormal";
    case Family::Uniform: return "uniform";
  }
  return "?";
}

inline std::optional<Family> family_from_name(std::string name) {
  std::transform(name.begin(), name.end(), name.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  if (name == "normal") return Family::Normal;
  if (name == "student_t") return Family::StudentT;
  if (name == "beta") return Family::Beta;
  if (name == "gamma") return Family::Gamma;
  if (name == "lognormal") return Family::Lognormal;
  if (name == "uniform") return Family::Uniform;
  return std::nullopt;
}

struct DistributionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Tagged union over the supported parametric families.
/// Parameter order follows Stan: normal(mu, sigma); student_t(nu, mu, sigma);
/// beta(alpha, beta); gamma(shape, rate); lognormal(mu, sigma);
/// uniform(lo, hi).
struct ParametricDistribution {
  Family family = Family::Normal;
  std::vector<double> params;

  static ParametricDistribution normal(double mu, double sigma) {
    return make(Family::Normal, {mu, sigma});
  }
  static ParametricDistribution student_t(double nu, double mu, double sigma) {
    return make(Family::StudentT, {nu, mu, sigma});
  }
  static ParametricDistribution beta(double a, double b) { return make(Family::Beta, {a, b}); }
  static ParametricDistribution gamma(double shape, double rate) {
    return make(Family::Gamma, {shape, rate});
  }
  static ParametricDistribution lognormal(double mu, double sigma) {
    return make(Family::Lognormal, {mu, sigma});
  }
  static ParametricDistribution uniform(double lo, double hi) {
    return make(Family::Uniform, {lo, hi});
  }

  static ParametricDistribution make(Family f, std::vector<double> p) {
    ParametricDistribution d{f, std::move(p)};
    d.check();
    return d;
  }

  /// Throws unless every parameter invariant holds — nothing gets clamped.
  void check() const {
    auto positive = [&](double v, const char* what) {
      if (!(v > 0.0) || !std::isfinite(v))
        throw DistributionError(std::string("InvalidParameters: ") + what +
                                " must be positive and finite");
    };
    for (double v : params)
      if (!std::isfinite(v)) throw DistributionError("InvalidParameters: non-finite parameter");
    switch (family) {
      case Family::Normal:
        expect_arity(2);
        positive(params[1], "sigma");
        break;
      case Family::StudentT:
        expect_arity(3);
        positive(params[0], "nu");
        positive(params[2], "sigma");
        break;
      case Family::Beta:
        expect_arity(2);
        positive(params[0], "alpha");
        positive(params[1], "beta");
        break;
      case Family::Gamma:
        expect_arity(2);
        positive(params[0], "shape");
        positive(params[1], "rate");
        break;
      case Family::Lognormal:
        expect_arity(2);
        positive(params[1], "sigma");
        break;
      case Family::Uniform:
        expect_arity(2);
        if (!(params[0] < params[1]))
          throw DistributionError("InvalidParameters: uniform needs lo < hi");
        break;
    }
  }

  double pdf(double x) const {
    using namespace boost::math;
    switch (family) {
      case Family::Normal:
        return boost::math::pdf(normal_distribution<>(params[0], params[1]), x);
      case Family::StudentT: {
        const double z = (x - params[1]) / params[2];
        return boost::math::pdf(students_t_distribution<>(params[0]), z) / params[2];
      }
      case Family::Beta:
        if (x <= 0.0 || x >= 1.0) return 0.0;
        return boost::math::pdf(beta_distribution<>(params[0], params[1]), x);
      case Family::Gamma:
        if (x <= 0.0) return 0.0;
        return boost::math::pdf(gamma_distribution<>(params[0], 1.0 / params[1]), x);
      case Family::Lognormal:
        if (x <= 0.0) return 0.0;
        return boost::math::pdf(lognormal_distribution<>(params[0], params[1]), x);
      case Family::Uniform:
        return (x >= params[0] && x <= params[1]) ? 1.0 / (params[1] - params[0]) : 0.0;
    }
    return 0.0;
  }

  double log_pdf(double x) const {
    const double d = pdf(x);
    if (d <= 0.0) throw DistributionError("log_pdf: observation outside support");
    return std::log(d);
  }

  double cdf(double x) const {
    using namespace boost::math;
    switch (family) {
      case Family::Normal:
        return boost::math::cdf(normal_distribution<>(params[0], params[1]), x);
      case Family::StudentT: {
        const double z = (x - params[1]) / params[2];
        return boost::math::cdf(students_t_distribution<>(params[0]), z);
      }
      case Family::Beta:
        if (x <= 0.0) return 0.0;
        if (x >= 1.0) return 1.0;
        return boost::math::cdf(beta_distribution<>(params[0], params[1]), x);
      case Family::Gamma:
        if (x <= 0.0) return 0.0;
        return boost::math::cdf(gamma_distribution<>(params[0], 1.0 / params[1]), x);
      case Family::Lognormal:
        if (x <= 0.0) return 0.0;
        return boost::math::cdf(lognormal_distribution<>(params[0], params[1]), x);
      case Family::Uniform:
        if (x <= params[0]) return 0.0;
        if (x >= params[1]) return 1.0;
        return (x - params[0]) / (params[1] - params[0]);
    }
    return 0.0;
  }

  double quantile(double p) const {
    using namespace boost::math;
    switch (family) {
      case Family::Normal:
        return boost::math::quantile(normal_distribution<>(params[0], params[1]), p);
      case Family::StudentT:
        return params[1] +
               params[2] * boost::math::quantile(students_t_distribution<>(params[0]), p);
      case Family::Beta:
        return boost::math::quantile(beta_distribution<>(params[0], params[1]), p);
      case Family::Gamma:
        return boost::math::quantile(gamma_distribution<>(params[0], 1.0 / params[1]), p);
      case Family::Lognormal:
        return boost::math::quantile(lognormal_distribution<>(params[0], params[1]), p);
      case Family::Uniform:
        return params[0] + p * (params[1] - params[0]);
    }
    return 0.0;
  }

  bool has_finite_mean() const {
    return family != Family::StudentT || params[0] > 1.0;
  }

  double mean() const {
    switch (family) {
      case Family::Normal: return params[0];
      case Family::StudentT:
        if (params[0] <= 1.0) throw DistributionError("mean undefined for nu <= 1");
        return params[1];
      case Family::Beta: return params[0] / (params[0] + params[1]);
      case Family::Gamma: return params[0] / params[1];
      case Family::Lognormal: return std::exp(params[0] + params[1] * params[1] / 2.0);
      case Family::Uniform: return (params[0] + params[1]) / 2.0;
    }
    return 0.0;
  }

  double support_lo() const {
    switch (family) {
      case Family::Beta: return 0.0;
      case Family::Gamma:
      case Family::Lognormal: return 0.0;
      case Family::Uniform: return params[0];
      default: return -std::numeric_limits<double>::infinity();
    }
  }
  double support_hi() const {
    switch (family) {
      case Family::Beta: return 1.0;
      case Family::Uniform: return params[1];
      default: return std::numeric_limits<double>::infinity();
    }
  }
  bool in_support(double x) const { return x >= support_lo() && x <= support_hi(); }

  std::string to_text() const {
    std::string out = family_name(family);
    out += "(";
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (i) out += ", ";
      out += format_number(params[i]);
    }
    out += ")";
    return out;
  }

  nlohmann::json to_json() const {
    return {{"family", family_name(family)}, {"params", params}};
  }
  static ParametricDistribution from_json(const nlohmann::json& j) {
    auto fam = family_from_name(j.at("family").get<std::string>());
    if (!fam) throw DistributionError("unknown family in JSON");
    return make(*fam, j.at("params").get<std::vector<double>>());
  }

 private:
  void expect_arity(std::size_t n) const {
    if (params.size() != n)
      throw DistributionError("InvalidParameters: " + std::string(family_name(family)) +
                              " expects " + std::to_string(n) + " parameters");
  }
};

enum class DistParseErrc { NoDistributionFound, FamilyMismatch, InvalidParameters, AmbiguousArity };

inline const char* to_string(DistParseErrc e) {
  switch (e) {
    case DistParseErrc::NoDistributionFound: return "NoDistributionFound";
    case DistParseErrc::FamilyMismatch: return "FamilyMismatch";
    case DistParseErrc::InvalidParameters: return "InvalidParameters";
    case DistParseErrc::AmbiguousArity: return "AmbiguousArity";
  }
  return "?";
}

struct DistParseResult {
  std::optional<ParametricDistribution> dist;
  DistParseErrc error = DistParseErrc::NoDistributionFound;
  std::string detail;
  bool ok() const { return dist.has_value(); }
};

/// Extract the last backtick-delimited `y ~ family(args...)` expression from
/// a reply and validate it against the expected family. Chain-of-thought
/// replies may sketch intermediate distributions; the final answer wins.
inline DistParseResult parse_distribution(const std::string& response, Family expected) {
  static const std::regex expr(
      R"(([A-Za-z_][A-Za-z0-9_]*)\s*~\s*([A-Za-z_][A-Za-z0-9_]*)\s*\(([^()]*)\))");

  // collect backtick spans, then the last span containing a match
  std::vector<std::pair<std::size_t, std::size_t>> spans;
  std::size_t tick = response.find('`');
  while (tick != std::string::npos) {
    const std::size_t close = response.find('`', tick + 1);
    if (close == std::string::npos) break;
    spans.emplace_back(tick + 1, close);
    tick = response.find('`', close + 1);
  }

  DistParseResult result;
  bool found = false;
  std::string fam_text, arg_text;
  for (const auto& [from, to] : spans) {
    const std::string segment = response.substr(from, to - from);
    auto begin = std::sregex_iterator(segment.begin(), segment.end(), expr);
    for (auto it = begin; it != std::sregex_iterator(); ++it) {
      fam_text = (*it)[2].str();
      arg_text = (*it)[3].str();
      found = true;
    }
  }
  if (!found) {
    result.error = DistParseErrc::NoDistributionFound;
    result.detail = "no backtick-delimited `y ~ family(...)` expression";
    return result;
  }

  const auto fam = family_from_name(fam_text);
  if (!fam || *fam != expected) {
    result.error = DistParseErrc::FamilyMismatch;
    result.detail = "got '" + fam_text + "', expected " + family_name(expected);
    return result;
  }

  std::vector<double> args;
  {
    std::string token;
    std::istringstream ss(arg_text);
    while (std::getline(ss, token, ',')) {
      const auto first = token.find_first_not_of(" \t");
      if (first == std::string::npos) continue;
      const auto end = token.find_last_not_of(" \t");
      auto v = parse_number(token.substr(first, end - first + 1));
      if (!v) {
        result.error = DistParseErrc::InvalidParameters;
        result.detail = "non-numeric argument '" + token + "'";
        return result;
      }
      args.push_back(*v);
    }
  }
  if (*fam == Family::StudentT && args.size() == 2) {
    result.error = DistParseErrc::AmbiguousArity;
    result.detail = "student_t with 2 arguments: cannot tell (nu, sigma) from (mu, sigma)";
    return result;
  }
  try {
    result.dist = ParametricDistribution::make(*fam, std::move(args));
  } catch (const DistributionError& e) {
    result.error = DistParseErrc::InvalidParameters;
    result.detail = e.what();
    return result;
  }
  return result;
}

/// Negative mean log predictive density. Observations sitting exactly on a
/// closed support boundary (beta at 0/1, gamma/lognormal at 0) are nudged
/// inside by 1e-9; anything genuinely outside the support throws.
inline double log_loss(const ParametricDistribution& dist, const std::vector<double>& observations) {
  if (observations.empty()) throw DistributionError("log_loss: no observations");
  constexpr double eps = 1e-9;
  double sum = 0.0;
  for (double x : observations) {
    if (!dist.in_support(x))
      throw DistributionError("log_loss: observation " + format_number(x) + " outside support");
    double xx = x;
    if (dist.family == Family::Beta) xx = std::clamp(x, eps, 1.0 - eps);
    if ((dist.family == Family::Gamma || dist.family == Family::Lognormal) && x < eps) xx = eps;
    sum += dist.log_pdf(xx);
  }
  return -sum / observations.size();
}

namespace quad {

/// Adaptive Simpson on [a, b] to absolute tolerance tol.
inline double simpson(const std::function<double(double)>& f, double a, double b, double fa,
                      double fb, double fm, double whole, double tol, int depth) {
  const double m = (a + b) / 2.0;
  const double lm = (a + m) / 2.0, rm = (m + b) / 2.0;
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * tol)
    return left + right + (left + right - whole) / 15.0;
  return simpson(f, a, m, fa, fm, flm, left, tol / 2.0, depth - 1) +
         simpson(f, m, b, fm, fb, frm, right, tol / 2.0, depth - 1);
}

inline double integrate(const std::function<double(double)>& f, double a, double b, double tol) {
  if (!(b > a)) return 0.0;
  const double m = (a + b) / 2.0;
  const double fa = f(a), fb = f(b), fm = f(m);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return simpson(f, a, b, fa, fb, fm, whole, tol, 48);
}

/// Quantile knots used to cut CRPS integrals into well-behaved segments.
inline std::vector<double> crps_knots(const ParametricDistribution& d, double x) {
  static const double probs[] = {1e-12, 1e-9, 1e-6, 1e-4, 1e-3, 0.01, 0.05, 0.1,  0.25,
                                 0.5,   0.75, 0.9,  0.95, 0.99, 1 - 1e-3, 1 - 1e-4,
                                 1 - 1e-6, 1 - 1e-9, 1 - 1e-12};
  std::vector<double> knots;
  for (double p : probs) {
    const double q = d.quantile(p);
    if (std::isfinite(q)) knots.push_back(q);
  }
  if (std::isfinite(x)) knots.push_back(x);
  const double lo = d.support_lo(), hi = d.support_hi();
  if (std::isfinite(lo)) knots.push_back(lo);
  if (std::isfinite(hi)) knots.push_back(hi);
  std::sort(knots.begin(), knots.end());
  knots.erase(std::unique(knots.begin(), knots.end()), knots.end());
  // clamp to support
  std::vector<double> out;
  for (double k : knots)
    if (k >= lo && k <= hi) out.push_back(k);
  return out;
}

}  // namespace quad

/// Closed-form CRPS of a normal forecast.
inline double crps_normal(double mu, double sigma, double x) {
  const double z = (x - mu) / sigma;
  const double phi = std::exp(-z * z / 2.0) / std::sqrt(2.0 * M_PI);
  const double Phi = 0.5 * std::erfc(-z / std::sqrt(2.0));
  return sigma * (z * (2.0 * Phi - 1.0) + 2.0 * phi - 1.0 / std::sqrt(M_PI));
}

/// CRPS via the integral definition, cut at quantile knots and evaluated by
/// adaptive quadrature. Exposed directly so the closed forms can be checked
/// against it.
inline double crps_quadrature(const ParametricDistribution& dist, double x, double tol = 1e-8) {
  const auto knots = quad::crps_knots(dist, x);
  auto integrand = [&](double t) {
    const double F = dist.cdf(t);
    const double H = t >= x ? 1.0 : 0.0;
    return (F - H) * (F - H);
  };
  double total = 0.0;
  const double seg_tol = tol / std::max<std::size_t>(knots.size(), 1);
  for (std::size_t i = 0; i + 1 < knots.size(); ++i)
    total += quad::integrate(integrand, knots[i], knots[i + 1], seg_tol);
  // observation outside the knot hull (possible for bounded supports)
  if (!knots.empty() && x < knots.front()) total += knots.front() - x;
  if (!knots.empty() && x > knots.back()) total += x - knots.back();
  return total;
}

/// Continuous ranked probability score of a single observation. Normal uses
/// the closed form; every other family integrates the definition.
inline double crps(const ParametricDistribution& dist, double x) {
  if (!dist.has_finite_mean())
    throw DistributionError("crps: distribution has no finite first moment");
  if (dist.family == Family::Normal) return crps_normal(dist.params[0], dist.params[1], x);
  return crps_quadrature(dist, x);
}

/// Mean CRPS over a sample, via one integral against the empirical CDF:
/// mean_i crps(F, x_i) = ∫ (F - Fn)² + Fn(1 - Fn) dt. Far cheaper than
/// scoring points one at a time when the sample is large.
inline double mean_crps(const ParametricDistribution& dist, std::vector<double> xs,
                        double tol = 1e-7) {
  if (xs.empty()) throw DistributionError("mean_crps: no observations");
  if (!dist.has_finite_mean())
    throw DistributionError("mean_crps: distribution has no finite first moment");
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());

  std::vector<double> knots = quad::crps_knots(dist, xs.front());
  knots.insert(knots.end(), xs.begin(), xs.end());
  std::sort(knots.begin(), knots.end());
  knots.erase(std::unique(knots.begin(), knots.end()), knots.end());

  auto ecdf = [&](double t) {
    return std::upper_bound(xs.begin(), xs.end(), t) - xs.begin();
  };
  double total = 0.0;
  const double seg_tol = tol / std::max<std::size_t>(knots.size(), 1);
  for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
    const double mid = (knots[i] + knots[i + 1]) / 2.0;
    const double c = static_cast<double>(ecdf(mid)) / n;
    auto integrand = [&](double t) {
      const double F = dist.cdf(t);
      return (F - c) * (F - c) + c * (1.0 - c);
    };
    total += quad::integrate(integrand, knots[i], knots[i + 1], seg_tol);
  }
  // mass of the empirical CDF outside the support/knot hull
  if (!knots.empty()) {
    for (double x : xs) {
      if (x < knots.front()) total += (knots.front() - x) / n;
      if (x > knots.back()) total += (x - knots.back()) / n;
    }
  }
  return total;
}

}  // namespace sibyl
