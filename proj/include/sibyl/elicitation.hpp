#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "sibyl/distributions.hpp"
#include "sibyl/prompting.hpp"
#include "sibyl/rng.hpp"

namespace sibyl {

enum class Persona { Expert, Conference, NonExpert };
enum class Protocol { Direct, Shelf, Roulette };

inline const char* to_string(Persona p) {
  switch (p) {
    case Persona::Expert: return "expert";
    case Persona::Conference: return "conference";
    case Persona::NonExpert: return "non_expert";
  }
  return "?";
}
inline const char* to_string(Protocol p) {
  switch (p) {
    case Protocol::Direct: return "direct";
    case Protocol::Shelf: return "shelf";
    case Protocol::Roulette: return "roulette";
  }
  return "?";
}

inline std::optional<Persona> persona_from_name(const std::string& s) {
  if (s == "expert") return Persona::Expert;
  if (s == "conference") return Persona::Conference;
  if (s == "non_expert") return Persona::NonExpert;
  return std::nullopt;
}
inline std::optional<Protocol> protocol_from_name(const std::string& s) {
  if (s == "direct") return Protocol::Direct;
  if (s == "shelf") return Protocol::Shelf;
  if (s == "roulette") return Protocol::Roulette;
  return std::nullopt;
}

/// One elicitation question: what to ask, which family the answer must take,
/// and the persona/protocol cell of the experiment grid it belongs to.
struct ElicitationTask {
  std::string id;
  std::string domain;
  std::string question;
  Family family = Family::Normal;
  std::optional<std::pair<double, double>> support;
  Persona persona = Persona::Expert;
  Protocol protocol = Protocol::Direct;

  void validate() const {
    if (id.empty() || question.empty())
      throw DistributionError("task needs an id and a question");
    if (support) {
      if (!(support->first < support->second))
        throw DistributionError("task support must have lo < hi");
      if (family == Family::Beta && (support->first < 0.0 || support->second > 1.0))
        throw DistributionError("beta task support must lie within [0, 1]");
      if ((family == Family::Gamma || family == Family::Lognormal) && support->first < 0.0)
        throw DistributionError("positive-family task support must lie within [0, inf)");
    }
  }

  static ElicitationTask from_json(const nlohmann::json& j) {
    ElicitationTask t;
    t.id = j.at("id");
    t.domain = j.value("domain", "");
    t.question = j.at("question");
    const auto fam = family_from_name(j.at("family").get<std::string>());
    if (!fam) throw DistributionError("unknown family in task " + t.id);
    t.family = *fam;
    if (j.contains("support"))
      t.support = {j["support"].at(0).get<double>(), j["support"].at(1).get<double>()};
    t.validate();
    return t;
  }
};

inline std::vector<ElicitationTask> load_tasks(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DistributionError("cannot open task file " + path.string());
  const auto j = nlohmann::json::parse(in);
  std::vector<ElicitationTask> tasks;
  const auto& arr = j.is_array() ? j : j.at("tasks");
  for (const auto& tj : arr) tasks.push_back(ElicitationTask::from_json(tj));
  return tasks;
}

namespace detail {

inline std::string family_example(Family f) {
  switch (f) {
    case Family::Normal: return "y ~ normal(0, 1)";
    case Family::StudentT: return "y ~ student_t(30, 0, 1)";
    case Family::Beta: return "y ~ beta(2, 2)";
    case Family::Gamma: return "y ~ gamma(2, 1)";
    case Family::Lognormal: return "y ~ lognormal(0, 1)";
    case Family::Uniform: return "y ~ uniform(0, 1)";
  }
  return "y ~ normal(0, 1)";
}

}  // namespace detail

/// The elicitation ask: a single backtick-delimited Stan-pseudocode
/// distribution of the task's family, with protocol framing prepended and the
/// self-conference instruction appended where the grid cell calls for them.
inline PromptPair build_elicitation_prompt(const ElicitationTask& task,
                                           const ExpertProfile& profile) {
  task.validate();
  std::string user;
  if (task.protocol == Protocol::Shelf) user += std::string(tpl::kShelfFraming) + " ";
  if (task.protocol == Protocol::Roulette) user += std::string(tpl::kRouletteFraming) + " ";

  std::string body = substitute(tpl::kElicitUser, "example", detail::family_example(task.family));
  body = substitute(body, "question", task.question);
  body = substitute(body, "family", family_name(task.family));
  std::string support_clause;
  if (task.support)
    support_clause = " supported on [" + format_number(task.support->first) + ", " +
                     format_number(task.support->second) + "]";
  body = substitute(body, "support", support_clause);
  user += body;
  if (task.persona == Persona::Conference)
    user += " " + std::string(tpl::kConferenceInstruction);
  return {profile.text, user};
}

/// Heuristic prior effective sample size of a beta prior: alpha + beta
/// pseudo-observations.
inline double ess_heuristic(const ParametricDistribution& dist) {
  if (dist.family != Family::Beta)
    throw DistributionError("NonBetaFamily: ess_heuristic is defined for beta priors only");
  return dist.params[0] + dist.params[1];
}

enum class EssMetric { LogLoss, Crps, Mse };

inline const char* to_string(EssMetric m) {
  switch (m) {
    case EssMetric::LogLoss: return "log_loss";
    case EssMetric::Crps: return "crps";
    case EssMetric::Mse: return "mse";
  }
  return "?";
}
inline std::optional<EssMetric> ess_metric_from_name(const std::string& s) {
  if (s == "log_loss") return EssMetric::LogLoss;
  if (s == "crps") return EssMetric::Crps;
  if (s == "mse") return EssMetric::Mse;
  return std::nullopt;
}

/// Score a forecast distribution against held-out points. MSE reads the
/// distribution as a point forecast at its mean.
inline double score_distribution(const ParametricDistribution& dist,
                                 const std::vector<double>& xs, EssMetric metric) {
  switch (metric) {
    case EssMetric::LogLoss: return log_loss(dist, xs);
    case EssMetric::Crps: return mean_crps(dist, xs);
    case EssMetric::Mse: {
      const double m = dist.mean();
      double s = 0.0;
      for (double x : xs) s += (x - m) * (x - m);
      return s / xs.size();
    }
  }
  return 0.0;
}

namespace detail {

inline double sample_sd(const std::vector<double>& xs, double mean) {
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / (xs.size() - 1));
}

/// Same-family frequentist fit from a small sample: maximum likelihood where
/// closed forms exist, method of moments for beta/gamma. Returns nothing when
/// the sample cannot pin down valid parameters (that draw is a frequentist
/// loss).
inline std::optional<ParametricDistribution> fit_family(Family family,
                                                        const std::vector<double>& xs,
                                                        const ParametricDistribution& prior) {
  if (xs.size() < 2) return std::nullopt;
  double m = 0.0;
  for (double x : xs) m += x;
  m /= xs.size();
  const double sd = sample_sd(xs, m);
  try {
    switch (family) {
      case Family::Normal:
        if (!(sd > 0.0)) return std::nullopt;
        return ParametricDistribution::normal(m, sd);
      case Family::StudentT: {
        if (!(sd > 0.0)) return std::nullopt;
        const double nu = prior.params[0];
        const double scale = nu > 2.0 ? sd * std::sqrt((nu - 2.0) / nu) : sd;
        return ParametricDistribution::student_t(nu, m, scale);
      }
      case Family::Beta: {
        const double v = sd * sd;
        if (!(v > 0.0) || m <= 0.0 || m >= 1.0) return std::nullopt;
        const double common = m * (1.0 - m) / v - 1.0;
        if (!(common > 0.0)) return std::nullopt;
        return ParametricDistribution::beta(m * common, (1.0 - m) * common);
      }
      case Family::Gamma: {
        const double v = sd * sd;
        if (!(v > 0.0) || !(m > 0.0)) return std::nullopt;
        return ParametricDistribution::gamma(m * m / v, m / v);
      }
      case Family::Lognormal: {
        std::vector<double> logs;
        logs.reserve(xs.size());
        for (double x : xs) {
          if (!(x > 0.0)) return std::nullopt;
          logs.push_back(std::log(x));
        }
        double lm = 0.0;
        for (double l : logs) lm += l;
        lm /= logs.size();
        const double lsd = sample_sd(logs, lm);
        if (!(lsd > 0.0)) return std::nullopt;
        return ParametricDistribution::lognormal(lm, lsd);
      }
      case Family::Uniform: {
        const auto [lo, hi] = std::minmax_element(xs.begin(), xs.end());
        if (!(*lo < *hi)) return std::nullopt;
        return ParametricDistribution::uniform(*lo, *hi);
      }
    }
  } catch (const DistributionError&) {
    return std::nullopt;
  }
  return std::nullopt;
}

}  // namespace detail

struct EssResult {
  double ess = 0.0;
  bool censored = false;  // no grid size reached parity; ess is the grid max
  int grid_max = 0;
  double prior_score = 0.0;
};

/// Data-dependent effective sample size: how many real samples a same-family
/// frequentist model needs before its average held-out score matches the
/// elicited prior predictive. Half the data is held out for scoring; training
/// subsets of size n = 2..floor(pool/3) are drawn `repeats` times from the
/// other half and their scores averaged per n. The result is the smallest n
/// that reaches parity: 2 (the smallest sample with an empirical standard
/// deviation) signals prior-data conflict, and the grid maximum is reported
/// with `censored` set when no n wins. Draws whose fit fails score as losses
/// and drop out of the average.
inline EssResult data_dependent_ess(const ParametricDistribution& dist,
                                    const std::vector<double>& data, EssMetric metric,
                                    int repeats, std::uint64_t seed) {
  if (static_cast<int>(data.size()) < 12)
    throw DistributionError("data_dependent_ess: need at least 12 observations");
  if (repeats < 1) throw DistributionError("data_dependent_ess: repeats must be >= 1");

  std::vector<double> shuffled = data;
  rng::Engine split_eng(rng::derive_seed(seed, 0));
  rng::shuffle(shuffled, split_eng);
  const std::size_t half = shuffled.size() / 2;
  const std::vector<double> test(shuffled.begin(), shuffled.begin() + half);
  const std::vector<double> pool(shuffled.begin() + half, shuffled.end());

  EssResult result;
  result.grid_max = static_cast<int>(pool.size()) / 3;
  result.prior_score = score_distribution(dist, test, metric);

  const int n_grid = result.grid_max - 1;  // sizes 2..grid_max
  std::vector<double> score_sum(n_grid, 0.0);
  std::vector<int> score_count(n_grid, 0);
  for (int r = 0; r < repeats; ++r) {
    rng::Engine eng(rng::derive_seed(seed, 1000 + r));
    for (int n = 2; n <= result.grid_max; ++n) {
      const auto pick = rng::sample_without_replacement(eng, static_cast<int>(pool.size()), n);
      std::vector<double> sample;
      sample.reserve(n);
      for (int i : pick) sample.push_back(pool[i]);
      const auto fitted = detail::fit_family(dist.family, sample, dist);
      if (!fitted) continue;  // frequentist loses this draw
      double s;
      try {
        s = score_distribution(*fitted, test, metric);
      } catch (const DistributionError&) {
        continue;  // fitted support excludes a test point: loses
      }
      if (!std::isfinite(s)) continue;
      score_sum[n - 2] += s;
      ++score_count[n - 2];
    }
  }

  for (int n = 2; n <= result.grid_max; ++n) {
    if (score_count[n - 2] == 0) continue;
    const double avg = score_sum[n - 2] / score_count[n - 2];
    if (avg <= result.prior_score) {
      result.ess = n;
      result.censored = false;
      return result;
    }
  }
  result.ess = result.grid_max;
  result.censored = true;
  return result;
}

}  // namespace sibyl
