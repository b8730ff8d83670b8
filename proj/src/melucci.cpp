#include "rforge/melucci.hpp"

#include <cmath>

#include <json.hpp>

#include "rforge/error.hpp"
#include "rforge/random.hpp"

namespace rforge::melucci {

Mode parse_mode(std::string_view name) {
  if (name == "filter_R") return Mode::filter_R;
  if (name == "filter_notR") return Mode::filter_notR;
  if (name == "no_filter") return Mode::no_filter;
  throw ConfigError("unknown experiment mode '" + std::string(name) + "'");
}

std::string_view to_string(Mode m) {
  switch (m) {
    case Mode::filter_R: return "filter_R";
    case Mode::filter_notR: return "filter_notR";
    case Mode::no_filter: return "no_filter";
  }
  return "no_filter";
}

namespace {

bool in_unit(double x) { return std::isfinite(x) && x >= 0.0 && x <= 1.0; }

}  // namespace

void SourceConfig::validate() const {
  if (!in_unit(pR)) throw ConfigError("pR must lie in [0, 1]");
  if (!in_unit(pX_given_R)) throw ConfigError("pX_given_R must lie in [0, 1]");
  if (!in_unit(pX_given_notR)) throw ConfigError("pX_given_notR must lie in [0, 1]");
  if (!std::isfinite(delta)) throw ConfigError("delta must be finite");
  if (!in_unit(no_filter_probability())) throw ConfigError("pX|R*pR + pX|notR*(1-pR) + delta must lie in [0, 1]");
  if (N < 1) throw ConfigError("N must be positive");
}

ExperimentCounts run_experiment(const SourceConfig& cfg, Mode mode) {
  cfg.validate();
  ExperimentCounts c;
  c.mode = mode;
  Rng rng(Rng::mix(cfg.seed) + static_cast<std::uint64_t>(mode));

  if (mode == Mode::no_filter) {
    const double p = cfg.no_filter_probability();
    c.emitted = c.passed_slit = cfg.N;
    for (std::uint64_t i = 0; i < cfg.N; ++i)
      if (rng.bernoulli(p)) ++c.detected_X;
    return c;
  }

  const bool want_relevant = mode == Mode::filter_R;
  const double pass = want_relevant ? cfg.pR : 1.0 - cfg.pR;
  const double detect = want_relevant ? cfg.pX_given_R : cfg.pX_given_notR;
  if (pass == 0.0)
    throw StarvationError(std::string("no document can pass the ") + std::string(to_string(mode)) + " slit");
  while (c.passed_slit < cfg.N) {
    if (c.emitted >= kMaxEmissions)
      throw StarvationError("fewer than N documents passed in " + std::to_string(kMaxEmissions) + " emissions");
    ++c.emitted;
    const bool relevant = rng.bernoulli(cfg.pR);
    const bool x = rng.bernoulli(detect);
    if (relevant != want_relevant) continue;
    ++c.passed_slit;
    if (x) ++c.detected_X;
  }
  return c;
}

Estimate binomial_estimate(std::uint64_t successes, std::uint64_t trials) {
  if (trials == 0) throw ZeroCount("no trials to estimate from");
  if (successes > trials) throw ConfigError("successes exceed trials");
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  return {p, std::sqrt(p * (1.0 - p) / n)};
}

EstimatedStats estimate_stats(const ExperimentCounts& filter_R, const ExperimentCounts& filter_notR,
                              const ExperimentCounts& no_filter) {
  if (filter_R.mode != Mode::filter_R || filter_notR.mode != Mode::filter_notR || no_filter.mode != Mode::no_filter)
    throw ModeMismatch("expected counts from filter_R, filter_notR and no_filter, in that order");
  const auto xr = binomial_estimate(filter_R.detected_X, filter_R.passed_slit);
  const auto xn = binomial_estimate(filter_notR.detected_X, filter_notR.passed_slit);
  const auto x = binomial_estimate(no_filter.detected_X, no_filter.passed_slit);
  const auto r = binomial_estimate(filter_R.passed_slit, filter_R.emitted);
  return {{x.value, xr.value, xn.value, r.value}, {x.se, xr.se, xn.se, r.se}};
}

Estimate accardi_estimate(const EstimatedStats& s) {
  const double A = probcheck::accardi_invariant(s.value);
  const double denom = std::abs(s.value.pX_given_R - s.value.pX_given_notR);
  const double var = s.se.pX * s.se.pX + A * A * s.se.pX_given_R * s.se.pX_given_R +
                     (A - 1.0) * (A - 1.0) * s.se.pX_given_notR * s.se.pX_given_notR;
  return {A, std::sqrt(var) / denom};
}

double residual_se(const EstimatedStats& s) {
  const auto& v = s.value;
  const auto& e = s.se;
  const double dr = v.pX_given_R - v.pX_given_notR;
  return std::sqrt(e.pX * e.pX + v.pR * v.pR * e.pX_given_R * e.pX_given_R +
                   (1.0 - v.pR) * (1.0 - v.pR) * e.pX_given_notR * e.pX_given_notR + dr * dr * e.pR * e.pR);
}

SourceConfig config_from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    SourceConfig c;
    c.pR = j.value("pR", c.pR);
    c.pX_given_R = j.value("pX_given_R", c.pX_given_R);
    c.pX_given_notR = j.value("pX_given_notR", c.pX_given_notR);
    c.delta = j.value("delta", c.delta);
    c.N = j.value("N", c.N);
    c.seed = j.value("seed", c.seed);
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed source config JSON: ") + e.what());
  }
}

std::string counts_to_json(const ExperimentCounts& c) {
  nlohmann::ordered_json j;
  j["mode"] = std::string(to_string(c.mode));
  j["emitted"] = c.emitted;
  j["passed_slit"] = c.passed_slit;
  j["detected_X"] = c.detected_X;
  return j.dump();
}

}  // namespace rforge::melucci
