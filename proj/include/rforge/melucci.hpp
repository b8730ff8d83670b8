#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "rforge/probcheck.hpp"

namespace rforge::melucci {

enum class Mode { filter_R, filter_notR, no_filter };

Mode parse_mode(std::string_view name);  // ConfigError
std::string_view to_string(Mode m);

struct SourceConfig {
  double pR = 0.5;
  double pX_given_R = 0.8;
  double pX_given_notR = 0.2;
  double delta = 0.0;  // additive deviation applied only without the relevance filter
  std::uint64_t N = 100000;
  std::uint64_t seed = 0;

  // Detection probability when the slit is open to every document.
  double no_filter_probability() const { return pX_given_R * pR + pX_given_notR * (1.0 - pR) + delta; }
  void validate() const;  // ConfigError
};

struct ExperimentCounts {
  Mode mode = Mode::no_filter;
  std::uint64_t emitted = 0;
  std::uint64_t passed_slit = 0;
  std::uint64_t detected_X = 0;

  bool operator==(const ExperimentCounts&) const = default;
};

inline constexpr std::uint64_t kMaxEmissions = 100'000'000;

// Emits documents until N pass the slit. Each (config, mode) pair owns its
// generator stream, so results do not depend on which modes are run.
ExperimentCounts run_experiment(const SourceConfig& cfg, Mode mode);

struct Estimate {
  double value = 0.0;
  double se = 0.0;
};

// successes / trials with binomial standard error.
Estimate binomial_estimate(std::uint64_t successes, std::uint64_t trials);  // ZeroCount

struct EstimatedStats {
  probcheck::MelucciStats value;
  probcheck::MelucciStats se;
};

EstimatedStats estimate_stats(const ExperimentCounts& filter_R, const ExperimentCounts& filter_notR,
                              const ExperimentCounts& no_filter);

// Invariant A with a first-order (delta-method) standard error.
Estimate accardi_estimate(const EstimatedStats& s);

// Standard error of the total-probability residual, treating the four
// estimates as independent.
double residual_se(const EstimatedStats& s);

SourceConfig config_from_json(std::string_view text);
std::string counts_to_json(const ExperimentCounts& c);

}  // namespace rforge::melucci
