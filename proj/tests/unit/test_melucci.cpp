#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "rforge/error.hpp"
#include "rforge/melucci.hpp"
#include "rforge/probcheck.hpp"

using namespace rforge;
using namespace rforge::melucci;

namespace {

Estimate run_all(SourceConfig cfg) {
  const auto r = run_experiment(cfg, Mode::filter_R);
  const auto nr = run_experiment(cfg, Mode::filter_notR);
  const auto none = run_experiment(cfg, Mode::no_filter);
  return accardi_estimate(estimate_stats(r, nr, none));
}

}  // namespace

TEST_CASE("binomial estimate") {
  const auto e = binomial_estimate(2, 4);
  CHECK(e.value == 0.5);
  CHECK(e.se == 0.25);
  CHECK_THROWS_AS(binomial_estimate(0, 0), ZeroCount);
}

TEST_CASE("counts are consistent with the mode") {
  SourceConfig cfg;
  cfg.N = 5000;
  const auto r = run_experiment(cfg, Mode::filter_R);
  CHECK(r.passed_slit == cfg.N);
  CHECK(r.emitted >= r.passed_slit);
  CHECK(r.detected_X <= r.passed_slit);
  const auto none = run_experiment(cfg, Mode::no_filter);
  CHECK(none.emitted == cfg.N);
  CHECK(none.passed_slit == cfg.N);
}

TEST_CASE("determinism") {
  SourceConfig cfg;
  cfg.N = 20000;
  cfg.seed = 42;
  for (auto m : {Mode::filter_R, Mode::filter_notR, Mode::no_filter})
    CHECK(run_experiment(cfg, m) == run_experiment(cfg, m));
  auto other = cfg;
  other.seed = 43;
  CHECK_FALSE(run_experiment(cfg, Mode::no_filter) == run_experiment(other, Mode::no_filter));
}

TEST_CASE("classical source recovers P(R)") {
  SourceConfig cfg;
  cfg.N = 100000;
  const auto A = run_all(cfg);
  CHECK(std::abs(A.value - cfg.pR) <= 3.0 * A.se);

  const auto st = estimate_stats(run_experiment(cfg, Mode::filter_R), run_experiment(cfg, Mode::filter_notR),
                                 run_experiment(cfg, Mode::no_filter));
  CHECK(std::abs(probcheck::total_probability_residual(st.value)) <= 3.0 * residual_se(st));
}

TEST_CASE("interference pushes A outside the unit interval") {
  SourceConfig cfg;
  cfg.delta = 0.4;
  cfg.N = 100000;
  const auto A = run_all(cfg);
  CHECK(std::abs(A.value - 7.0 / 6.0) <= 3.0 * A.se);
  CHECK(probcheck::classify_accardi(A.value, 3.0 * A.se) == probcheck::Verdict::nonclassical);
}

TEST_CASE("property: 3-SE interval covers P(R) in at least 99% of runs") {
  int covered = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    SourceConfig cfg;
    cfg.N = 10000;
    cfg.seed = seed;
    const auto A = run_all(cfg);
    if (std::abs(A.value - cfg.pR) <= 3.0 * A.se) ++covered;
  }
  MESSAGE("coverage " << covered << "/200");
  CHECK(covered >= 198);
}

TEST_CASE("configuration errors") {
  SourceConfig cfg;
  cfg.pR = 1.0;
  CHECK_THROWS_AS(run_experiment(cfg, Mode::filter_notR), StarvationError);

  SourceConfig bad;
  bad.delta = 0.6;  // no-filter probability 1.1
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad.delta = -0.6;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = SourceConfig{};
  bad.N = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  SourceConfig ok;
  ok.N = 100;
  const auto r = run_experiment(ok, Mode::filter_R);
  CHECK_THROWS_AS(estimate_stats(r, r, run_experiment(ok, Mode::no_filter)), ModeMismatch);
  CHECK_THROWS_AS(parse_mode("both"), ConfigError);
}

TEST_CASE("JSON") {
  const auto cfg = config_from_json(R"({"pR": 0.3, "pX_given_R": 0.9, "pX_given_notR": 0.1, "delta": 0.05, "N": 1000, "seed": 7})");
  CHECK(cfg.pR == 0.3);
  CHECK(cfg.N == 1000);
  CHECK(cfg.seed == 7);
  CHECK_THROWS_AS(config_from_json(R"({"pR": 2})"), ConfigError);
}
