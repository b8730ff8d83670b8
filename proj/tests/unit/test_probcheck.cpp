#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "rforge/error.hpp"
#include "rforge/probcheck.hpp"
#include "rforge/random.hpp"
#include "rforge/simplex.hpp"

using namespace rforge;
using namespace rforge::probcheck;

namespace {

simplex::EqualitySystem system(std::size_t rows, std::size_t cols, std::vector<double> a, std::vector<double> b) {
  return simplex::EqualitySystem{rows, cols, std::move(a), std::move(b)};
}

double residual(const simplex::EqualitySystem& s, const std::vector<double>& x) {
  double worst = 0.0;
  for (std::size_t r = 0; r < s.rows; ++r) {
    double acc = -s.b[r];
    for (std::size_t c = 0; c < s.cols; ++c) acc += s.at(r, c) * x[c];
    worst = std::max(worst, std::abs(acc));
  }
  return worst;
}

// Family induced by a joint distribution over T observables with n values.
ObservableFamily from_joint(const std::vector<double>& joint, std::size_t T, std::size_t n) {
  ObservableFamily f(T, n);
  std::vector<std::size_t> digits(T);
  std::vector<double> pair(T * T * n * n, 0.0);
  for (std::size_t atom = 0; atom < joint.size(); ++atom) {
    std::size_t rest = atom;
    for (std::size_t a = T; a-- > 0;) {
      digits[a] = rest % n;
      rest /= n;
    }
    for (std::size_t a = 0; a < T; ++a) {
      f.marg_at(a, digits[a]) += joint[atom];
      for (std::size_t b = 0; b < T; ++b) pair[((a * T + b) * n + digits[a]) * n + digits[b]] += joint[atom];
    }
  }
  for (std::size_t a = 0; a < T; ++a)
    for (std::size_t b = 0; b < T; ++b)
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
          f.cond_at(a, b, i, j) = a == b ? (i == j ? 1.0 : 0.0) : pair[((a * T + b) * n + i) * n + j] / f.marg_at(a, i);
  return f;
}

MelucciStats consistent(Rng& rng) {
  MelucciStats s;
  s.pR = rng.uniform();
  s.pX_given_R = rng.uniform();
  do s.pX_given_notR = rng.uniform();
  while (std::abs(s.pX_given_R - s.pX_given_notR) < 1e-3);
  s.pX = s.pX_given_R * s.pR + s.pX_given_notR * (1.0 - s.pR);
  return s;
}

}  // namespace

TEST_CASE("simplex feasibility") {
  // x + y = 1, x - y = 0.
  auto s = system(2, 2, {1, 1, 1, -1}, {1, 0});
  auto r = simplex::find_feasible(s);
  REQUIRE(r.feasible);
  CHECK(std::abs(r.x[0] - 0.5) < 1e-12);
  CHECK(std::abs(r.x[1] - 0.5) < 1e-12);

  // x + y = -1 has no nonnegative solution.
  CHECK_FALSE(simplex::find_feasible(system(1, 2, {1, 1}, {-1})).feasible);
  // x = 1 and x = 2.
  CHECK_FALSE(simplex::find_feasible(system(2, 1, {1, 1}, {1, 2})).feasible);
  // Redundant rows.
  r = simplex::find_feasible(system(3, 3, {1, 1, 1, 2, 2, 2, 1, 0, 0}, {1, 2, 0.25}));
  REQUIRE(r.feasible);
  CHECK(residual(system(3, 3, {1, 1, 1, 2, 2, 2, 1, 0, 0}, {1, 2, 0.25}), r.x) < 1e-12);
}

TEST_CASE("property: simplex finds a point of random feasible systems") {
  Rng rng(13);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t rows = 1 + rng.below(6), cols = rows + rng.below(6);
    std::vector<double> a(rows * cols), x0(cols), b(rows, 0.0);
    for (auto& v : a) v = rng.below(3) == 0 ? 0.0 : rng.uniform(-2, 2);
    for (auto& v : x0) v = rng.below(2) == 0 ? 0.0 : rng.uniform();  // degenerate points are common
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) b[r] += a[r * cols + c] * x0[c];
    const auto s = system(rows, cols, a, b);
    const auto res = simplex::find_feasible(s);
    REQUIRE(res.feasible);
    CHECK(residual(s, res.x) < 1e-9);
    for (double v : res.x) CHECK(v >= -1e-12);
  }
}

TEST_CASE("bell_sum") {
  auto r = bell_sum(1, 1, 1);
  CHECK(r.sum == 3.0);
  CHECK(r.classical_consistent);
  r = bell_sum(0.25, 0.25, 0.25);
  CHECK(r.sum == 0.75);
  CHECK_FALSE(r.classical_consistent);
  r = bell_sum(0.5, 0.5, 0.0);
  CHECK(r.sum == 1.0);
  CHECK(r.classical_consistent);
  CHECK_THROWS_AS(bell_sum(1.5, 0, 0), RangeError);
}

TEST_CASE("accardi-fedullo closed form") {
  CHECK(accardi_fedullo_classical({0.5, 0.5, 0.5}));
  CHECK_FALSE(accardi_fedullo_classical({0.25, 0.25, 0.25}));
  CHECK_FALSE(kolmogorov_feasible(family_from_triple({0.25, 0.25, 0.25})).feasible);
  CHECK(accardi_fedullo_classical({0.3, 0.8, 0.1}));
  CHECK(kolmogorov_feasible(family_from_triple({0.3, 0.8, 0.1})).feasible);
  CHECK_THROWS_AS(family_from_triple({0.3, -0.1, 0.2}), RangeError);
}

TEST_CASE("kolmogorov_feasible examples") {
  const auto f = family_from_triple({0.5, 0.5, 0.5});
  const auto r = kolmogorov_feasible(f);
  REQUIRE(r.feasible);
  REQUIRE(r.witness);
  CHECK(witness_violation(f, *r.witness) < 1e-9);

  ObservableFamily one(1, 3);
  one.marg = {0.2, 0.5, 0.3};
  const auto single = kolmogorov_feasible(one);
  REQUIRE(single.feasible);
  for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs((*single.witness)[i] - one.marg[i]) < 1e-12);

  ObservableFamily bad(2, 2);
  bad.marg = {0.5, 0.5, 0.7, 0.7};
  CHECK_THROWS_AS(kolmogorov_feasible(bad), InconsistentInput);
  CHECK_THROWS_AS(kolmogorov_feasible(ObservableFamily(21, 2)), ScaleError);
}

TEST_CASE("property: closed form agrees with the LP on 1000 triples") {
  Rng rng(2024);
  int compared = 0, disagreements = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const DichotomicTriple t{rng.uniform(), rng.uniform(), rng.uniform()};
    const double band = std::min(std::abs(t.r - std::abs(t.p + t.q - 1.0)), std::abs(t.r - (1.0 - std::abs(t.p - t.q))));
    if (band < 1e-9) continue;
    ++compared;
    const auto f = family_from_triple(t);
    const auto lp = kolmogorov_feasible(f);
    if (lp.feasible != accardi_fedullo_classical(t)) ++disagreements;
    if (lp.witness) CHECK(witness_violation(f, *lp.witness) < 1e-9);
  }
  CHECK(compared > 990);
  CHECK(disagreements == 0);
}

TEST_CASE("property: families from joint distributions are feasible with valid witnesses") {
  Rng rng(77);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t T = 2 + rng.below(3), n = 2 + rng.below(2);
    std::size_t atoms = 1;
    for (std::size_t a = 0; a < T; ++a) atoms *= n;
    std::vector<double> joint(atoms);
    double total = 0.0;
    for (auto& v : joint) total += (v = 0.05 + rng.uniform());
    for (auto& v : joint) v /= total;
    const auto f = from_joint(joint, T, n);
    const auto r = kolmogorov_feasible(f);
    REQUIRE(r.feasible);
    CHECK(witness_violation(f, *r.witness) < 1e-9);
  }
}

TEST_CASE("accardi invariant") {
  CHECK(accardi_invariant({0.5, 0.8, 0.2, 0.5}) == doctest::Approx(0.5).epsilon(1e-15));
  const MelucciStats interf{0.9, 0.8, 0.2, 0.5};
  CHECK(accardi_invariant(interf) == doctest::Approx(7.0 / 6.0).epsilon(1e-14));
  CHECK_THROWS_AS(accardi_invariant({0.5, 0.3, 0.3, 0.5}), DegenerateDenominator);

  CHECK(classify_accardi(0.5) == Verdict::classical);
  CHECK(classify_accardi(7.0 / 6.0, 0.0) == Verdict::nonclassical);
  CHECK(classify_accardi(1.0) == Verdict::classical);

  CHECK(std::abs(total_probability_residual({0.5, 0.8, 0.2, 0.5})) < 1e-15);
  CHECK(total_probability_residual(interf) == doctest::Approx(0.4).epsilon(1e-14));
  CHECK(total_probability_residual({0, 0, 0, 0.3}) == 0.0);
}

TEST_CASE("property: invariant equals P(R) under total probability") {
  Rng rng(99);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto s = consistent(rng);
    const double A = accardi_invariant(s);
    CHECK(std::abs(A - s.pR) < 1e-12);
    CHECK(classify_accardi(A) == Verdict::classical);
  }
}

TEST_CASE("property: classify is monotone in tol") {
  Rng rng(5);
  for (int trial = 0; trial < 500; ++trial) {
    const double A = rng.uniform(-1, 2);
    double tol = 0.0;
    bool seen_classical = false;
    for (int step = 0; step < 20; ++step, tol += 0.1) {
      const bool c = classify_accardi(A, tol) == Verdict::classical;
      if (seen_classical) CHECK(c);
      seen_classical = seen_classical || c;
    }
  }
}

TEST_CASE("family JSON") {
  const auto f = family_from_json(R"({"T": 1, "n": 2, "cond": [[[[1,0],[0,1]]]], "marg": [[0.4, 0.6]]})");
  CHECK(f.T == 1);
  CHECK(f.marg_at(0, 1) == 0.6);
  CHECK_THROWS(family_from_json("{"));
}
