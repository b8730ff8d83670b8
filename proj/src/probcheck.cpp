#include "rforge/probcheck.hpp"

#include <cmath>
#include <string>

#include <json.hpp>

#include "rforge/error.hpp"
#include "rforge/simplex.hpp"

namespace rforge::probcheck {

namespace {

constexpr double kStochasticTol = 1e-9;
constexpr double kClosedFormTol = 1e-12;
constexpr std::size_t kMaxTableau = 50'000'000;

bool in_unit(double x) { return std::isfinite(x) && x >= 0.0 && x <= 1.0; }

void require_unit(double x, const char* name) {
  if (!in_unit(x)) throw RangeError(std::string(name) + " must lie in [0, 1]");
}

}  // namespace

void DichotomicTriple::validate() const {
  require_unit(p, "p");
  require_unit(q, "q");
  require_unit(r, "r");
}

ObservableFamily::ObservableFamily(std::size_t observables, std::size_t values)
    : T(observables), n(values), cond(observables * observables * values * values, 0.0), marg(observables * values, 0.0) {}

void ObservableFamily::validate() const {
  if (T < 1 || n < 1) throw InconsistentInput("family needs T >= 1 and n >= 1");
  if (cond.size() != T * T * n * n || marg.size() != T * n) throw InconsistentInput("family arrays have wrong sizes");
  for (std::size_t a = 0; a < T; ++a) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!in_unit(marg_at(a, i))) throw InconsistentInput("marginal entry outside [0, 1]");
      sum += marg_at(a, i);
    }
    if (std::abs(sum - 1.0) > kStochasticTol)
      throw InconsistentInput("marginal of observable " + std::to_string(a) + " does not sum to 1");
  }
  for (std::size_t a = 0; a < T; ++a)
    for (std::size_t b = 0; b < T; ++b) {
      if (a == b) continue;
      for (std::size_t i = 0; i < n; ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          if (!in_unit(cond_at(a, b, i, j))) throw InconsistentInput("conditional entry outside [0, 1]");
          sum += cond_at(a, b, i, j);
        }
        if (std::abs(sum - 1.0) > kStochasticTol)
          throw InconsistentInput("conditional row (" + std::to_string(a) + "," + std::to_string(b) + "," +
                                  std::to_string(i) + ") does not sum to 1");
      }
    }
}

BellResult bell_sum(double p_ab, double p_bc, double p_ac) {
  require_unit(p_ab, "p_ab");
  require_unit(p_bc, "p_bc");
  require_unit(p_ac, "p_ac");
  const double sum = p_ab + p_bc + p_ac;
  return {sum, sum >= 1.0 - 1e-12};
}

bool accardi_fedullo_classical(const DichotomicTriple& t) {
  const double lower = std::abs(t.p + t.q - 1.0);
  const double upper = 1.0 - std::abs(t.p - t.q);
  return t.r >= lower - kClosedFormTol && t.r <= upper + kClosedFormTol;
}

ObservableFamily family_from_triple(const DichotomicTriple& t) {
  t.validate();
  ObservableFamily f(3, 2);
  for (std::size_t a = 0; a < 3; ++a) {
    f.marg_at(a, 0) = 0.5;
    f.marg_at(a, 1) = 0.5;
  }
  // Agreement probability per unordered pair: (A,B) -> p, (B,C) -> q, (A,C) -> r.
  const double agree[3][3] = {{0.0, t.p, t.r}, {t.p, 0.0, t.q}, {t.r, t.q, 0.0}};
  for (std::size_t a = 0; a < 3; ++a)
    for (std::size_t b = 0; b < 3; ++b) {
      if (a == b) continue;
      for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j) f.cond_at(a, b, i, j) = i == j ? agree[a][b] : 1.0 - agree[a][b];
    }
  return f;
}

namespace {

// Value of observable a in atom `atom`; observable 0 is the most significant digit.
std::vector<std::size_t> atom_strides(const ObservableFamily& f) {
  std::vector<std::size_t> stride(f.T, 1);
  for (std::size_t a = f.T; a-- > 1;) stride[a - 1] = stride[a] * f.n;
  return stride;
}

std::size_t atom_count(const ObservableFamily& f) {
  std::size_t atoms = 1;
  for (std::size_t a = 0; a < f.T; ++a) {
    if (atoms > kMaxAtoms / f.n) throw ScaleError("n^T exceeds " + std::to_string(kMaxAtoms) + " atoms");
    atoms *= f.n;
  }
  return atoms;
}

// Enumerates constraint rows in a fixed order: normalization, marginals, then
// pairwise joints for every ordered pair a != b.
template <class Visit>
void for_each_constraint(const ObservableFamily& f, Visit&& visit) {
  const auto stride = atom_strides(f);
  auto value = [&](std::size_t atom, std::size_t a) { return (atom / stride[a]) % f.n; };

  visit([&](std::size_t) { return true; }, 1.0);
  for (std::size_t a = 0; a < f.T; ++a)
    for (std::size_t i = 0; i < f.n; ++i)
      visit([&, a, i](std::size_t atom) { return value(atom, a) == i; }, f.marg_at(a, i));
  for (std::size_t a = 0; a < f.T; ++a)
    for (std::size_t b = 0; b < f.T; ++b) {
      if (a == b) continue;
      for (std::size_t i = 0; i < f.n; ++i)
        for (std::size_t j = 0; j < f.n; ++j)
          visit([&, a, b, i, j](std::size_t atom) { return value(atom, a) == i && value(atom, b) == j; },
                f.cond_at(a, b, i, j) * f.marg_at(a, i));
    }
}

}  // namespace

FeasibilityResult kolmogorov_feasible(const ObservableFamily& f) {
  const std::size_t atoms = atom_count(f);
  const std::size_t rows = 1 + f.T * f.n + f.T * (f.T - 1) * f.n * f.n;
  if ((rows + 1) * (atoms + rows + 1) > kMaxTableau) throw ScaleError("simplex tableau would be too large");
  f.validate();

  simplex::EqualitySystem sys;
  sys.rows = rows;
  sys.cols = atoms;
  sys.a.assign(rows * atoms, 0.0);
  sys.b.reserve(rows);
  std::size_t r = 0;
  for_each_constraint(f, [&](auto&& member, double target) {
    for (std::size_t atom = 0; atom < atoms; ++atom)
      if (member(atom)) sys.at(r, atom) = 1.0;
    sys.b.push_back(target);
    ++r;
  });

  const auto lp = simplex::find_feasible(sys, kStochasticTol);
  FeasibilityResult out;
  out.feasible = lp.feasible;
  if (lp.feasible) out.witness = lp.x;
  return out;
}

double witness_violation(const ObservableFamily& f, const std::vector<double>& witness) {
  f.validate();
  const std::size_t atoms = atom_count(f);
  if (witness.size() != atoms) throw InconsistentInput("witness has the wrong number of atoms");
  double worst = 0.0;
  for (double x : witness) worst = std::max(worst, -x);
  for_each_constraint(f, [&](auto&& member, double target) {
    double sum = 0.0;
    for (std::size_t atom = 0; atom < atoms; ++atom)
      if (member(atom)) sum += witness[atom];
    worst = std::max(worst, std::abs(sum - target));
  });
  return worst;
}

double accardi_invariant(const MelucciStats& s) {
  const double denom = s.pX_given_R - s.pX_given_notR;
  if (!(std::abs(denom) > 1e-12)) throw DegenerateDenominator("P(X|R) equals P(X|not R); the invariant is undefined");
  return (s.pX - s.pX_given_notR) / denom;
}

std::string_view to_string(Verdict v) { return v == Verdict::classical ? "classical" : "nonclassical"; }

Verdict classify_accardi(double A, double tol) {
  return (A >= -tol && A <= 1.0 + tol) ? Verdict::classical : Verdict::nonclassical;
}

double total_probability_residual(const MelucciStats& s) {
  return s.pX - (s.pX_given_R * s.pR + s.pX_given_notR * (1.0 - s.pR));
}

ObservableFamily family_from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    ObservableFamily f(j.at("T").get<std::size_t>(), j.at("n").get<std::size_t>());
    const auto& cond = j.at("cond");
    const auto& marg = j.at("marg");
    if (cond.size() != f.T || marg.size() != f.T) throw InconsistentInput("family arrays must have T entries");
    for (std::size_t a = 0; a < f.T; ++a) {
      if (marg[a].size() != f.n || cond[a].size() != f.T) throw InconsistentInput("family arrays have wrong shape");
      for (std::size_t i = 0; i < f.n; ++i) f.marg_at(a, i) = marg[a][i].get<double>();
      for (std::size_t b = 0; b < f.T; ++b) {
        if (a == b) continue;
        if (cond[a][b].size() != f.n) throw InconsistentInput("family arrays have wrong shape");
        for (std::size_t i = 0; i < f.n; ++i) {
          if (cond[a][b][i].size() != f.n) throw InconsistentInput("family arrays have wrong shape");
          for (std::size_t j2 = 0; j2 < f.n; ++j2) f.cond_at(a, b, i, j2) = cond[a][b][i][j2].get<double>();
        }
      }
    }
    return f;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed family JSON: ") + e.what());
  }
}

}  // namespace rforge::probcheck
