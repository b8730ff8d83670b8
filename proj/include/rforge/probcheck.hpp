#pragma once

#include <cstddef>
#include <optional>
#include <string_view>
#include <vector>

namespace rforge::probcheck {

// Parameters of the bistochastic matrices P(A|B), P(B|C), P(C|A) for three
// dichotomic observables: p = P(A=B), q = P(B=C), r = P(C=A).
struct DichotomicTriple {
  double p = 0.0;
  double q = 0.0;
  double r = 0.0;

  void validate() const;  // RangeError
};

// T observables with n values each. cond(a, b, i, j) = P(A_b = j | A_a = i)
// for a != b; diagonal blocks are ignored.
struct ObservableFamily {
  std::size_t T = 0;
  std::size_t n = 0;
  std::vector<double> cond;  // T*T*n*n
  std::vector<double> marg;  // T*n

  ObservableFamily() = default;
  ObservableFamily(std::size_t observables, std::size_t values);

  double& cond_at(std::size_t a, std::size_t b, std::size_t i, std::size_t j) { return cond[((a * T + b) * n + i) * n + j]; }
  double cond_at(std::size_t a, std::size_t b, std::size_t i, std::size_t j) const { return cond[((a * T + b) * n + i) * n + j]; }
  double& marg_at(std::size_t a, std::size_t i) { return marg[a * n + i]; }
  double marg_at(std::size_t a, std::size_t i) const { return marg[a * n + i]; }

  void validate() const;  // InconsistentInput
};

struct MelucciStats {
  double pX = 0.0;
  double pX_given_R = 0.0;
  double pX_given_notR = 0.0;
  double pR = 0.0;
};

struct BellResult {
  double sum = 0.0;
  bool classical_consistent = false;
};

// P(a=b) + P(b=c) + P(a=c) >= 1 for any three classical dichotomic variables.
BellResult bell_sum(double p_ab, double p_bc, double p_ac);

// |p+q-1| <= r <= 1-|p-q|.
bool accardi_fedullo_classical(const DichotomicTriple& t);

// Family for the triple with uniform marginals (observables A, B, C).
ObservableFamily family_from_triple(const DichotomicTriple& t);

struct FeasibilityResult {
  bool feasible = false;
  std::optional<std::vector<double>> witness;  // atom weights, atom index = sum_a value_a * n^(T-1-a)
};

inline constexpr std::size_t kMaxAtoms = 1'000'000;

// Does a joint distribution over the n^T value assignments reproduce all
// marginals and pairwise conditionals?
FeasibilityResult kolmogorov_feasible(const ObservableFamily& f);

// Largest violation of any marginal or pairwise constraint by `witness`.
double witness_violation(const ObservableFamily& f, const std::vector<double>& witness);

// (P(X) - P(X|not R)) / (P(X|R) - P(X|not R)).
double accardi_invariant(const MelucciStats& s);

enum class Verdict { classical, nonclassical };
std::string_view to_string(Verdict v);

// classical iff -tol <= A <= 1 + tol.
Verdict classify_accardi(double A, double tol = 0.0);

// pX - [pX|R * pR + pX|notR * (1 - pR)].
double total_probability_residual(const MelucciStats& s);

// {T, n, cond: [T][T][n][n], marg: [T][n]}
ObservableFamily family_from_json(std::string_view text);

}  // namespace rforge::probcheck
