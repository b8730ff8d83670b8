#pragma once

#include <cstddef>
#include <vector>

namespace rforge::simplex {

// Dense row-major equality system A x = b, x >= 0.
struct EqualitySystem {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> a;  // rows * cols
  std::vector<double> b;  // rows

  double& at(std::size_t r, std::size_t c) { return a[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return a[r * cols + c]; }
};

struct FeasibilityResult {
  bool feasible = false;
  std::vector<double> x;        // a feasible point when feasible
  double infeasibility = 0.0;   // optimal phase-1 objective (sum of artificials)
  std::size_t pivots = 0;
};

// Phase-1 simplex with Bland's rule on a dense tableau. Feasible when the
// phase-1 optimum is at most `tolerance`.
FeasibilityResult find_feasible(const EqualitySystem& system, double tolerance = 1e-9);

}  // namespace rforge::simplex
