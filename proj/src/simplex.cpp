#include "rforge/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rforge/error.hpp"

namespace rforge::simplex {

namespace {

constexpr double kPivotEps = 1e-12;

}  // namespace

FeasibilityResult find_feasible(const EqualitySystem& system, double tolerance) {
  const std::size_t m = system.rows;
  const std::size_t n = system.cols;
  if (system.a.size() != m * n || system.b.size() != m) throw ConfigError("simplex system has inconsistent shape");

  // Columns: n structural, m artificial, then the right-hand side.
  const std::size_t width = n + m + 1;
  const std::size_t rhs = n + m;
  std::vector<double> t((m + 1) * width, 0.0);
  auto cell = [&](std::size_t r, std::size_t c) -> double& { return t[r * width + c]; };
  std::vector<std::size_t> basis(m);

  for (std::size_t r = 0; r < m; ++r) {
    const double sign = system.b[r] < 0.0 ? -1.0 : 1.0;
    for (std::size_t c = 0; c < n; ++c) cell(r, c) = sign * system.at(r, c);
    cell(r, n + r) = 1.0;
    cell(r, rhs) = sign * system.b[r];
    basis[r] = n + r;
  }
  // Objective row holds reduced costs of min sum(artificials); last cell is -objective.
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t c = 0; c < n; ++c) cell(m, c) -= cell(r, c);
  for (std::size_t r = 0; r < m; ++r) cell(m, rhs) -= cell(r, rhs);

  FeasibilityResult result;
  while (true) {
    std::size_t enter = width;
    for (std::size_t c = 0; c < rhs; ++c)
      if (cell(m, c) < -kPivotEps) {
        enter = c;
        break;
      }
    if (enter == width) break;

    std::size_t leave = m;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < m; ++r) {
      const double coef = cell(r, enter);
      if (coef <= kPivotEps) continue;
      const double ratio = cell(r, rhs) / coef;
      if (ratio < best - kPivotEps || (std::abs(ratio - best) <= kPivotEps && basis[r] < basis[leave])) {
        best = ratio;
        leave = r;
      }
    }
    // Phase 1 is bounded below by zero, so an entering column always has a pivot row.
    if (leave == m) break;

    const double pivot = cell(leave, enter);
    for (std::size_t c = 0; c < width; ++c) cell(leave, c) /= pivot;
    for (std::size_t r = 0; r <= m; ++r) {
      if (r == leave) continue;
      const double factor = cell(r, enter);
      if (factor == 0.0) continue;
      for (std::size_t c = 0; c < width; ++c) cell(r, c) -= factor * cell(leave, c);
    }
    basis[leave] = enter;
    ++result.pivots;
  }

  result.infeasibility = std::max(0.0, -cell(m, rhs));
  result.feasible = result.infeasibility <= tolerance;
  if (result.feasible) {
    result.x.assign(n, 0.0);
    for (std::size_t r = 0; r < m; ++r)
      if (basis[r] < n) result.x[basis[r]] = std::max(0.0, cell(r, rhs));
  }
  return result;
}

}  // namespace rforge::simplex
