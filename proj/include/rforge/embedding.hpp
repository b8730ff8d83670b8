#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "rforge/prespace.hpp"

namespace rforge::embedding {

using prespace::LayeredSkeleton;
using prespace::PointRef;

struct EmbedParams {
  std::size_t n = 2;               // spatial dimension
  std::size_t max_iters = 20000;
  double tol = 1e-10;              // relative stress improvement that stops descent
  double time_scale = 1.0;         // temporal spacing of layers
  double temporal_stiffness = 0.1; // weight of the thread-continuity penalty
  std::uint64_t seed = 0;

  // Warm start: descent on all-pairs skeleton shortest-path distances before
  // the edge-only refinement. Skipped above warm_start_max_points.
  std::size_t warm_start_iters = 3000;
  std::size_t warm_start_max_points = 4000;

  // Independent starts; the one with the lowest final stress is kept. Start 0
  // uses `seed` itself.
  std::size_t restarts = 1;

  void validate() const;
};

// Coordinates indexed by point. Rows follow `points`, which is sorted;
// column 0 is time, columns 1..n are spatial.
struct Coordinates {
  std::vector<PointRef> points;
  Eigen::MatrixXd values;

  std::size_t index_of(const PointRef& p) const;  // MissingCoordError
  Eigen::VectorXd at(const PointRef& p) const { return values.row(static_cast<Eigen::Index>(index_of(p))).transpose(); }
  std::size_t dimension() const { return static_cast<std::size_t>(values.cols()); }
};

struct SpacetimeEmbedding {
  Coordinates coords;
  EmbedParams params;
  double final_stress = 0.0;
  std::vector<double> stress_history;  // accepted iterations of the edge refinement
};

// Normalized edge stress plus continuity penalty; the spatial norm ignores the
// time column.
double stress(const LayeredSkeleton& skeleton, const Coordinates& coords, double temporal_stiffness);

SpacetimeEmbedding embed(const LayeredSkeleton& skeleton, const EmbedParams& params);

struct ProcrustesResult {
  Eigen::MatrixXd aligned;
  double residual = 0.0;  // sum of squared row differences after alignment
};

// Rotation/reflection plus translation of `coords` minimizing the squared
// distance to `reference` (same shape required).
ProcrustesResult procrustes_align(const Eigen::MatrixXd& reference, const Eigen::MatrixXd& coords);

// Spatial block only: the time column of `coords` is carried through unchanged.
ProcrustesResult procrustes_align(const Coordinates& reference, const Coordinates& coords);

std::string embedding_to_csv(const SpacetimeEmbedding& e);
std::string embedding_sidecar_json(const SpacetimeEmbedding& e);
SpacetimeEmbedding embedding_from_csv(std::string_view csv, std::string_view sidecar_json);

}  // namespace rforge::embedding
