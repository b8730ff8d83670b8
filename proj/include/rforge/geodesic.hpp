#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "rforge/embedding.hpp"

namespace rforge::geodesic {

struct GridSpec {
  std::size_t cells = 6;       // cells per axis across the bounding box
  std::size_t margin = 1;      // extra cells on each side
  double floor_factor = 1e-3;  // SPD floor = floor_factor * median fitted diagonal

  void validate() const;  // InvalidGrid
};

// Grid of SPD metric tensors over R^{n+1} with multilinear interpolation.
class MetricField {
public:
  using TensorFn = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;

  MetricField(Eigen::VectorXd origin, Eigen::VectorXd spacing, std::vector<std::size_t> node_counts,
              std::vector<Eigen::MatrixXd> tensors, double epsilon);

  // Samples `fn` at every node (then floors to epsilon).
  static MetricField from_function(const Eigen::VectorXd& origin, const Eigen::VectorXd& spacing,
                                   const std::vector<std::size_t>& node_counts, const TensorFn& fn,
                                   double epsilon);

  std::size_t dimension() const { return static_cast<std::size_t>(origin_.size()); }
  const Eigen::VectorXd& origin() const { return origin_; }
  const Eigen::VectorXd& spacing() const { return spacing_; }
  const std::vector<std::size_t>& node_counts() const { return counts_; }
  std::size_t node_total() const { return tensors_.size(); }
  double epsilon() const { return epsilon_; }

  const Eigen::MatrixXd& tensor(std::size_t flat) const { return tensors_.at(flat); }
  std::size_t flat_index(const std::vector<std::size_t>& node) const;
  Eigen::VectorXd node_position(const std::vector<std::size_t>& node) const;
  Eigen::VectorXd node_position(std::size_t flat) const;
  std::vector<std::size_t> unflatten(std::size_t flat) const;

  bool contains(const Eigen::VectorXd& x) const;
  Eigen::VectorXd upper() const;  // far corner of the grid hull

private:
  Eigen::VectorXd origin_;
  Eigen::VectorXd spacing_;
  std::vector<std::size_t> counts_;
  std::vector<Eigen::MatrixXd> tensors_;
  double epsilon_;
};

// Symmetrizes and raises eigenvalues below epsilon to epsilon. Matrices that
// already satisfy the floor are returned unchanged.
Eigen::MatrixXd floor_spd(const Eigen::MatrixXd& g, double epsilon);

// Kernel-weighted least-squares fit of dx^T g dx ~ d^2 over skeleton edges at
// each grid node. Nodes without nearby edges get the identity.
MetricField fit_metric_field(const embedding::SpacetimeEmbedding& e, const prespace::LayeredSkeleton& s,
                             const GridSpec& spec = {});

Eigen::MatrixXd metric_at(const MetricField& f, const Eigen::VectorXd& x);

struct Christoffel {
  std::size_t dim = 0;
  std::vector<double> values;  // [k][i][j], row-major

  double operator()(std::size_t k, std::size_t i, std::size_t j) const { return values[(k * dim + i) * dim + j]; }
  double& operator()(std::size_t k, std::size_t i, std::size_t j) { return values[(k * dim + i) * dim + j]; }
};

// Central differences of the interpolated metric with step h/2 per axis.
Christoffel christoffel(const MetricField& f, const Eigen::VectorXd& x);

struct GeodesicSample {
  Eigen::VectorXd position;
  Eigen::VectorXd velocity;
};

struct GeodesicPath {
  std::vector<GeodesicSample> samples;
  double dt = 0.0;
  bool truncated = false;  // stopped early at the hull boundary
};

// Classical RK4 on x'' = -Gamma(x)[x', x'].
GeodesicPath integrate_geodesic(const MetricField& f, const Eigen::VectorXd& x0, const Eigen::VectorXd& v0,
                                std::size_t steps, double dt);

// Velocity from the last two prefix points (unit parameter spacing), then a
// geodesic step of parameter length `horizon`, split into `substeps` RK4 steps.
Eigen::VectorXd predict_next(const MetricField& f, const std::vector<Eigen::VectorXd>& prefix, double horizon,
                             std::size_t substeps = 4);

double geodesic_energy(const MetricField& f, const GeodesicSample& s);

std::string path_to_csv(const GeodesicPath& path);
std::string field_to_json(const MetricField& f);
MetricField field_from_json(std::string_view text);

}  // namespace rforge::geodesic
