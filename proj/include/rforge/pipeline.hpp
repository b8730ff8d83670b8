#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "rforge/clicklog.hpp"
#include "rforge/embedding.hpp"
#include "rforge/geodesic.hpp"
#include "rforge/prespace.hpp"

namespace rforge::pipeline {

struct PipelineConfig {
  std::uint64_t seed = 0;

  // Either a log file or synthetic data.
  std::string log_path;
  clicklog::LogFormat log_format = clicklog::LogFormat::jsonl;
  clicklog::SyntheticConfig synthetic;

  prespace::DistanceScheme scheme = prespace::DistanceScheme::cosine;
  std::size_t k = 8;
  embedding::EmbedParams embed;
  geodesic::GridSpec grid;

  // The last `holdout` clicks of each stream are predicted from their
  // prefixes; edges touching them are left out of the metric fit.
  std::size_t holdout = 5;
  double horizon = 1.0;
  std::size_t substeps = 4;

  bool synthetic_input() const { return log_path.empty(); }
  void validate() const;  // ConfigError
};

// 20 x 30 planted streams in the plane, tuned for the round-trip check.
PipelineConfig planted_preset(std::uint64_t seed = 0);

// Keys mirror the struct; relative log paths resolve against `base_dir`.
PipelineConfig config_from_json(std::string_view text, const std::string& base_dir = "");
std::string config_to_json(const PipelineConfig& c);

struct Prediction {
  prespace::PointRef target;
  Eigen::VectorXd predicted;
  Eigen::VectorXd actual;
  double error = 0.0;  // spatial distance between predicted and actual
  double step = 0.0;   // spatial distance from the last prefix point to actual
};

struct PipelineResult {
  clicklog::ClickstreamCollection collection;
  std::vector<std::vector<std::vector<double>>> latent;  // synthetic planted input only
  prespace::LayeredSkeleton skeleton;
  embedding::SpacetimeEmbedding embedding;
  std::optional<geodesic::MetricField> metric;
  std::vector<Prediction> predictions;
  double mean_error = 0.0;
  double mean_step = 0.0;
  std::optional<double> procrustes_rms;
  std::optional<double> latent_diameter;
};

PipelineResult run_pipeline(const PipelineConfig& c);

// stream,seq, predicted coordinates, actual coordinates, error, step
std::string predictions_to_csv(const PipelineResult& r);

}  // namespace rforge::pipeline
