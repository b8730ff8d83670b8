#include "rforge/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "rforge/error.hpp"

namespace rforge::pipeline {

void PipelineConfig::validate() const {
  embed.validate();
  grid.validate();
  if (k < 1) throw ConfigError("k must be positive");
  if (holdout < 1) throw ConfigError("holdout must be positive");
  if (!(horizon > 0.0) || !std::isfinite(horizon)) throw ConfigError("horizon must be positive");
  if (substeps < 1) throw ConfigError("substeps must be positive");
  if (synthetic_input()) {
    if (synthetic.n != embed.n && synthetic.mode == clicklog::SyntheticMode::planted_geodesic)
      throw ConfigError("synthetic latent dimension must match the embedding dimension");
  }
}

PipelineConfig planted_preset(std::uint64_t seed) {
  PipelineConfig c;
  c.seed = seed;
  c.synthetic.num_streams = 20;
  c.synthetic.stream_len = 30;
  c.synthetic.n = 2;
  c.synthetic.mode = clicklog::SyntheticMode::planted_geodesic;
  c.k = 8;
  c.embed.n = 2;
  c.embed.temporal_stiffness = 1e-3;
  c.embed.time_scale = 1.0;
  c.embed.restarts = 4;
  c.embed.seed = seed;
  return c;
}

PipelineConfig config_from_json(std::string_view text, const std::string& base_dir) {
  PipelineConfig c;
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.value("preset", std::string()) == "planted") c = planted_preset();
    c.seed = j.value("seed", c.seed);
    c.embed.seed = c.seed;

    if (j.contains("input")) {
      const auto& in = j.at("input");
      if (in.contains("log")) {
        std::filesystem::path p = in.at("log").get<std::string>();
        if (p.is_relative() && !base_dir.empty()) p = std::filesystem::path(base_dir) / p;
        c.log_path = p.string();
        c.log_format = clicklog::parse_log_format(in.value("format", std::string("jsonl")));
      }
      if (in.contains("synthetic")) {
        const auto& s = in.at("synthetic");
        auto& sc = c.synthetic;
        sc.mode = clicklog::parse_synthetic_mode(s.value("mode", std::string(clicklog::to_string(sc.mode))));
        sc.num_streams = s.value("streams", sc.num_streams);
        sc.stream_len = s.value("length", sc.stream_len);
        sc.n = s.value("n", sc.n);
        sc.latent_extent = s.value("latent_extent", sc.latent_extent);
        sc.directions = s.value("directions", sc.directions);
        sc.bin_width = s.value("bin_width", sc.bin_width);
        sc.bin_weight = s.value("bin_weight", sc.bin_weight);
        sc.vocabulary_size = s.value("vocabulary_size", sc.vocabulary_size);
      }
    }
    if (j.contains("prespace")) {
      const auto& p = j.at("prespace");
      c.scheme = prespace::parse_scheme(p.value("scheme", std::string(prespace::to_string(c.scheme))));
      c.k = p.value("k", c.k);
    }
    if (j.contains("embed")) {
      const auto& e = j.at("embed");
      // Signed reads so negative values reach validation instead of wrapping.
      const auto n = e.value("n", static_cast<long long>(c.embed.n));
      if (n < 0) throw ConfigError("n must be a positive integer");
      c.embed.n = static_cast<std::size_t>(n);
      c.embed.temporal_stiffness = e.value("lambda", c.embed.temporal_stiffness);
      c.embed.time_scale = e.value("time_scale", c.embed.time_scale);
      c.embed.tol = e.value("tol", c.embed.tol);
      c.embed.max_iters = e.value("max_iters", c.embed.max_iters);
      c.embed.restarts = e.value("restarts", c.embed.restarts);
      c.embed.warm_start_iters = e.value("warm_start_iters", c.embed.warm_start_iters);
      c.embed.seed = e.value("seed", c.embed.seed);
    }
    if (j.contains("geodesic")) {
      const auto& g = j.at("geodesic");
      c.grid.cells = g.value("cells", c.grid.cells);
      c.grid.margin = g.value("margin", c.grid.margin);
      c.grid.floor_factor = g.value("floor_factor", c.grid.floor_factor);
      c.holdout = g.value("holdout", c.holdout);
      c.horizon = g.value("horizon", c.horizon);
      c.substeps = g.value("substeps", c.substeps);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed pipeline config: ") + e.what());
  }
  c.validate();
  return c;
}

std::string config_to_json(const PipelineConfig& c) {
  nlohmann::ordered_json j;
  j["seed"] = c.seed;
  if (c.synthetic_input()) {
    const auto& s = c.synthetic;
    j["input"]["synthetic"] = {{"mode", std::string(clicklog::to_string(s.mode))},
                               {"streams", s.num_streams},
                               {"length", s.stream_len},
                               {"n", s.n},
                               {"latent_extent", s.latent_extent},
                               {"directions", s.directions},
                               {"bin_width", s.bin_width},
                               {"bin_weight", s.bin_weight},
                               {"vocabulary_size", s.vocabulary_size}};
  } else {
    j["input"] = {{"log", c.log_path}, {"format", std::string(clicklog::to_string(c.log_format))}};
  }
  j["prespace"] = {{"scheme", std::string(prespace::to_string(c.scheme))}, {"k", c.k}};
  j["embed"] = {{"n", c.embed.n},
                {"lambda", c.embed.temporal_stiffness},
                {"time_scale", c.embed.time_scale},
                {"tol", c.embed.tol},
                {"max_iters", c.embed.max_iters},
                {"restarts", c.embed.restarts},
                {"warm_start_iters", c.embed.warm_start_iters},
                {"seed", c.embed.seed}};
  j["geodesic"] = {{"cells", c.grid.cells},         {"margin", c.grid.margin},   {"floor_factor", c.grid.floor_factor},
                   {"holdout", c.holdout},          {"horizon", c.horizon},      {"substeps", c.substeps}};
  return j.dump(2) + "\n";
}

PipelineResult run_pipeline(const PipelineConfig& c) {
  c.validate();
  PipelineResult r;
  if (c.synthetic_input()) {
    auto data = clicklog::generate_synthetic(c.synthetic, c.seed);
    r.collection = std::move(data.collection);
    r.latent = std::move(data.latent);
  } else {
    std::ifstream in(c.log_path, std::ios::binary);
    if (!in) throw ConfigError("cannot open log '" + c.log_path + "'");
    r.collection = clicklog::parse_log(in, c.log_format);
  }

  r.skeleton = prespace::build_skeleton(r.collection, c.scheme, c.k);
  r.embedding = embedding::embed(r.skeleton, c.embed);

  prespace::LayeredSkeleton fit_skeleton = r.skeleton;
  auto held_out = [&](const prespace::PointRef& p) {
    const auto len = r.collection.streams()[p.stream_index].clicks.size();
    return p.seq + c.holdout >= len;
  };
  fit_skeleton.edges.clear();
  for (const auto& e : r.skeleton.edges)
    if (!held_out(e.a) && !held_out(e.b)) fit_skeleton.edges.push_back(e);
  r.metric = geodesic::fit_metric_field(r.embedding, fit_skeleton, c.grid);

  const auto& coords = r.embedding.coords;
  double err_sum = 0.0, step_sum = 0.0;
  for (std::size_t s = 0; s < r.collection.size(); ++s) {
    const auto len = r.collection.streams()[s].clicks.size();
    if (len < c.holdout + 2) continue;
    std::vector<Eigen::VectorXd> prefix;
    for (std::size_t q = 0; q < len; ++q) {
      const Eigen::VectorXd x = coords.at({s, q});
      if (q + c.holdout >= len && prefix.size() >= 2) {
        Prediction p;
        p.target = {s, q};
        p.predicted = geodesic::predict_next(*r.metric, prefix, c.horizon, c.substeps);
        p.actual = x;
        const auto n = x.size() - 1;
        p.error = (p.predicted - x).tail(n).norm();
        p.step = (x - prefix.back()).tail(n).norm();
        err_sum += p.error;
        step_sum += p.step;
        r.predictions.push_back(std::move(p));
      }
      prefix.push_back(x);
    }
  }
  if (r.predictions.empty()) throw ConfigError("no stream is long enough for the requested holdout");
  r.mean_error = err_sum / static_cast<double>(r.predictions.size());
  r.mean_step = step_sum / static_cast<double>(r.predictions.size());

  if (!r.latent.empty() && !r.latent.front().empty() && r.latent.front().front().size() == c.embed.n) {
    const auto rows = static_cast<Eigen::Index>(coords.points.size());
    const auto n = static_cast<Eigen::Index>(c.embed.n);
    Eigen::MatrixXd ref(rows, n);
    for (Eigen::Index i = 0; i < rows; ++i) {
      const auto& p = coords.points[static_cast<std::size_t>(i)];
      for (Eigen::Index a = 0; a < n; ++a) ref(i, a) = r.latent[p.stream_index][p.seq][static_cast<std::size_t>(a)];
    }
    const auto aligned = embedding::procrustes_align(ref, coords.values.rightCols(n));
    r.procrustes_rms = std::sqrt(aligned.residual / static_cast<double>(rows));
    double diam = 0.0;
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = i + 1; j < rows; ++j) diam = std::max(diam, (ref.row(i) - ref.row(j)).norm());
    r.latent_diameter = diam;
  }
  return r;
}

std::string predictions_to_csv(const PipelineResult& r) {
  std::string out;
  if (r.predictions.empty()) return out;
  const auto m = r.predictions.front().actual.size();
  out = "stream,seq";
  for (const char* prefix : {"pred_", "actual_"}) {
    out += std::string(",") + prefix + "t";
    for (Eigen::Index a = 1; a < m; ++a) out += "," + std::string(prefix) + "x" + std::to_string(a);
  }
  out += ",error,step\n";
  char buf[40];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  for (const auto& p : r.predictions) {
    out += std::to_string(p.target.stream_index) + "," + std::to_string(p.target.seq);
    for (Eigen::Index a = 0; a < m; ++a) out += "," + num(p.predicted(a));
    for (Eigen::Index a = 0; a < m; ++a) out += "," + num(p.actual(a));
    out += "," + num(p.error) + "," + num(p.step) + "\n";
  }
  return out;
}

}  // namespace rforge::pipeline
