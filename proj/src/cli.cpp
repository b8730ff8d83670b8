#include "rforge/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "rforge/automaton.hpp"
#include "rforge/clicklog.hpp"
#include "rforge/embedding.hpp"
#include "rforge/error.hpp"
#include "rforge/geodesic.hpp"
#include "rforge/melucci.hpp"
#include "rforge/pipeline.hpp"
#include "rforge/prespace.hpp"
#include "rforge/probcheck.hpp"
#include "rforge/rota.hpp"

namespace rforge::cli {

using json = nlohmann::ordered_json;

namespace {

class UsageError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<double> parse_numbers(std::string_view text) {
  std::vector<double> out;
  std::string cell;
  std::stringstream ss{std::string(text)};
  while (std::getline(ss, cell, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(cell, &used));
      if (used != cell.size()) throw std::invalid_argument(cell);
    } catch (const std::exception&) {
      throw UsageError("not a number: '" + cell + "'");
    }
  }
  return out;
}

Eigen::VectorXd to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

std::vector<std::string> split(std::string_view text, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss{std::string(text)};
  while (std::getline(ss, cell, sep)) out.push_back(cell);
  return out;
}

// Files are staged and written only after the whole command succeeded.
class Run {
public:
  explicit Run(std::string command) : command_(std::move(command)), start_(std::chrono::steady_clock::now()) {
    report_["schema"] = std::string(kReportSchema);
    report_["command"] = command_;
    report_["inputs"] = json::object();
    report_["outputs"] = json::object();
    report_["checks"] = json::object();
  }

  json& inputs() { return report_["inputs"]; }
  json& outputs() { return report_["outputs"]; }
  json& checks() { return report_["checks"]; }

  void stage(const std::string& path, std::string content) {
    if (!path.empty()) files_.emplace_back(path, std::move(content));
  }

  void finish(const std::string& report_path, bool to_stdout, std::ostream& out) {
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    report_["timing"] = {{"wall_seconds", elapsed}};
    const std::string text = report_.dump(2) + "\n";
    stage(report_path, text);
    for (const auto& [path, content] : files_) write_file_atomic(path, content);
    if (to_stdout) out << text;
  }

private:
  std::string command_;
  std::chrono::steady_clock::time_point start_;
  json report_;
  std::vector<std::pair<std::string, std::string>> files_;
};

struct Common {
  std::string report;
  bool to_stdout = false;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--report", c.report, "Write the JSON report to this file");
  app->add_flag("--stdout", c.to_stdout, "Print the JSON report on standard output");
}

json skeleton_summary(const prespace::LayeredSkeleton& s) {
  std::size_t threads = 0;
  for (const auto& e : s.edges)
    if (e.kind == prespace::EdgeKind::thread) ++threads;
  return {{"layers", s.layers.size()},
          {"points", s.point_count()},
          {"edges", s.edges.size()},
          {"thread_edges", threads},
          {"neighbor_edges", s.edges.size() - threads}};
}

bool history_nonincreasing(const std::vector<double>& h) {
  for (std::size_t i = 1; i < h.size(); ++i)
    if (h[i] > h[i - 1]) return false;
  return true;
}

bool time_exact(const embedding::SpacetimeEmbedding& e) {
  for (std::size_t i = 0; i < e.coords.points.size(); ++i)
    if (e.coords.values(static_cast<Eigen::Index>(i), 0) !=
        static_cast<double>(e.coords.points[i].seq) * e.params.time_scale)
      return false;
  return true;
}

double min_node_eigenvalue(const geodesic::MetricField& f) {
  double lo = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < f.node_total(); ++i) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(f.tensor(i), Eigen::EigenvaluesOnly);
    lo = std::min(lo, eig.eigenvalues().minCoeff());
  }
  return lo;
}

std::string latent_to_csv(const std::vector<std::vector<std::vector<double>>>& latent) {
  std::string out = "stream,seq";
  const std::size_t n = latent.empty() || latent.front().empty() ? 0 : latent.front().front().size();
  for (std::size_t a = 1; a <= n; ++a) out += ",x" + std::to_string(a);
  out += "\n";
  char buf[40];
  for (std::size_t s = 0; s < latent.size(); ++s)
    for (std::size_t q = 0; q < latent[s].size(); ++q) {
      out += std::to_string(s) + "," + std::to_string(q);
      for (double v : latent[s][q]) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        out += std::string(",") + buf;
      }
      out += "\n";
    }
  return out;
}

json poset_summary(const automaton::MooreAutomaton& m, const automaton::PropositionPoset& p) {
  return json::parse(automaton::poset_to_json(m, p));
}

json partition_json(const automaton::MooreAutomaton& m, const automaton::StatePartition& p) {
  json cells = json::array();
  for (const auto& cell : p.cells) {
    std::vector<std::string> names;
    for (auto s : cell) names.push_back(m.states()[s]);
    cells.push_back(names);
  }
  return cells;
}

}  // namespace

void write_file_atomic(const std::string& path, std::string_view content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp-" + std::to_string(std::hash<std::string>{}(path) % 1000000);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write '" + tmp.string() + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw ConfigError("failed writing '" + tmp.string() + "'");
    }
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw ConfigError("cannot move output into place at '" + path + "'");
  }
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"reality-forge: click-log spacetime embedding, geodesic prediction and classicality checks",
               "reality-forge"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  std::function<void()> action;
  Common common;

  // ---------------------------------------------------------------- ingest
  std::string ingest_input, ingest_format = "jsonl", ingest_out, ingest_out_format;
  auto* ingest = app.add_subcommand("ingest", "Parse and validate a click log");
  ingest->add_option("input", ingest_input, "Log file")->required();
  ingest->add_option("--format", ingest_format, "jsonl or tsv")->capture_default_str();
  ingest->add_option("--out", ingest_out, "Write the normalized log here");
  ingest->add_option("--out-format", ingest_out_format, "Format of --out (default: --format)");
  add_common(ingest, common);
  ingest->callback([&] {
    action = [&] {
      Run run("ingest");
      const auto format = clicklog::parse_log_format(ingest_format);
      run.inputs() = {{"input", ingest_input}, {"format", ingest_format}};
      std::ifstream in(ingest_input, std::ios::binary);
      if (!in) throw ConfigError("cannot open '" + ingest_input + "'");
      const auto collection = clicklog::parse_log(in, format);
      run.outputs() = {{"streams", collection.size()},
                       {"clicks", collection.click_count()},
                       {"vocabulary", collection.vocabulary().size()},
                       {"max_stream_length", collection.max_stream_length()}};
      if (!ingest_out.empty()) {
        const auto of = ingest_out_format.empty() ? format : clicklog::parse_log_format(ingest_out_format);
        run.stage(ingest_out, clicklog::serialize_log(collection, of));
        run.outputs()["log"] = ingest_out;
      }
      run.finish(common.report, common.to_stdout, out);
    };
  });

  // ---------------------------------------------------------------- synth
  clicklog::SyntheticConfig synth_cfg;
  std::string synth_mode = "planted_geodesic", synth_format = "jsonl", synth_out, synth_latent;
  std::uint64_t synth_seed = 0;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic click log");
  synth->add_option("--mode", synth_mode, "planted_geodesic or random_text")->capture_default_str();
  synth->add_option("--streams", synth_cfg.num_streams)->capture_default_str();
  synth->add_option("--length", synth_cfg.stream_len)->capture_default_str();
  synth->add_option("--n", synth_cfg.n, "Latent dimension")->capture_default_str();
  synth->add_option("--extent", synth_cfg.latent_extent)->capture_default_str();
  synth->add_option("--seed", synth_seed)->capture_default_str();
  synth->add_option("--format", synth_format)->capture_default_str();
  synth->add_option("--out", synth_out, "Log output file")->required();
  synth->add_option("--latent-out", synth_latent, "Latent coordinates CSV (planted mode)");
  add_common(synth, common);
  synth->callback([&] {
    action = [&] {
      Run run("synth");
      synth_cfg.mode = clicklog::parse_synthetic_mode(synth_mode);
      const auto format = clicklog::parse_log_format(synth_format);
      run.inputs() = {{"mode", synth_mode},
                      {"streams", synth_cfg.num_streams},
                      {"length", synth_cfg.stream_len},
                      {"n", synth_cfg.n},
                      {"extent", synth_cfg.latent_extent},
                      {"seed", synth_seed},
                      {"format", synth_format}};
      const auto data = clicklog::generate_synthetic(synth_cfg, synth_seed);
      run.stage(synth_out, clicklog::serialize_log(data.collection, format));
      run.outputs() = {{"log", synth_out}, {"streams", data.collection.size()}, {"clicks", data.collection.click_count()}};
      if (!synth_latent.empty()) {
        if (data.latent.empty()) throw ConfigError("--latent-out needs planted_geodesic mode");
        run.stage(synth_latent, latent_to_csv(data.latent));
        run.outputs()["latent"] = synth_latent;
      }
      run.finish(common.report, common.to_stdout, out);
    };
  });

  // ---------------------------------------------------------------- prespace
  std::string pre_log, pre_format = "jsonl", pre_scheme = "cosine", pre_out;
  std::size_t pre_k = 8;
  auto* pre = app.add_subcommand("prespace", "Build the layered skeleton of a click log");
  pre->add_option("--log", pre_log, "Log file")->required();
  pre->add_option("--format", pre_format)->capture_default_str();
  pre->add_option("--scheme", pre_scheme, "cosine or jaccard")->capture_default_str();
  pre->add_option("--k", pre_k, "Neighbors per point")->capture_default_str();
  pre->add_option("--out", pre_out, "Skeleton JSON output")->required();
  add_common(pre, common);
  pre->callback([&] {
    action = [&] {
      Run run("prespace");
      run.inputs() = {{"log", pre_log}, {"format", pre_format}, {"scheme", pre_scheme}, {"k", pre_k}};
      const auto collection = clicklog::parse_log(read_file(pre_log), clicklog::parse_log_format(pre_format));
      const auto skel = prespace::build_skeleton(collection, prespace::parse_scheme(pre_scheme), pre_k);
      run.stage(pre_out, prespace::skeleton_to_json(skel));
      run.outputs() = skeleton_summary(skel);
      run.outputs()["skeleton"] = pre_out;
      run.finish(common.report, common.to_stdout, out);
    };
  });

  // ---------------------------------------------------------------- embed
  embedding::EmbedParams emb_params;
  std::string emb_skeleton, emb_out, emb_sidecar;
  auto* emb = app.add_subcommand("embed", "Embed a skeleton in R^{n+1}");
  emb->add_option("--skeleton", emb_skeleton)->required();
  emb->add_option("--n", emb_params.n, "Spatial dimension")->capture_default_str();
  emb->add_option("--lambda", emb_params.temporal_stiffness, "Thread continuity weight")->capture_default_str();
  emb->add_option("--dt", emb_params.time_scale, "Layer spacing in time")->capture_default_str();
  emb->add_option("--tol", emb_params.tol)->capture_default_str();
  emb->add_option("--max-iters", emb_params.max_iters)->capture_default_str();
  emb->add_option("--restarts", emb_params.restarts)->capture_default_str();
  emb->add_option("--seed", emb_params.seed)->capture_default_str();
  emb->add_option("--out", emb_out, "Coordinates CSV")->required();
  emb->add_option("--sidecar", emb_sidecar, "Parameters JSON (default: <out>.json)");
  add_common(emb, common);
  emb->callback([&] {
    action = [&] {
      Run run("embed");
      run.inputs() = {{"skeleton", emb_skeleton},     {"n", emb_params.n},
                      {"lambda", emb_params.temporal_stiffness}, {"dt", emb_params.time_scale},
                      {"tol", emb_params.tol},        {"max_iters", emb_params.max_iters},
                      {"restarts", emb_params.restarts}, {"seed", emb_params.seed}};
      emb_params.validate();
      const auto skel = prespace::skeleton_from_json(read_file(emb_skeleton));
      const auto e = embedding::embed(skel, emb_params);
      const std::string sidecar = emb_sidecar.empty() ? emb_out + ".json" : emb_sidecar;
      run.stage(emb_out, embedding::embedding_to_csv(e));
      run.stage(sidecar, embedding::embedding_sidecar_json(e));
      run.outputs() = {{"embedding", emb_out},
                       {"sidecar", sidecar},
                       {"final_stress", e.final_stress},
                       {"iterations", e.stress_history.size() - 1}};
      run.checks() = {{"stress_nonincreasing", history_nonincreasing(e.stress_history)},
                      {"time_coordinates_exact", time_exact(e)}};
      run.finish(common.report, common.to_stdout, out);
    };
  });

  // ---------------------------------------------------------------- geodesic
  geodesic::GridSpec geo_grid;
  std::string geo_embedding, geo_sidecar, geo_skeleton, geo_metric_out, geo_x0, geo_v0, geo_path_out;
  std::size_t geo_steps = 100;
  double geo_dt = 0.1;
  auto* geo = app.add_subcommand("geodesic", "Fit the metric field and optionally integrate a geodesic");
  geo->add_option("--embedding", geo_embedding, "Coordinates CSV")->required();
  geo->add_option("--sidecar", geo_sidecar, "Parameters JSON (default: <embedding>.json)");
  geo->add_option("--skeleton", geo_skeleton)->required();
  geo->add_option("--cells", geo_grid.cells)->capture_default_str();
  geo->add_option("--margin", geo_grid.margin)->capture_default_str();
  geo->add_option("--floor", geo_grid.floor_factor, "SPD floor relative to the median diagonal")->capture_default_str();
  geo->add_option("--metric-out", geo_metric_out, "Metric field JSON");
  geo->add_option("--x0", geo_x0, "Start point, comma-separated (t,x1,..)");
  geo->add_option("--v0", geo_v0, "Start velocity, comma-separated");
  geo->add_option("--steps", geo_steps)->capture_default_str();
  geo->add_option("--dt", geo_dt)->capture_default_str();
  geo->add_option("--path-out", geo_path_out, "Geodesic path CSV");
  add_common(geo, common);
  geo->callback([&] {
    action = [&] {
      Run run("geodesic");
      run.inputs() = {{"embedding", geo_embedding}, {"skeleton", geo_skeleton}, {"cells", geo_grid.cells},
                      {"margin", geo_grid.margin},  {"floor", geo_grid.floor_factor}};
      if (geo_x0.empty() != geo_v0.empty()) throw UsageError("--x0 and --v0 go together");
      const std::string sidecar = geo_sidecar.empty() ? geo_embedding + ".json" : geo_sidecar;
      const auto e = embedding::embedding_from_csv(read_file(geo_embedding), read_file(sidecar));
      const auto skel = prespace::skeleton_from_json(read_file(geo_skeleton));
      const auto field = geodesic::fit_metric_field(e, skel, geo_grid);
      run.stage(geo_metric_out, geodesic::field_to_json(field));
      run.outputs() = {{"nodes", field.node_total()}, {"epsilon", field.epsilon()}};
      if (!geo_metric_out.empty()) run.outputs()["metric"] = geo_metric_out;
      run.checks() = {{"node_tensors_above_floor", min_node_eigenvalue(field) >= field.epsilon() * (1.0 - 1e-9)}};
      if (!geo_x0.empty()) {
        const auto x0 = to_vector(parse_numbers(geo_x0));
        const auto v0 = to_vector(parse_numbers(geo_v0));
        run.inputs()["x0"] = to_std(x0);
        run.inputs()["v0"] = to_std(v0);
        run.inputs()["steps"] = geo_steps;
        run.inputs()["dt"] = geo_dt;
        const auto path = geodesic::integrate_geodesic(field, x0, v0, geo_steps, geo_dt);
        run.stage(geo_path_out, geodesic::path_to_csv(path));
        run.outputs()["path_samples"] = path.samples.size();
        run.outputs()["truncated"] = path.truncated;
        run.outputs()["end"] = to_std(path.samples.back().position);
        if (!geo_path_out.empty()) run.outputs()["path"] = geo_path_out;
      }
      run.finish(common.report, common.to_stdout, out);
    };
  });

  // ---------------------------------------------------------------- predict
  std::string pred_metric, pred_prefix, pred_embedding, pred_sidecar;
  std::size_t pred_stream = 0, pred_upto = 0, pred_substeps = 4;
  double pred_horizon = 1.0;
  auto* pred = app.add_subcommand("predict", "Predict the next point of a prefix by a geodesic step");
  pred->add_option("--metric", pred_metric, "Metric field JSON")->required();
  pred->add_option("--prefix", pred_prefix, "Points separated by ';', coordinates by ','");
  pred->add_option("--embedding", pred_embedding, "Take the prefix from this coordinates CSV");
  pred->add_option("--sidecar", pred_sidecar, "Parameters JSON (default: <embedding>.json)");
  pred->add_option("--stream", pred_stream, "Stream index in the embedding");
  pred->add_option("--upto", pred_upto, "Predict click `upto` from clicks [0, upto)");
  pred->add_option("--horizon", pred_horizon)->capture_default_str();
  pred->add_option("--substeps", pred_substeps)->capture_default_str();
  add_common(pred, common);
  pred->callback([&] {
    action = [&] {
      Run run("predict");
      if (pred_prefix.empty() == pred_embedding.empty()) throw UsageError("give exactly one of --prefix and --embedding");
      const auto field = geodesic::field_from_json(read_file(pred_metric));
      std::vector<Eigen::VectorXd> prefix;
      std::optional<Eigen::VectorXd> actual;
      run.inputs() = {{"metric", pred_metric}, {"horizon", pred_horizon}, {"substeps", pred_substeps}};
      if (!pred_prefix.empty()) {
        for (const auto& point : split(pred_prefix, ';')) prefix.push_back(to_vector(parse_numbers(point)));
        run.inputs()["prefix"] = pred_prefix;
      } else {
        const std::string sidecar = pred_sidecar.empty() ? pred_embedding + ".json" : pred_sidecar;
        const auto e = embedding::embedding_from_csv(read_file(pred_embedding), read_file(sidecar));
        for (std::size_t q = 0; q < pred_upto; ++q) prefix.push_back(e.coords.at({pred_stream, q}));
        const prespace::PointRef next{pred_stream, pred_upto};
        try {
          actual = e.coords.at(next);
        } catch (const MissingCoordError&) {
        }
        run.inputs()["embedding"] = pred_embedding;
        run.inputs()["stream"] = pred_stream;
        run.inputs()["upto"] = pred_upto;
      }
      const auto p = geodesic::predict_next(field, prefix, pred_horizon, pred_substeps);
      run.outputs()["predicted"] = to_std(p);
      if (actual) {
        run.outputs()["actual"] = to_std(*actual);
        run.outputs()["error"] = (p - *actual).norm();
      }
      run.finish(common.report, common.to_stdout, out);
    };
  });

  // ---------------------------------------------------------------- probcheck
  auto* prob = app.add_subcommand("probcheck", "Classical (single sample space) consistency checks");
  prob->require_subcommand(1);

  double bell_ab = 0, bell_bc = 0, bell_ac = 0;
  auto* bell = prob->add_subcommand("bell", "Bell sum P(a=b)+P(b=c)+P(a=c) >= 1");
  bell->add_option("--p-ab", bell_ab)->required();
  bell->add_option("--p-bc", bell_bc)->required();
  bell->add_option("--p-ac", bell_ac)->required();
  add_common(bell, common);
  bell->callback([&] {
    action = [&] {
      Run run("probcheck bell");
      run.inputs() = {{"p_ab", bell_ab}, {"p_bc", bell_bc}, {"p_ac", bell_ac}};
      const auto r = probcheck::bell_sum(bell_ab, bell_bc, bell_ac);
      run.outputs() = {{"test", "bell"}, {"value", r.sum}, {"verdict", r.classical_consistent ? "consistent" : "violated"}};
      run.finish(common.report, common.to_stdout, out);
    };
  });

  probcheck::DichotomicTriple triple;
  auto* acc = prob->add_subcommand("accardi", "Three dichotomic observables: closed form and LP");
  acc->add_option("--p", triple.p, "P(A=B)")->required();
  acc->add_option("--q", triple.q, "P(B=C)")->required();
  acc->add_option("--r", triple.r, "P(C=A)")->required();
  add_common(acc, common);
  acc->callback([&] {
    action = [&] {
      Run run("probcheck accardi");
      triple.validate();
      run.inputs() = {{"p", triple.p}, {"q", triple.q}, {"r", triple.r}};
      const bool closed = probcheck::accardi_fedullo_classical(triple);
      const auto family = probcheck::family_from_triple(triple);
      const auto lp = probcheck::kolmogorov_feasible(family);
      run.outputs() = {{"test", "accardi_fedullo"},
                       {"value", {{"lower", std::abs(triple.p + triple.q - 1.0)},
                                  {"upper", 1.0 - std::abs(triple.p - triple.q)}}},
                       {"verdict", closed ? "classical" : "nonclassical"},
                       {"lp_verdict", lp.feasible ? "classical" : "nonclassical"}};
      run.checks() = {{"closed_form_matches_lp", closed == lp.feasible}};
      if (lp.witness) run.checks()["witness_violation"] = probcheck::witness_violation(family, *lp.witness);
      run.finish(common.report, common.to_stdout, out);
    };
  });

  std::string lp_family, lp_witness_out;
  auto* lp = prob->add_subcommand("lp", "Joint-distribution feasibility for an observable family");
  lp->add_option("--family", lp_family, "Family JSON {T, n, cond, marg}")->required();
  lp->add_option("--witness-out", lp_witness_out, "Write the witness distribution (JSON) here");
  add_common(lp, common);
  lp->callback([&] {
    action = [&] {
      Run run("probcheck lp");
      run.inputs() = {{"family", lp_family}};
      const auto family = probcheck::family_from_json(read_file(lp_family));
      const auto r = probcheck::kolmogorov_feasible(family);
      run.outputs() = {{"test", "kolmogorov_lp"},
                       {"value", r.feasible},
                       {"verdict", r.feasible ? "classical" : "nonclassical"}};
      if (r.witness) {
        run.checks()["witness_violation"] = probcheck::witness_violation(family, *r.witness);
        run.stage(lp_witness_out, json(*r.witness).dump() + "\n");
        if (!lp_witness_out.empty()) run.outputs()["witness"] = lp_witness_out;
      }
      run.finish(common.report, common.to_stdout, out);
    };
  });

  probcheck::MelucciStats inv_stats;
  std::optional<double> inv_pr;
  double inv_tol = 0.0;
  auto* inv = prob->add_subcommand("invariant", "Accardi invariant A and its [0, 1] bound");
  inv->add_option("--px", inv_stats.pX, "P(X)")->required();
  inv->add_option("--px-r", inv_stats.pX_given_R, "P(X|R)")->required();
  inv->add_option("--px-notr", inv_stats.pX_given_notR, "P(X|not R)")->required();
  inv->add_option("--pr", inv_pr, "P(R), enables the total-probability residual");
  inv->add_option("--tol", inv_tol, "Slack on the bound")->capture_default_str();
  add_common(inv, common);
  inv->callback([&] {
    action = [&] {
      Run run("probcheck invariant");
      run.inputs() = {{"px", inv_stats.pX}, {"px_r", inv_stats.pX_given_R}, {"px_notr", inv_stats.pX_given_notR},
                      {"tol", inv_tol}};
      const double A = probcheck::accardi_invariant(inv_stats);
      run.outputs() = {{"test", "accardi_invariant"},
                       {"value", A},
                       {"verdict", std::string(probcheck::to_string(probcheck::classify_accardi(A, inv_tol)))}};
      if (inv_pr) {
        inv_stats.pR = *inv_pr;
        run.inputs()["pr"] = *inv_pr;
        run.outputs()["total_probability_residual"] = probcheck::total_probability_residual(inv_stats);
      }
      run.finish(common.report, common.to_stdout, out);
    };
  });

  // ---------------------------------------------------------------- melucci
  melucci::SourceConfig mel_cfg;
  std::string mel_config, mel_mode = "all", mel_counts_out;
  double mel_z = 3.0;
  auto* mel = app.add_subcommand("melucci", "Simulate the relevance two-slit experiment");
  mel->add_option("--config", mel_config, "Source config JSON (flags below override nothing when given)");
  mel->add_option("--pr", mel_cfg.pR)->capture_default_str();
  mel->add_option("--px-r", mel_cfg.pX_given_R)->capture_default_str();
  mel->add_option("--px-notr", mel_cfg.pX_given_notR)->capture_default_str();
  mel->add_option("--delta", mel_cfg.delta)->capture_default_str();
  mel->add_option("--N", mel_cfg.N, "Documents that must pass the slit")->capture_default_str();
  mel->add_option("--seed", mel_cfg.seed)->capture_default_str();
  mel->add_option("--mode", mel_mode, "filter_R, filter_notR, no_filter or all")->capture_default_str();
  mel->add_option("--z", mel_z, "Standard errors of slack for the verdict")->capture_default_str();
  mel->add_option("--counts-out", mel_counts_out, "Counts as JSON lines");
  add_common(mel, common);
  mel->callback([&] {
    action = [&] {
      Run run("melucci");
      if (!mel_config.empty()) mel_cfg = melucci::config_from_json(read_file(mel_config));
      mel_cfg.validate();
      run.inputs() = {{"pR", mel_cfg.pR},       {"pX_given_R", mel_cfg.pX_given_R},
                      {"pX_given_notR", mel_cfg.pX_given_notR}, {"delta", mel_cfg.delta},
                      {"N", mel_cfg.N},         {"seed", mel_cfg.seed},
                      {"mode", mel_mode},       {"z", mel_z}};
      std::vector<melucci::ExperimentCounts> counts;
      if (mel_mode == "all") {
        for (auto m : {melucci::Mode::filter_R, melucci::Mode::filter_notR, melucci::Mode::no_filter})
          counts.push_back(melucci::run_experiment(mel_cfg, m));
      } else {
        counts.push_back(melucci::run_experiment(mel_cfg, melucci::parse_mode(mel_mode)));
      }
      std::string lines;
      json jc = json::array();
      for (const auto& c : counts) {
        lines += melucci::counts_to_json(c) + "\n";
        jc.push_back(json::parse(melucci::counts_to_json(c)));
      }
      run.stage(mel_counts_out, lines);
      run.outputs()["counts"] = jc;
      if (counts.size() == 3) {
        const auto st = melucci::estimate_stats(counts[0], counts[1], counts[2]);
        const auto A = melucci::accardi_estimate(st);
        run.outputs()["stats"] = {{"pX", st.value.pX},
                                  {"pX_given_R", st.value.pX_given_R},
                                  {"pX_given_notR", st.value.pX_given_notR},
                                  {"pR", st.value.pR}};
        run.outputs()["standard_errors"] = {{"pX", st.se.pX},
                                            {"pX_given_R", st.se.pX_given_R},
                                            {"pX_given_notR", st.se.pX_given_notR},
                                            {"pR", st.se.pR}};
        run.outputs()["test"] = "accardi_invariant";
        run.outputs()["value"] = A.value;
        run.outputs()["se"] = A.se;
        run.outputs()["verdict"] = std::string(probcheck::to_string(probcheck::classify_accardi(A.value, mel_z * A.se)));
        run.outputs()["total_probability_residual"] = probcheck::total_probability_residual(st.value);
        run.outputs()["residual_se"] = melucci::residual_se(st);
      }
      if (!mel_counts_out.empty()) run.outputs()["counts_file"] = mel_counts_out;
      run.finish(common.report, common.to_stdout, out);
    };
  });

  // ---------------------------------------------------------------- automaton
  auto* aut = app.add_subcommand("automaton", "Moore automaton experiments and property logics");
  aut->require_subcommand(1);
  std::string aut_preset, aut_file;
  auto load_automaton = [&] {
    if (aut_preset.empty() == aut_file.empty()) throw UsageError("give exactly one of --preset and --automaton");
    return aut_preset.empty() ? automaton::automaton_from_json(read_file(aut_file)) : automaton::preset(aut_preset);
  };
  auto add_source = [&](CLI::App* sub) {
    sub->add_option("--preset", aut_preset, "toggler, hit_detector or finkelstein");
    sub->add_option("--automaton", aut_file, "Automaton JSON");
    add_common(sub, common);
  };
  auto source_json = [&]() -> json {
    return aut_preset.empty() ? json{{"automaton", aut_file}} : json{{"preset", aut_preset}};
  };

  std::string run_word, run_state;
  auto* arun = aut->add_subcommand("run", "Output word for an input word and initial state");
  add_source(arun);
  arun->add_option("--word", run_word, "Comma-separated input symbols (empty for none)");
  arun->add_option("--state", run_state, "Initial state")->required();
  arun->callback([&] {
    action = [&] {
      Run run("automaton run");
      const auto m = load_automaton();
      run.inputs() = source_json();
      run.inputs()["word"] = run_word;
      run.inputs()["state"] = run_state;
      const auto outs = automaton::run_experiment(m, automaton::parse_word(m, run_word), m.state_index(run_state));
      std::vector<std::string> names;
      for (auto o : outs) names.push_back(m.outputs()[o]);
      run.outputs()["outputs"] = names;
      run.finish(common.report, common.to_stdout, out);
    };
  });

  std::string part_word;
  auto* apart = aut->add_subcommand("partition", "Partition of the initial states by an experiment");
  add_source(apart);
  apart->add_option("--word", part_word, "Comma-separated input symbols (empty for none)");
  apart->callback([&] {
    action = [&] {
      Run run("automaton partition");
      const auto m = load_automaton();
      run.inputs() = source_json();
      run.inputs()["word"] = part_word;
      run.outputs()["cells"] = partition_json(m, automaton::experiment_partition(m, automaton::parse_word(m, part_word)));
      run.finish(common.report, common.to_stdout, out);
    };
  });

  std::size_t logic_len = 1;
  std::string logic_mode = "all_cells", logic_accept, logic_out;
  auto* alogic = aut->add_subcommand("logic", "Poset of experimentally decidable propositions");
  add_source(alogic);
  alogic->add_option("--max-len", logic_len)->capture_default_str();
  alogic->add_option("--mode", logic_mode, "all_cells or designated")->capture_default_str();
  alogic->add_option("--accept-outputs", logic_accept,
                     "Designated mode: comma-separated outputs; a cell counts when all its outputs are listed");
  alogic->add_option("--poset-out", logic_out, "Poset JSON");
  alogic->callback([&] {
    action = [&] {
      Run run("automaton logic");
      const auto m = load_automaton();
      const auto mode = automaton::parse_logic_mode(logic_mode);
      run.inputs() = source_json();
      run.inputs()["max_len"] = logic_len;
      run.inputs()["mode"] = logic_mode;
      automaton::OutputPredicate pred;
      if (mode == automaton::LogicMode::designated) {
        if (logic_accept.empty()) throw UsageError("designated mode needs --accept-outputs");
        std::vector<bool> ok(m.outputs().size(), false);
        for (const auto& name : split(logic_accept, ',')) ok[m.output_index(name)] = true;
        pred = [ok](const std::vector<std::size_t>& outs) {
          return std::all_of(outs.begin(), outs.end(), [&](std::size_t o) { return ok[o]; });
        };
        run.inputs()["accept_outputs"] = logic_accept;
      }
      const auto poset = automaton::property_logic(m, logic_len, mode, pred);
      run.stage(logic_out, automaton::poset_to_json(m, poset));
      run.outputs() = poset_summary(m, poset);
      run.outputs()["size"] = poset.elements.size();
      run.finish(common.report, common.to_stdout, out);
    };
  });

  std::string comp_w1, comp_w2;
  auto* acomp = aut->add_subcommand("complementary", "Are two experiments complementary?");
  add_source(acomp);
  acomp->add_option("--w1", comp_w1)->required();
  acomp->add_option("--w2", comp_w2)->required();
  acomp->callback([&] {
    action = [&] {
      Run run("automaton complementary");
      const auto m = load_automaton();
      run.inputs() = source_json();
      run.inputs()["w1"] = comp_w1;
      run.inputs()["w2"] = comp_w2;
      const auto w1 = automaton::parse_word(m, comp_w1);
      const auto w2 = automaton::parse_word(m, comp_w2);
      run.outputs()["complementary"] = automaton::is_complementary(m, w1, w2);
      run.outputs()["partition_w1"] = partition_json(m, automaton::experiment_partition(m, w1));
      run.outputs()["partition_w2"] = partition_json(m, automaton::experiment_partition(m, w2));
      run.finish(common.report, common.to_stdout, out);
    };
  });

  // ---------------------------------------------------------------- rota
  auto* rota_cmd = app.add_subcommand("rota", "Template matrices, closure, propagation and spatialization");
  rota_cmd->require_subcommand(1);

  std::string rt_dag, rt_out;
  auto* rtemplate = rota_cmd->add_subcommand("template", "Template mask of a DAG and its algebra closure");
  rtemplate->add_option("--dag", rt_dag, "DAG JSON {m, edges}")->required();
  rtemplate->add_option("--out", rt_out, "Mask JSON");
  add_common(rtemplate, common);
  rtemplate->callback([&] {
    action = [&] {
      Run run("rota template");
      run.inputs() = {{"dag", rt_dag}};
      const auto t = rota::template_matrix(rota::dag_from_json(read_file(rt_dag)));
      const auto closure = rota::algebra_closure(t);
      run.stage(rt_out, rota::mask_to_json(t));
      run.outputs() = {{"mask", t.rows()}, {"closed", rota::is_closed_algebra(t)}, {"closure", closure.rows()}};
      run.finish(common.report, common.to_stdout, out);
    };
  });

  std::string rp_dag, rp_weights, rp_signal;
  std::size_t rp_layers = 1;
  auto* rprop = rota_cmd->add_subcommand("propagate", "Linear signal propagation through a DAG");
  rprop->add_option("--dag", rp_dag, "DAG JSON {m, edges}")->required();
  rprop->add_option("--weights", rp_weights, "Weights JSON (row-major nested list)")->required();
  rprop->add_option("--signal", rp_signal, "Comma-separated input vector")->required();
  rprop->add_option("--layers", rp_layers)->capture_default_str();
  add_common(rprop, common);
  rprop->callback([&] {
    action = [&] {
      Run run("rota propagate");
      run.inputs() = {{"dag", rp_dag}, {"weights", rp_weights}, {"signal", rp_signal}, {"layers", rp_layers}};
      const auto t = rota::template_matrix(rota::dag_from_json(read_file(rp_dag)));
      const auto w = rota::subspace_from_json("[" + read_file(rp_weights) + "]");
      const auto y = rota::propagate(t, w.front(), to_vector(parse_numbers(rp_signal)), rp_layers);
      run.outputs()["output"] = to_std(y);
      run.finish(common.report, common.to_stdout, out);
    };
  });

  std::string rs_subspace, rs_out;
  auto* rspat = rota_cmd->add_subcommand("spatialize", "Finite topology (and DAG) from a matrix subspace");
  rspat->add_option("--subspace", rs_subspace, "JSON list of matrices")->required();
  rspat->add_option("--out", rs_out, "Spatialization JSON");
  add_common(rspat, common);
  rspat->callback([&] {
    action = [&] {
      Run run("rota spatialize");
      run.inputs() = {{"subspace", rs_subspace}};
      const auto s = rota::spatialize(rota::subspace_from_json(read_file(rs_subspace)));
      const auto text = rota::spatialization_to_json(s);
      run.stage(rs_out, text);
      run.outputs() = json::parse(text);
      run.finish(common.report, common.to_stdout, out);
    };
  });

  // ---------------------------------------------------------------- pipeline
  std::string pipe_config, pipe_preset, pipe_embedding, pipe_metric, pipe_predictions;
  std::optional<std::uint64_t> pipe_seed;
  auto* pipe = app.add_subcommand("pipeline", "Click log -> skeleton -> embedding -> metric -> predictions");
  pipe->add_option("config", pipe_config, "Pipeline config JSON");
  pipe->add_option("--preset", pipe_preset, "planted (used when no config is given)");
  pipe->add_option("--seed", pipe_seed, "Override the config seed");
  pipe->add_option("--embedding-out", pipe_embedding, "Coordinates CSV (sidecar at <path>.json)");
  pipe->add_option("--metric-out", pipe_metric, "Metric field JSON");
  pipe->add_option("--predictions-out", pipe_predictions, "Prediction CSV");
  add_common(pipe, common);
  pipe->callback([&] {
    action = [&] {
      Run run("pipeline");
      pipeline::PipelineConfig cfg;
      if (!pipe_config.empty()) {
        const auto base = std::filesystem::path(pipe_config).parent_path().string();
        cfg = pipeline::config_from_json(read_file(pipe_config), base);
        run.inputs()["config"] = pipe_config;
      } else if (pipe_preset == "planted") {
        cfg = pipeline::planted_preset();
        run.inputs()["preset"] = pipe_preset;
      } else {
        throw UsageError("give a config file or --preset planted");
      }
      if (pipe_seed) {
        cfg.seed = *pipe_seed;
        cfg.embed.seed = *pipe_seed;
      }
      run.inputs()["resolved"] = json::parse(pipeline::config_to_json(cfg));
      const auto r = pipeline::run_pipeline(cfg);
      auto& o = run.outputs();
      o["streams"] = r.collection.size();
      o["clicks"] = r.collection.click_count();
      o["skeleton"] = skeleton_summary(r.skeleton);
      o["final_stress"] = r.embedding.final_stress;
      o["predictions"] = r.predictions.size();
      o["mean_prediction_error"] = r.mean_error;
      o["mean_step"] = r.mean_step;
      o["error_to_step"] = r.mean_error / r.mean_step;
      o["metric_epsilon"] = r.metric->epsilon();
      if (r.procrustes_rms) {
        o["procrustes_rms"] = *r.procrustes_rms;
        o["latent_diameter"] = *r.latent_diameter;
        o["rms_to_diameter"] = *r.procrustes_rms / *r.latent_diameter;
      }
      run.checks() = {{"stress_nonincreasing", history_nonincreasing(r.embedding.stress_history)},
                      {"time_coordinates_exact", time_exact(r.embedding)},
                      {"node_tensors_above_floor",
                       min_node_eigenvalue(*r.metric) >= r.metric->epsilon() * (1.0 - 1e-9)}};
      if (!pipe_embedding.empty()) {
        run.stage(pipe_embedding, embedding::embedding_to_csv(r.embedding));
        run.stage(pipe_embedding + ".json", embedding::embedding_sidecar_json(r.embedding));
      }
      run.stage(pipe_metric, geodesic::field_to_json(*r.metric));
      run.stage(pipe_predictions, pipeline::predictions_to_csv(r));
      run.finish(common.report, common.to_stdout, out);
    };
  });

  if (args.empty()) {
    err << app.help();
    return 2;
  }
  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    err << "run with --help for usage\n";
    return 2;
  }
  if (!action) {
    err << app.help();
    return 2;
  }
  try {
    action();
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace rforge::cli
