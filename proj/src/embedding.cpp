#include "rforge/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <queue>
#include <sstream>

#include <json.hpp>

#include "rforge/error.hpp"
#include "rforge/parallel.hpp"
#include "rforge/random.hpp"

namespace rforge::embedding {

void EmbedParams::validate() const {
  if (n < 1) throw ConfigError("n must be a positive integer");
  if (max_iters < 1) throw ConfigError("max_iters must be positive");
  if (!(tol > 0.0)) throw ConfigError("tol must be positive");
  if (!(time_scale > 0.0)) throw ConfigError("time_scale must be positive");
  if (!(temporal_stiffness >= 0.0)) throw ConfigError("temporal_stiffness must be nonnegative");
  if (restarts < 1) throw ConfigError("restarts must be positive");
}

std::size_t Coordinates::index_of(const PointRef& p) const {
  auto it = std::lower_bound(points.begin(), points.end(), p);
  if (it == points.end() || *it != p)
    throw MissingCoordError("no coordinates for point (" + std::to_string(p.stream_index) + ", " +
                            std::to_string(p.seq) + ")");
  return static_cast<std::size_t>(it - points.begin());
}

namespace {

struct Pair {
  Eigen::Index i;
  Eigen::Index j;
  double target;
};

// Sum over pairs of (|x_i - x_j| - d)^2 / norm + lambda * sum over threads of
// |x_i - x_j|^2, on spatial coordinates only. Summation order is fixed.
class StressObjective {
public:
  StressObjective(std::vector<Pair> pairs, std::vector<Pair> threads, double lambda)
      : pairs_(std::move(pairs)), threads_(std::move(threads)), lambda_(lambda) {
    double s = 0.0;
    for (const auto& p : pairs_) s += p.target * p.target;
    norm_ = s > 0.0 ? s : 1.0;
  }

  double value(const Eigen::MatrixXd& x) const {
    const Eigen::Index dim = x.cols();
    double edge = 0.0;
    for (const auto& p : pairs_) {
      double r2 = 0.0;
      for (Eigen::Index a = 0; a < dim; ++a) {
        const double d = x(p.i, a) - x(p.j, a);
        r2 += d * d;
      }
      const double res = std::sqrt(r2) - p.target;
      edge += res * res;
    }
    double cont = 0.0;
    if (lambda_ > 0.0) {
      for (const auto& t : threads_)
        for (Eigen::Index a = 0; a < dim; ++a) {
          const double d = x(t.i, a) - x(t.j, a);
          cont += d * d;
        }
    }
    return edge / norm_ + lambda_ * cont;
  }

  Eigen::MatrixXd gradient(const Eigen::MatrixXd& x) const {
    const Eigen::Index dim = x.cols();
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(x.rows(), dim);
    for (const auto& p : pairs_) {
      double r2 = 0.0;
      for (Eigen::Index a = 0; a < dim; ++a) {
        const double d = x(p.i, a) - x(p.j, a);
        r2 += d * d;
      }
      const double r = std::sqrt(r2);
      if (r <= 0.0) continue;  // zero subgradient at coincident points
      const double scale = 2.0 * (r - p.target) / (r * norm_);
      for (Eigen::Index a = 0; a < dim; ++a) {
        const double c = scale * (x(p.i, a) - x(p.j, a));
        g(p.i, a) += c;
        g(p.j, a) -= c;
      }
    }
    if (lambda_ > 0.0) {
      for (const auto& t : threads_)
        for (Eigen::Index a = 0; a < dim; ++a) {
          const double c = 2.0 * lambda_ * (x(t.i, a) - x(t.j, a));
          g(t.i, a) += c;
          g(t.j, a) -= c;
        }
    }
    return g;
  }

private:
  std::vector<Pair> pairs_;
  std::vector<Pair> threads_;
  double lambda_;
  double norm_ = 1.0;
};

// Gradient descent with backtracking: the step is halved until the objective
// decreases by the Armijo margin, and the iterate is left unchanged when no
// such step exists.
// Returns the objective after each accepted step, starting with the initial value.
std::vector<double> descend(const StressObjective& f, Eigen::MatrixXd& x, std::size_t max_iters, double tol,
                            double step) {
  std::vector<double> history;
  double fx = f.value(x);
  history.push_back(fx);
  for (std::size_t it = 0; it < max_iters && fx > 0.0; ++it) {
    const Eigen::MatrixXd g = f.gradient(x);
    const double g2 = g.squaredNorm();
    if (g2 == 0.0) break;
    bool accepted = false;
    Eigen::MatrixXd trial;
    double ft = fx;
    while (step > 1e-30) {
      trial = x - step * g;
      ft = f.value(trial);
      if (ft < fx && ft <= fx - 1e-4 * step * g2) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    const double rel = (fx - ft) / fx;
    x = std::move(trial);
    fx = ft;
    history.push_back(fx);
    step *= 2.0;
    if (rel < tol) break;
  }
  return history;
}

// Dijkstra from every point over the skeleton edges.
std::vector<Pair> shortest_path_pairs(std::size_t count, const std::vector<Pair>& edges) {
  std::vector<std::vector<std::pair<Eigen::Index, double>>> adj(count);
  for (const auto& e : edges) {
    adj[static_cast<std::size_t>(e.i)].emplace_back(e.j, e.target);
    adj[static_cast<std::size_t>(e.j)].emplace_back(e.i, e.target);
  }
  std::vector<Pair> out;
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(count);
  using Item = std::pair<double, Eigen::Index>;
  for (std::size_t src = 0; src < count; ++src) {
    std::fill(dist.begin(), dist.end(), inf);
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    dist[src] = 0.0;
    pq.emplace(0.0, static_cast<Eigen::Index>(src));
    while (!pq.empty()) {
      auto [d, u] = pq.top();
      pq.pop();
      if (d > dist[static_cast<std::size_t>(u)]) continue;
      for (const auto& [v, w] : adj[static_cast<std::size_t>(u)]) {
        const double nd = d + w;
        if (nd < dist[static_cast<std::size_t>(v)]) {
          dist[static_cast<std::size_t>(v)] = nd;
          pq.emplace(nd, v);
        }
      }
    }
    for (std::size_t dst = src + 1; dst < count; ++dst)
      if (std::isfinite(dist[dst]))
        out.push_back({static_cast<Eigen::Index>(src), static_cast<Eigen::Index>(dst), dist[dst]});
  }
  return out;
}

std::vector<PointRef> sorted_points(const LayeredSkeleton& skeleton) {
  std::vector<PointRef> pts;
  for (const auto& l : skeleton.layers) pts.insert(pts.end(), l.points.begin(), l.points.end());
  std::sort(pts.begin(), pts.end());
  return pts;
}

void collect_pairs(const LayeredSkeleton& skeleton, const Coordinates& coords, std::vector<Pair>& edges,
                   std::vector<Pair>& threads) {
  for (const auto& e : skeleton.edges) {
    const Pair p{static_cast<Eigen::Index>(coords.index_of(e.a)), static_cast<Eigen::Index>(coords.index_of(e.b)),
                 e.length};
    edges.push_back(p);
    if (e.kind == prespace::EdgeKind::thread) threads.push_back(p);
  }
}

}  // namespace

double stress(const LayeredSkeleton& skeleton, const Coordinates& coords, double temporal_stiffness) {
  for (const auto& l : skeleton.layers)
    for (const auto& p : l.points) coords.index_of(p);
  std::vector<Pair> edges, threads;
  collect_pairs(skeleton, coords, edges, threads);
  const Eigen::MatrixXd spatial = coords.values.rightCols(coords.values.cols() - 1);
  return StressObjective(std::move(edges), std::move(threads), temporal_stiffness).value(spatial);
}

SpacetimeEmbedding embed(const LayeredSkeleton& skeleton, const EmbedParams& params) {
  params.validate();
  if (skeleton.point_count() == 0) throw EmptySkeletonError("skeleton has no points");

  SpacetimeEmbedding out;
  out.params = params;
  out.coords.points = sorted_points(skeleton);
  const auto count = static_cast<Eigen::Index>(out.coords.points.size());
  const auto n = static_cast<Eigen::Index>(params.n);

  std::vector<Pair> edges, threads;
  out.coords.values = Eigen::MatrixXd::Zero(count, n + 1);
  collect_pairs(skeleton, out.coords, edges, threads);

  const bool warm = params.warm_start_iters > 0 && static_cast<std::size_t>(count) <= params.warm_start_max_points &&
                    !edges.empty();
  const StressObjective global(warm ? shortest_path_pairs(static_cast<std::size_t>(count), edges) : std::vector<Pair>{},
                               {}, 0.0);
  const StressObjective local(edges, threads, params.temporal_stiffness);

  // Initial spread and first step follow the RMS edge length, so rescaling all
  // lengths rescales the whole descent path.
  double scale = 0.0;
  for (const auto& e : edges) scale += e.target * e.target;
  scale = edges.empty() || scale <= 0.0 ? 1.0 : std::sqrt(scale / static_cast<double>(edges.size()));

  struct Start {
    Eigen::MatrixXd x;
    std::vector<double> history;
  };
  std::vector<Start> starts(params.restarts);
  parallel_for(params.restarts, [&](std::size_t r) {
    Rng rng(r == 0 ? params.seed : Rng::mix(params.seed) + r);
    Eigen::MatrixXd x(count, n);
    for (Eigen::Index i = 0; i < count; ++i)
      for (Eigen::Index a = 0; a < n; ++a) x(i, a) = scale * rng.uniform(-0.5, 0.5);
    if (warm) descend(global, x, params.warm_start_iters, 1e-6, scale * scale);
    starts[r].history = descend(local, x, params.max_iters, params.tol, scale * scale);
    starts[r].x = std::move(x);
  });
  std::size_t best = 0;
  for (std::size_t r = 1; r < starts.size(); ++r)
    if (starts[r].history.back() < starts[best].history.back()) best = r;
  Eigen::MatrixXd x = std::move(starts[best].x);
  out.stress_history = std::move(starts[best].history);

  // Stress is translation invariant; centering pins the free translation.
  const Eigen::RowVectorXd centroid = x.colwise().mean();
  x.rowwise() -= centroid;

  for (Eigen::Index i = 0; i < count; ++i)
    out.coords.values(i, 0) = static_cast<double>(out.coords.points[static_cast<std::size_t>(i)].seq) * params.time_scale;
  out.coords.values.rightCols(n) = x;
  out.final_stress = stress(skeleton, out.coords, params.temporal_stiffness);
  return out;
}

ProcrustesResult procrustes_align(const Eigen::MatrixXd& reference, const Eigen::MatrixXd& coords) {
  if (reference.rows() != coords.rows() || reference.cols() != coords.cols())
    throw DimensionMismatch("procrustes: reference is " + std::to_string(reference.rows()) + "x" +
                            std::to_string(reference.cols()) + ", coords are " + std::to_string(coords.rows()) + "x" +
                            std::to_string(coords.cols()));
  ProcrustesResult out;
  if (coords.rows() == 0) {
    out.aligned = coords;
    return out;
  }
  const Eigen::RowVectorXd mu_ref = reference.colwise().mean();
  const Eigen::RowVectorXd mu_x = coords.colwise().mean();
  const Eigen::MatrixXd a = reference.rowwise() - mu_ref;
  const Eigen::MatrixXd b = coords.rowwise() - mu_x;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(b.transpose() * a, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::MatrixXd rot = svd.matrixU() * svd.matrixV().transpose();
  out.aligned = (b * rot).rowwise() + mu_ref;
  out.residual = (out.aligned - reference).squaredNorm();
  return out;
}

ProcrustesResult procrustes_align(const Coordinates& reference, const Coordinates& coords) {
  if (reference.points != coords.points)
    throw DimensionMismatch("procrustes: point sets differ");
  if (reference.values.cols() != coords.values.cols())
    throw DimensionMismatch("procrustes: dimensions differ");
  const auto spatial = coords.values.cols() - 1;
  auto res = procrustes_align(reference.values.rightCols(spatial), coords.values.rightCols(spatial));
  Eigen::MatrixXd full(coords.values.rows(), coords.values.cols());
  full.col(0) = coords.values.col(0);
  full.rightCols(spatial) = res.aligned;
  res.aligned = std::move(full);
  return res;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string embedding_to_csv(const SpacetimeEmbedding& e) {
  const auto n = e.coords.values.cols() - 1;
  std::string out = "stream,seq,t";
  for (Eigen::Index a = 1; a <= n; ++a) out += ",x" + std::to_string(a);
  out += '\n';
  for (std::size_t i = 0; i < e.coords.points.size(); ++i) {
    const auto& p = e.coords.points[i];
    out += std::to_string(p.stream_index) + "," + std::to_string(p.seq);
    for (Eigen::Index a = 0; a <= n; ++a) out += "," + fmt17(e.coords.values(static_cast<Eigen::Index>(i), a));
    out += '\n';
  }
  return out;
}

std::string embedding_sidecar_json(const SpacetimeEmbedding& e) {
  nlohmann::ordered_json j;
  j["params"] = {{"n", e.params.n},
                 {"max_iters", e.params.max_iters},
                 {"tol", e.params.tol},
                 {"time_scale", e.params.time_scale},
                 {"temporal_stiffness", e.params.temporal_stiffness},
                 {"seed", e.params.seed},
                 {"warm_start_iters", e.params.warm_start_iters},
                 {"warm_start_max_points", e.params.warm_start_max_points},
                 {"restarts", e.params.restarts}};
  j["final_stress"] = e.final_stress;
  j["points"] = e.coords.points.size();
  j["iterations"] = e.stress_history.empty() ? 0 : e.stress_history.size() - 1;
  j["initial_stress"] = e.stress_history.empty() ? e.final_stress : e.stress_history.front();
  return j.dump(2) + "\n";
}

SpacetimeEmbedding embedding_from_csv(std::string_view csv, std::string_view sidecar_json) {
  SpacetimeEmbedding e;
  try {
    const auto j = nlohmann::json::parse(sidecar_json);
    const auto& p = j.at("params");
    e.params.n = p.at("n").get<std::size_t>();
    e.params.max_iters = p.at("max_iters").get<std::size_t>();
    e.params.tol = p.at("tol").get<double>();
    e.params.time_scale = p.at("time_scale").get<double>();
    e.params.temporal_stiffness = p.at("temporal_stiffness").get<double>();
    e.params.seed = p.at("seed").get<std::uint64_t>();
    e.params.warm_start_iters = p.value("warm_start_iters", e.params.warm_start_iters);
    e.params.warm_start_max_points = p.value("warm_start_max_points", e.params.warm_start_max_points);
    e.params.restarts = p.value("restarts", e.params.restarts);
    e.final_stress = j.at("final_stress").get<double>();
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError(std::string("malformed embedding sidecar: ") + ex.what());
  }

  std::istringstream in{std::string(csv)};
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("embedding CSV is empty");
  const std::size_t cols = static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1;
  if (cols != e.params.n + 3) throw DimensionMismatch("embedding CSV columns do not match n in sidecar");
  std::vector<std::pair<PointRef, std::vector<double>>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (cells.size() != cols) throw ConfigError("embedding CSV row has wrong column count");
    try {
      PointRef p{std::stoull(cells[0]), std::stoull(cells[1])};
      std::vector<double> v;
      for (std::size_t k = 2; k < cells.size(); ++k) v.push_back(std::stod(cells[k]));
      rows.emplace_back(p, std::move(v));
    } catch (const std::exception&) {
      throw ConfigError("embedding CSV row is not numeric: " + line);
    }
  }
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  e.coords.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(e.params.n + 1));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    e.coords.points.push_back(rows[i].first);
    for (std::size_t a = 0; a <= e.params.n; ++a)
      e.coords.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(a)) = rows[i].second[a];
  }
  return e;
}

}  // namespace rforge::embedding
