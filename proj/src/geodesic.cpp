#include "rforge/geodesic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <json.hpp>

#include "rforge/error.hpp"
#include "rforge/parallel.hpp"

namespace rforge::geodesic {

void GridSpec::validate() const {
  if (cells < 1) throw InvalidGrid("cells per axis must be >= 1");
  if (!(floor_factor > 0.0)) throw InvalidGrid("floor_factor must be positive");
}

MetricField::MetricField(Eigen::VectorXd origin, Eigen::VectorXd spacing, std::vector<std::size_t> node_counts,
                         std::vector<Eigen::MatrixXd> tensors, double epsilon)
    : origin_(std::move(origin)),
      spacing_(std::move(spacing)),
      counts_(std::move(node_counts)),
      tensors_(std::move(tensors)),
      epsilon_(epsilon) {
  const auto m = origin_.size();
  if (m == 0 || spacing_.size() != m || static_cast<Eigen::Index>(counts_.size()) != m)
    throw InvalidGrid("origin, spacing and node counts must share one dimension");
  std::size_t total = 1;
  for (Eigen::Index a = 0; a < m; ++a) {
    if (counts_[static_cast<std::size_t>(a)] < 2) throw InvalidGrid("every axis needs at least two nodes");
    if (!(spacing_(a) > 0.0) || !std::isfinite(spacing_(a))) throw InvalidGrid("grid spacing must be positive");
    if (!std::isfinite(origin_(a))) throw InvalidGrid("grid origin must be finite");
    total *= counts_[static_cast<std::size_t>(a)];
  }
  if (tensors_.size() != total) throw InvalidGrid("tensor count does not match the grid");
  if (!(epsilon_ > 0.0)) throw InvalidGrid("epsilon must be positive");
  for (const auto& t : tensors_)
    if (t.rows() != m || t.cols() != m) throw InvalidGrid("tensor shape does not match the grid dimension");
}

MetricField MetricField::from_function(const Eigen::VectorXd& origin, const Eigen::VectorXd& spacing,
                                       const std::vector<std::size_t>& node_counts, const TensorFn& fn,
                                       double epsilon) {
  std::size_t total = 1;
  for (auto c : node_counts) total *= c;
  std::vector<Eigen::MatrixXd> tensors(total, Eigen::MatrixXd::Identity(origin.size(), origin.size()));
  MetricField f(origin, spacing, node_counts, tensors, epsilon);
  for (std::size_t i = 0; i < total; ++i) f.tensors_[i] = floor_spd(fn(f.node_position(i)), epsilon);
  return f;
}

std::size_t MetricField::flat_index(const std::vector<std::size_t>& node) const {
  std::size_t flat = 0;
  for (std::size_t a = 0; a < counts_.size(); ++a) flat = flat * counts_[a] + node.at(a);
  return flat;
}

std::vector<std::size_t> MetricField::unflatten(std::size_t flat) const {
  std::vector<std::size_t> node(counts_.size());
  for (std::size_t a = counts_.size(); a-- > 0;) {
    node[a] = flat % counts_[a];
    flat /= counts_[a];
  }
  return node;
}

Eigen::VectorXd MetricField::node_position(const std::vector<std::size_t>& node) const {
  Eigen::VectorXd x(origin_.size());
  for (Eigen::Index a = 0; a < x.size(); ++a)
    x(a) = origin_(a) + static_cast<double>(node[static_cast<std::size_t>(a)]) * spacing_(a);
  return x;
}

Eigen::VectorXd MetricField::node_position(std::size_t flat) const { return node_position(unflatten(flat)); }

Eigen::VectorXd MetricField::upper() const {
  Eigen::VectorXd x(origin_.size());
  for (Eigen::Index a = 0; a < x.size(); ++a)
    x(a) = origin_(a) + static_cast<double>(counts_[static_cast<std::size_t>(a)] - 1) * spacing_(a);
  return x;
}

namespace {

constexpr double kSnap = 1e-9;    // grid-coordinate snapping to nodes
constexpr double kHullTol = 1e-12;  // relative slack on the hull boundary

}  // namespace

bool MetricField::contains(const Eigen::VectorXd& x) const {
  if (x.size() != origin_.size()) return false;
  for (Eigen::Index a = 0; a < x.size(); ++a) {
    if (!std::isfinite(x(a))) return false;
    const double u = (x(a) - origin_(a)) / spacing_(a);
    const double top = static_cast<double>(counts_[static_cast<std::size_t>(a)] - 1);
    if (u < -kHullTol || u > top + kHullTol) return false;
  }
  return true;
}

Eigen::MatrixXd floor_spd(const Eigen::MatrixXd& g, double epsilon) {
  Eigen::MatrixXd sym = 0.5 * (g + g.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
  if (eig.info() != Eigen::Success) throw SingularMetric("eigen decomposition failed");
  if (eig.eigenvalues().minCoeff() >= epsilon * (1.0 - 1e-9)) return sym;
  // A hair above epsilon so rounding in the reconstruction stays on the floor.
  const Eigen::VectorXd clamped = eig.eigenvalues().cwiseMax(epsilon * (1.0 + 1e-10));
  Eigen::MatrixXd out = eig.eigenvectors() * clamped.asDiagonal() * eig.eigenvectors().transpose();
  return 0.5 * (out + out.transpose());
}

Eigen::MatrixXd metric_at(const MetricField& f, const Eigen::VectorXd& x) {
  const auto m = static_cast<std::size_t>(f.dimension());
  if (static_cast<std::size_t>(x.size()) != m) throw DimensionMismatch("query point dimension differs from the field");
  if (!f.contains(x)) throw OutOfHull("point lies outside the metric grid");

  std::vector<std::size_t> base(m);
  std::vector<double> frac(m);
  for (std::size_t a = 0; a < m; ++a) {
    const auto ai = static_cast<Eigen::Index>(a);
    double u = (x(ai) - f.origin()(ai)) / f.spacing()(ai);
    const double top = static_cast<double>(f.node_counts()[a] - 1);
    u = std::clamp(u, 0.0, top);
    const double r = std::round(u);
    if (std::abs(u - r) < kSnap) u = r;
    auto i = static_cast<std::size_t>(std::floor(u));
    if (i + 1 >= f.node_counts()[a]) i = f.node_counts()[a] - 2;
    base[a] = i;
    frac[a] = u - static_cast<double>(i);
  }

  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
  std::vector<std::size_t> node(m);
  for (std::size_t corner = 0; corner < (std::size_t{1} << m); ++corner) {
    double w = 1.0;
    for (std::size_t a = 0; a < m; ++a) {
      const bool hi = (corner >> a) & 1U;
      w *= hi ? frac[a] : 1.0 - frac[a];
      node[a] = base[a] + (hi ? 1 : 0);
    }
    if (w == 0.0) continue;
    g += w * f.tensor(f.flat_index(node));
  }
  return floor_spd(g, f.epsilon());
}

MetricField fit_metric_field(const embedding::SpacetimeEmbedding& e, const prespace::LayeredSkeleton& s,
                             const GridSpec& spec) {
  spec.validate();
  const auto& coords = e.coords;
  if (coords.points.empty()) throw InvalidGrid("embedding has no points");
  const Eigen::Index m = coords.values.cols();
  for (const auto& l : s.layers)
    for (const auto& p : l.points) coords.index_of(p);

  // Grid over the bounding box, one spacing per axis.
  Eigen::VectorXd lo = coords.values.colwise().minCoeff().transpose();
  Eigen::VectorXd hi = coords.values.colwise().maxCoeff().transpose();
  if (!lo.allFinite() || !hi.allFinite()) throw InvalidGrid("embedding has non-finite coordinates");
  const double cells = static_cast<double>(spec.cells);
  Eigen::VectorXd spacing(m);
  double spacing_sum = 0.0;
  int spacing_n = 0;
  for (Eigen::Index a = 0; a < m; ++a) {
    spacing(a) = (hi(a) - lo(a)) / cells;
    if (spacing(a) > 0.0) {
      spacing_sum += spacing(a);
      ++spacing_n;
    }
  }
  // Flat axes borrow the mean spacing of the others.
  const double fallback = spacing_n > 0 ? spacing_sum / spacing_n : 1.0;
  for (Eigen::Index a = 0; a < m; ++a)
    if (!(spacing(a) > 0.0)) spacing(a) = fallback;
  const auto margin = static_cast<double>(spec.margin);
  const Eigen::VectorXd origin = lo - margin * spacing;
  std::vector<std::size_t> counts(static_cast<std::size_t>(m));
  for (Eigen::Index a = 0; a < m; ++a) {
    const double extent = (hi(a) - lo(a)) / spacing(a);
    counts[static_cast<std::size_t>(a)] =
        static_cast<std::size_t>(std::ceil(extent - 1e-9)) + 1 + 2 * spec.margin;
    counts[static_cast<std::size_t>(a)] = std::max<std::size_t>(counts[static_cast<std::size_t>(a)], 2);
  }

  // Per-edge design rows: upper-triangle features of dx dx^T.
  const Eigen::Index p = m * (m + 1) / 2;
  struct Row {
    Eigen::VectorXd mid;
    Eigen::VectorXd phi;
    double target;
  };
  std::vector<Row> rows;
  rows.reserve(s.edges.size());
  for (const auto& edge : s.edges) {
    const Eigen::VectorXd xa = coords.at(edge.a);
    const Eigen::VectorXd xb = coords.at(edge.b);
    const Eigen::VectorXd dx = xb - xa;
    Row r{0.5 * (xa + xb), Eigen::VectorXd(p), edge.length * edge.length};
    Eigen::Index k = 0;
    for (Eigen::Index a = 0; a < m; ++a)
      for (Eigen::Index b = a; b < m; ++b) r.phi(k++) = (a == b ? 1.0 : 2.0) * dx(a) * dx(b);
    rows.push_back(std::move(r));
  }

  std::size_t total = 1;
  for (auto c : counts) total *= c;
  std::vector<Eigen::MatrixXd> raw(total);
  std::vector<char> fitted(total, 0);
  // Grid built first so node positions come from the same arithmetic as queries.
  MetricField shape(origin, spacing, counts,
                    std::vector<Eigen::MatrixXd>(total, Eigen::MatrixXd::Identity(m, m)), 1.0);
  constexpr double kCutoff = 18.0;  // half squared normalized distance; weight < 1.6e-8 beyond
  constexpr double kMinWeight = 1e-12;
  parallel_for(total, [&](std::size_t node) {
    const Eigen::VectorXd pos = shape.node_position(node);
    Eigen::MatrixXd normal = Eigen::MatrixXd::Zero(p, p);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(p);
    double weight = 0.0;
    for (const auto& r : rows) {
      const double q = 0.5 * ((r.mid - pos).cwiseQuotient(spacing)).squaredNorm();
      if (q > kCutoff) continue;
      const double w = std::exp(-q);
      normal.noalias() += w * r.phi * r.phi.transpose();
      rhs.noalias() += (w * r.target) * r.phi;
      weight += w;
    }
    if (weight < kMinWeight) {
      raw[node] = Eigen::MatrixXd::Identity(m, m);
      return;
    }
    const Eigen::VectorXd sol = normal.completeOrthogonalDecomposition().solve(rhs);
    Eigen::MatrixXd g(m, m);
    Eigen::Index k = 0;
    for (Eigen::Index a = 0; a < m; ++a)
      for (Eigen::Index b = a; b < m; ++b) {
        g(a, b) = sol(k);
        g(b, a) = sol(k);
        ++k;
      }
    raw[node] = g;
    fitted[node] = 1;
  });

  std::vector<double> diag;
  for (std::size_t node = 0; node < total; ++node)
    if (fitted[node])
      for (Eigen::Index a = 0; a < m; ++a) diag.push_back(raw[node](a, a));
  double scale = 1.0;
  if (!diag.empty()) {
    auto mid = diag.begin() + static_cast<std::ptrdiff_t>(diag.size() / 2);
    std::nth_element(diag.begin(), mid, diag.end());
    if (*mid > 0.0 && std::isfinite(*mid)) scale = *mid;
  }
  const double epsilon = spec.floor_factor * scale;
  for (auto& g : raw) g = floor_spd(g, epsilon);
  return MetricField(origin, spacing, counts, std::move(raw), epsilon);
}

Christoffel christoffel(const MetricField& f, const Eigen::VectorXd& x) {
  const auto m = f.dimension();
  const auto mi = static_cast<Eigen::Index>(m);
  const Eigen::MatrixXd g = metric_at(f, x);
  std::vector<Eigen::MatrixXd> dg(m);
  for (std::size_t l = 0; l < m; ++l) {
    const auto li = static_cast<Eigen::Index>(l);
    const double h = 0.5 * f.spacing()(li);
    Eigen::VectorXd xp = x, xm = x;
    xp(li) += h;
    xm(li) -= h;
    if (!f.contains(xp) || !f.contains(xm)) throw OutOfHull("finite-difference stencil leaves the metric grid");
    dg[l] = (metric_at(f, xp) - metric_at(f, xm)) / (2.0 * h);
  }
  Eigen::LLT<Eigen::MatrixXd> llt(g);
  if (llt.info() != Eigen::Success) throw SingularMetric("metric is not positive definite at query point");
  const Eigen::MatrixXd ginv = llt.solve(Eigen::MatrixXd::Identity(mi, mi));

  Christoffel out{m, std::vector<double>(m * m * m, 0.0)};
  for (std::size_t k = 0; k < m; ++k)
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = i; j < m; ++j) {
        double sum = 0.0;
        for (std::size_t l = 0; l < m; ++l) {
          const auto [ii, jj, ll, kk] = std::tuple{static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j),
                                                   static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(k)};
          sum += ginv(kk, ll) * (dg[i](jj, ll) + dg[j](ii, ll) - dg[l](ii, jj));
        }
        out(k, i, j) = 0.5 * sum;
        out(k, j, i) = 0.5 * sum;
      }
  return out;
}

namespace {

Eigen::VectorXd acceleration(const MetricField& f, const Eigen::VectorXd& x, const Eigen::VectorXd& v) {
  const Christoffel gamma = christoffel(f, x);
  const auto m = gamma.dim;
  Eigen::VectorXd a = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m));
  for (std::size_t k = 0; k < m; ++k) {
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j)
        s += gamma(k, i, j) * v(static_cast<Eigen::Index>(i)) * v(static_cast<Eigen::Index>(j));
    a(static_cast<Eigen::Index>(k)) = -s;
  }
  return a;
}

}  // namespace

GeodesicPath integrate_geodesic(const MetricField& f, const Eigen::VectorXd& x0, const Eigen::VectorXd& v0,
                                std::size_t steps, double dt) {
  if (static_cast<std::size_t>(x0.size()) != f.dimension() || v0.size() != x0.size())
    throw DimensionMismatch("initial conditions do not match the field dimension");
  if (!f.contains(x0)) throw OutOfHull("initial position lies outside the metric grid");
  if (!v0.allFinite()) throw ConfigError("initial velocity must be finite");
  if (!std::isfinite(dt)) throw ConfigError("dt must be finite");

  GeodesicPath path;
  path.dt = dt;
  path.samples.push_back({x0, v0});
  Eigen::VectorXd x = x0, v = v0;
  for (std::size_t step = 0; step < steps; ++step) {
    try {
      const Eigen::VectorXd k1x = v;
      const Eigen::VectorXd k1v = acceleration(f, x, v);
      const Eigen::VectorXd k2x = v + 0.5 * dt * k1v;
      const Eigen::VectorXd k2v = acceleration(f, x + 0.5 * dt * k1x, k2x);
      const Eigen::VectorXd k3x = v + 0.5 * dt * k2v;
      const Eigen::VectorXd k3v = acceleration(f, x + 0.5 * dt * k2x, k3x);
      const Eigen::VectorXd k4x = v + dt * k3v;
      const Eigen::VectorXd k4v = acceleration(f, x + dt * k3x, k4x);
      const Eigen::VectorXd nx = x + (dt / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
      const Eigen::VectorXd nv = v + (dt / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
      if (!f.contains(nx)) throw OutOfHull("step leaves the grid");
      x = nx;
      v = nv;
    } catch (const OutOfHull&) {
      path.truncated = true;
      break;
    }
    path.samples.push_back({x, v});
  }
  return path;
}

Eigen::VectorXd predict_next(const MetricField& f, const std::vector<Eigen::VectorXd>& prefix, double horizon,
                             std::size_t substeps) {
  if (prefix.size() < 2) throw ShortPrefix("prediction needs at least two prefix points");
  for (const auto& p : prefix)
    if (!f.contains(p)) throw OutOfHull("prefix point lies outside the metric grid");
  if (substeps < 1) substeps = 1;
  const Eigen::VectorXd& last = prefix.back();
  const Eigen::VectorXd velocity = last - prefix[prefix.size() - 2];
  const auto path = integrate_geodesic(f, last, velocity, substeps, horizon / static_cast<double>(substeps));
  if (path.truncated) throw OutOfHull("predicted step leaves the metric grid");
  return path.samples.back().position;
}

double geodesic_energy(const MetricField& f, const GeodesicSample& s) {
  return s.velocity.dot(metric_at(f, s.position) * s.velocity);
}

// ---------------------------------------------------------------------------
// Export

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string path_to_csv(const GeodesicPath& path) {
  std::string out;
  if (path.samples.empty()) return out;
  const auto m = path.samples.front().position.size();
  out += "t";
  for (Eigen::Index a = 1; a < m; ++a) out += ",x" + std::to_string(a);
  for (Eigen::Index a = 0; a < m; ++a) out += ",v" + std::to_string(a);
  out += '\n';
  for (const auto& s : path.samples) {
    for (Eigen::Index a = 0; a < m; ++a) out += (a ? "," : "") + fmt17(s.position(a));
    for (Eigen::Index a = 0; a < m; ++a) out += "," + fmt17(s.velocity(a));
    out += '\n';
  }
  return out;
}

std::string field_to_json(const MetricField& f) {
  nlohmann::ordered_json j;
  const auto m = static_cast<Eigen::Index>(f.dimension());
  std::vector<double> origin(f.origin().data(), f.origin().data() + m);
  std::vector<double> spacing(f.spacing().data(), f.spacing().data() + m);
  j["dimension"] = m;
  j["origin"] = origin;
  j["spacing"] = spacing;
  j["nodes"] = f.node_counts();
  j["epsilon"] = f.epsilon();
  auto tensors = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < f.node_total(); ++i) {
    std::vector<double> row;
    const auto& t = f.tensor(i);
    for (Eigen::Index r = 0; r < m; ++r)
      for (Eigen::Index c = 0; c < m; ++c) row.push_back(t(r, c));
    tensors.push_back(row);
  }
  j["tensors"] = std::move(tensors);
  return j.dump() + "\n";
}

MetricField field_from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    const auto m = j.at("dimension").get<Eigen::Index>();
    const auto origin = j.at("origin").get<std::vector<double>>();
    const auto spacing = j.at("spacing").get<std::vector<double>>();
    const auto counts = j.at("nodes").get<std::vector<std::size_t>>();
    if (static_cast<Eigen::Index>(origin.size()) != m || static_cast<Eigen::Index>(spacing.size()) != m)
      throw InvalidGrid("metric JSON dimension mismatch");
    std::vector<Eigen::MatrixXd> tensors;
    for (const auto& t : j.at("tensors")) {
      const auto v = t.get<std::vector<double>>();
      if (static_cast<Eigen::Index>(v.size()) != m * m) throw InvalidGrid("metric JSON tensor has wrong size");
      Eigen::MatrixXd g(m, m);
      for (Eigen::Index r = 0; r < m; ++r)
        for (Eigen::Index c = 0; c < m; ++c) g(r, c) = v[static_cast<std::size_t>(r * m + c)];
      tensors.push_back(std::move(g));
    }
    return MetricField(Eigen::Map<const Eigen::VectorXd>(origin.data(), m),
                       Eigen::Map<const Eigen::VectorXd>(spacing.data(), m), counts, std::move(tensors),
                       j.at("epsilon").get<double>());
  } catch (const nlohmann::json::exception& e) {
    throw InvalidGrid(std::string("malformed metric JSON: ") + e.what());
  }
}

}  // namespace rforge::geodesic
