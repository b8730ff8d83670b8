#include "rforge/rota.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "rforge/error.hpp"

namespace rforge::rota {

Dag::Dag(std::size_t m, EdgeList edges) : m_(m), edges_(std::move(edges)) {
  for (const auto& [j, k] : edges_) {
    if (j >= m_ || k >= m_) throw ConfigError("edge endpoint outside 0.." + std::to_string(m_ == 0 ? 0 : m_ - 1));
    if (j == k) throw CycleError("self-loop at vertex " + std::to_string(j));
  }
  std::sort(edges_.begin(), edges_.end());
  edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());

  // Kahn's algorithm; leftover vertices lie on a cycle.
  std::vector<std::size_t> indegree(m_, 0);
  std::vector<std::vector<std::size_t>> out(m_);
  for (const auto& [j, k] : edges_) {
    out[j].push_back(k);
    ++indegree[k];
  }
  std::vector<std::size_t> ready;
  for (std::size_t v = 0; v < m_; ++v)
    if (indegree[v] == 0) ready.push_back(v);
  std::size_t seen = 0;
  while (!ready.empty()) {
    const auto v = ready.back();
    ready.pop_back();
    ++seen;
    for (auto w : out[v])
      if (--indegree[w] == 0) ready.push_back(w);
  }
  if (seen != m_) throw CycleError("edge set contains a directed cycle");
}

TemplateMatrix TemplateMatrix::from_rows(const std::vector<std::string>& rows) {
  TemplateMatrix t(rows.size());
  for (std::size_t j = 0; j < rows.size(); ++j) {
    if (rows[j].size() != rows.size()) throw ConfigError("template rows must form a square");
    for (std::size_t k = 0; k < rows.size(); ++k) {
      if (rows[j][k] != '*' && rows[j][k] != '0') throw ConfigError("template entries must be '*' or '0'");
      t.set(j, k, rows[j][k] == '*');
    }
  }
  return t;
}

std::vector<std::string> TemplateMatrix::rows() const {
  std::vector<std::string> out(m_, std::string(m_, '0'));
  for (std::size_t j = 0; j < m_; ++j)
    for (std::size_t k = 0; k < m_; ++k)
      if ((*this)(j, k)) out[j][k] = '*';
  return out;
}

TemplateMatrix template_matrix(const Dag& d) {
  TemplateMatrix t(d.size());
  for (std::size_t j = 0; j < d.size(); ++j) t.set(j, j);
  for (const auto& [j, k] : d.edges()) t.set(j, k);
  return t;
}

bool is_closed_algebra(const TemplateMatrix& t) {
  const auto m = t.size();
  for (std::size_t j = 0; j < m; ++j)
    for (std::size_t k = 0; k < m; ++k) {
      if (!t(j, k)) continue;
      for (std::size_t l = 0; l < m; ++l)
        if (t(k, l) && !t(j, l)) return false;
    }
  return true;
}

TemplateMatrix algebra_closure(const TemplateMatrix& t) {
  TemplateMatrix c = t;
  const auto m = t.size();
  for (std::size_t k = 0; k < m; ++k)
    for (std::size_t j = 0; j < m; ++j) {
      if (!c(j, k)) continue;
      for (std::size_t l = 0; l < m; ++l)
        if (c(k, l)) c.set(j, l);
    }
  return c;
}

Eigen::VectorXd propagate(const TemplateMatrix& t, const Eigen::MatrixXd& weights, const Eigen::VectorXd& signal,
                          std::size_t layers) {
  const auto m = static_cast<Eigen::Index>(t.size());
  if (weights.rows() != m || weights.cols() != m || signal.size() != m)
    throw DimensionMismatch("weights and signal must conform to the template");
  if (layers < 1) throw ConfigError("layers must be positive");
  for (Eigen::Index j = 0; j < m; ++j)
    for (Eigen::Index k = 0; k < m; ++k)
      if (weights(j, k) != 0.0 && !t(static_cast<std::size_t>(j), static_cast<std::size_t>(k)))
        throw MaskViolation("nonzero weight at (" + std::to_string(j) + ", " + std::to_string(k) +
                            ") outside the template");
  Eigen::VectorXd out = signal;
  for (std::size_t i = 0; i < layers; ++i) out = weights * out;
  return out;
}

std::vector<Eigen::MatrixXd> template_basis(const TemplateMatrix& t) {
  const auto m = static_cast<Eigen::Index>(t.size());
  std::vector<Eigen::MatrixXd> basis;
  for (Eigen::Index j = 0; j < m; ++j)
    for (Eigen::Index k = 0; k < m; ++k)
      if (t(static_cast<std::size_t>(j), static_cast<std::size_t>(k))) {
        Eigen::MatrixXd e = Eigen::MatrixXd::Zero(m, m);
        e(j, k) = 1.0;
        basis.push_back(std::move(e));
      }
  return basis;
}

Spatialization spatialize(const std::vector<Eigen::MatrixXd>& spanning_set) {
  if (spanning_set.empty()) throw EmptySubspace("spanning set is empty");
  const auto mi = spanning_set.front().rows();
  if (mi == 0) throw EmptySubspace("matrices have zero size");
  for (const auto& a : spanning_set)
    if (a.rows() != mi || a.cols() != mi) throw DimensionMismatch("spanning matrices must share one square shape");
  const auto m = static_cast<std::size_t>(mi);

  TemplateMatrix support(m);
  for (std::size_t j = 0; j < m; ++j) support.set(j, j);
  for (const auto& a : spanning_set)
    for (Eigen::Index j = 0; j < mi; ++j)
      for (Eigen::Index k = 0; k < mi; ++k)
        if (std::abs(a(j, k)) > kSupportThreshold) support.set(static_cast<std::size_t>(j), static_cast<std::size_t>(k));
  support = algebra_closure(support);

  Spatialization out;
  out.support = support;
  auto& top = out.topology;
  std::vector<std::size_t> class_of(m, m);
  for (std::size_t j = 0; j < m; ++j) {
    if (class_of[j] != m) continue;
    const std::size_t c = top.classes.size();
    top.classes.emplace_back();
    for (std::size_t k = j; k < m; ++k)
      if (support(j, k) && support(k, j)) {
        class_of[k] = c;
        top.classes[c].push_back(k);
      }
  }
  const std::size_t n = top.classes.size();
  top.leq.assign(n, std::vector<bool>(n, false));
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b) top.leq[a][b] = support(top.classes[a].front(), top.classes[b].front());

  if (n <= kMaxEnumeratedPoints) {
    top.open_sets_enumerated = true;
    for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
      bool up = true;
      for (std::size_t a = 0; a < n && up; ++a) {
        if (!(mask >> a & 1U)) continue;
        for (std::size_t b = 0; b < n && up; ++b)
          if (top.leq[a][b] && !(mask >> b & 1U)) up = false;
      }
      if (!up) continue;
      std::vector<std::size_t> set;
      for (std::size_t a = 0; a < n; ++a)
        if (mask >> a & 1U) set.push_back(a);
      top.open_sets.push_back(std::move(set));
    }
    std::sort(top.open_sets.begin(), top.open_sets.end(), [](const auto& x, const auto& y) {
      return x.size() != y.size() ? x.size() < y.size() : x < y;
    });
  }

  if (n == m) {
    EdgeList edges;
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = 0; b < n; ++b) {
        if (a == b || !top.leq[a][b]) continue;
        bool cover = true;
        for (std::size_t c = 0; c < n && cover; ++c)
          if (c != a && c != b && top.leq[a][c] && top.leq[c][b]) cover = false;
        if (cover) edges.emplace_back(top.classes[a].front(), top.classes[b].front());
      }
    out.dag = Dag(m, std::move(edges));
  } else {
    for (const auto& c : top.classes)
      if (c.size() > 1) out.cycles.push_back(c);
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSON

Dag dag_from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    return Dag(j.at("m").get<std::size_t>(), j.at("edges").get<EdgeList>());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed DAG JSON: ") + e.what());
  }
}

std::string dag_to_json(const Dag& d) {
  nlohmann::ordered_json j;
  j["m"] = d.size();
  j["edges"] = d.edges();
  return j.dump() + "\n";
}

std::string mask_to_json(const TemplateMatrix& t) {
  nlohmann::ordered_json j;
  j["m"] = t.size();
  j["mask"] = t.rows();
  j["closed"] = is_closed_algebra(t);
  return j.dump() + "\n";
}

std::vector<Eigen::MatrixXd> subspace_from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    if (!j.is_array()) throw ConfigError("subspace JSON must be a list of matrices");
    std::vector<Eigen::MatrixXd> out;
    for (const auto& jm : j) {
      const auto rows = jm.get<std::vector<std::vector<double>>>();
      const auto m = static_cast<Eigen::Index>(rows.size());
      Eigen::MatrixXd a(m, m);
      for (Eigen::Index r = 0; r < m; ++r) {
        if (static_cast<Eigen::Index>(rows[static_cast<std::size_t>(r)].size()) != m)
          throw DimensionMismatch("subspace matrices must be square");
        for (Eigen::Index c = 0; c < m; ++c) a(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
      }
      out.push_back(std::move(a));
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed subspace JSON: ") + e.what());
  }
}

std::string spatialization_to_json(const Spatialization& s) {
  nlohmann::ordered_json j;
  j["support"] = s.support.rows();
  j["points"] = s.topology.classes;
  nlohmann::ordered_json order = nlohmann::ordered_json::array();
  const auto n = s.topology.classes.size();
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b)
      if (a != b && s.topology.leq[a][b]) order.push_back({a, b});
  j["order"] = std::move(order);
  if (s.topology.open_sets_enumerated)
    j["open_sets"] = s.topology.open_sets;
  else
    j["open_sets"] = nullptr;
  if (s.dag) {
    j["dag"] = {{"m", s.dag->size()}, {"edges", s.dag->edges()}};
  } else {
    j["dag"] = nullptr;
    j["cycles"] = s.cycles;
  }
  return j.dump() + "\n";
}

}  // namespace rforge::rota
