#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace rforge::rota {

using EdgeList = std::vector<std::pair<std::size_t, std::size_t>>;

// Directed acyclic graph on vertices 0..m-1. Edges are stored sorted and
// deduplicated; self-loops count as cycles.
class Dag {
public:
  Dag(std::size_t m, EdgeList edges);  // CycleError, ConfigError

  std::size_t size() const { return m_; }
  const EdgeList& edges() const { return edges_; }
  bool operator==(const Dag&) const = default;

private:
  std::size_t m_;
  EdgeList edges_;
};

// Boolean support mask; mask(j, k) means entry (j, k) may be nonzero.
class TemplateMatrix {
public:
  explicit TemplateMatrix(std::size_t m = 0) : m_(m), mask_(m * m, 0) {}

  std::size_t size() const { return m_; }
  bool operator()(std::size_t j, std::size_t k) const { return mask_[j * m_ + k] != 0; }
  void set(std::size_t j, std::size_t k, bool v = true) { mask_[j * m_ + k] = v ? 1 : 0; }
  bool operator==(const TemplateMatrix&) const = default;

  // Rows of '*' and '0', e.g. {"**", "0*"}.
  static TemplateMatrix from_rows(const std::vector<std::string>& rows);
  std::vector<std::string> rows() const;

private:
  std::size_t m_;
  std::vector<unsigned char> mask_;
};

// Edges plus the full diagonal.
TemplateMatrix template_matrix(const Dag& d);

// mask * mask (boolean) stays inside mask.
bool is_closed_algebra(const TemplateMatrix& t);

// Least transitive superset (Warshall).
TemplateMatrix algebra_closure(const TemplateMatrix& t);

// weights^layers * signal; weights must vanish outside the mask.
Eigen::VectorXd propagate(const TemplateMatrix& t, const Eigen::MatrixXd& weights, const Eigen::VectorXd& signal,
                          std::size_t layers);

inline constexpr double kSupportThreshold = 1e-12;
inline constexpr std::size_t kMaxEnumeratedPoints = 20;

// Finite T0 space: points are classes of mutually reachable indices, opens
// are the up-sets of the specialization order.
struct FinitePreorderTopology {
  std::vector<std::vector<std::size_t>> classes;  // ordered by smallest index
  std::vector<std::vector<bool>> leq;             // leq[a][b]: class a <= class b
  std::vector<std::vector<std::size_t>> open_sets;  // sorted up-sets; empty unless enumerated
  bool open_sets_enumerated = false;
};

struct Spatialization {
  TemplateMatrix support;  // reflexive-transitive closure of the support union
  FinitePreorderTopology topology;
  std::optional<Dag> dag;  // transitive reduction when every class is a singleton
  std::vector<std::vector<std::size_t>> cycles;  // non-singleton classes otherwise
};

Spatialization spatialize(const std::vector<Eigen::MatrixXd>& spanning_set);  // EmptySubspace, DimensionMismatch

// Basis matrices E_jk for every true mask entry.
std::vector<Eigen::MatrixXd> template_basis(const TemplateMatrix& t);

// {m, edges: [[j, k], ...]} with 0-based vertices.
Dag dag_from_json(std::string_view text);
std::string dag_to_json(const Dag& d);
std::string mask_to_json(const TemplateMatrix& t);
// JSON list of dense row-major matrices.
std::vector<Eigen::MatrixXd> subspace_from_json(std::string_view text);
std::string spatialization_to_json(const Spatialization& s);

}  // namespace rforge::rota
