#pragma once

#include <compare>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "rforge/clicklog.hpp"

namespace rforge::prespace {

enum class DistanceScheme { cosine, jaccard };

DistanceScheme parse_scheme(std::string_view name);
std::string_view to_string(DistanceScheme scheme);

// Dissimilarity in [0, 1] between two term bags. Not a metric: cosine
// distance can violate the triangle inequality. Two empty bags are at
// distance 0, one empty bag is at distance 1 from any nonempty one.
double bag_distance(const clicklog::TermBag& a, const clicklog::TermBag& b, DistanceScheme scheme);

// Distance over the combined query+response bags of two clicks.
double click_distance(const clicklog::Click& a, const clicklog::Click& b,
                      DistanceScheme scheme = DistanceScheme::cosine);

struct PointRef {
  std::size_t stream_index = 0;
  std::size_t seq = 0;

  auto operator<=>(const PointRef&) const = default;
};

struct Layer {
  std::size_t label = 0;
  std::vector<PointRef> points;  // seq == label, sorted by stream_index

  bool operator==(const Layer&) const = default;
};

enum class EdgeKind { thread, neighbor };

std::string_view to_string(EdgeKind kind);

// Undirected edge stored once with a < b.
struct Edge {
  PointRef a;
  PointRef b;
  double length = 0.0;
  EdgeKind kind = EdgeKind::thread;

  bool operator==(const Edge&) const = default;
};

struct LayeredSkeleton {
  std::vector<Layer> layers;  // labels 0..L-1
  std::vector<Edge> edges;    // sorted by (a, b)

  std::size_t point_count() const;
  bool operator==(const LayeredSkeleton&) const = default;
};

std::vector<Layer> build_layers(const clicklog::ClickstreamCollection& collection);

// Thread edges for consecutive clicks plus, for every point, edges to its K
// nearest points in the same or adjacent layers (thread partners excluded),
// symmetrized by union. Ties break on (layer, stream_index, seq).
LayeredSkeleton build_skeleton(const clicklog::ClickstreamCollection& collection,
                               DistanceScheme scheme, std::size_t k);

// JSON with `layers` and `edges`; lengths printed with 17 significant digits.
std::string skeleton_to_json(const LayeredSkeleton& skeleton);
LayeredSkeleton skeleton_from_json(std::string_view text);

}  // namespace rforge::prespace
