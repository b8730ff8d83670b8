#include "rforge/prespace.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <tuple>

#include <json.hpp>

#include "rforge/error.hpp"
#include "rforge/parallel.hpp"

namespace rforge::prespace {

using clicklog::TermBag;

DistanceScheme parse_scheme(std::string_view name) {
  if (name == "cosine") return DistanceScheme::cosine;
  if (name == "jaccard") return DistanceScheme::jaccard;
  throw ConfigError("unknown distance scheme '" + std::string(name) + "'");
}

std::string_view to_string(DistanceScheme scheme) {
  return scheme == DistanceScheme::cosine ? "cosine" : "jaccard";
}

std::string_view to_string(EdgeKind kind) { return kind == EdgeKind::thread ? "thread" : "neighbor"; }

namespace {

double squared_norm(const TermBag& bag) {
  double s = 0.0;
  for (const auto& [id, c] : bag.entries()) s += static_cast<double>(c) * static_cast<double>(c);
  return s;
}

double cosine_with_norms(const TermBag& a, double norm_a, const TermBag& b, double norm_b) {
  if (a.empty() && b.empty()) return 0.0;
  if (a.empty() || b.empty()) return 1.0;
  double dot = 0.0;
  auto i = a.entries().begin();
  auto j = b.entries().begin();
  while (i != a.entries().end() && j != b.entries().end()) {
    if (i->first < j->first) {
      ++i;
    } else if (j->first < i->first) {
      ++j;
    } else {
      dot += static_cast<double>(i->second) * static_cast<double>(j->second);
      ++i;
      ++j;
    }
  }
  const double d = 1.0 - dot / (norm_a * norm_b);
  return std::clamp(d, 0.0, 1.0);
}

double jaccard(const TermBag& a, const TermBag& b) {
  if (a.empty() && b.empty()) return 0.0;
  std::size_t common = 0;
  auto i = a.entries().begin();
  auto j = b.entries().begin();
  while (i != a.entries().end() && j != b.entries().end()) {
    if (i->first < j->first) {
      ++i;
    } else if (j->first < i->first) {
      ++j;
    } else {
      ++common;
      ++i;
      ++j;
    }
  }
  const std::size_t uni = a.size() + b.size() - common;
  return 1.0 - static_cast<double>(common) / static_cast<double>(uni);
}

}  // namespace

double bag_distance(const TermBag& a, const TermBag& b, DistanceScheme scheme) {
  if (scheme == DistanceScheme::jaccard) return jaccard(a, b);
  return cosine_with_norms(a, std::sqrt(squared_norm(a)), b, std::sqrt(squared_norm(b)));
}

double click_distance(const clicklog::Click& a, const clicklog::Click& b, DistanceScheme scheme) {
  clicklog::Vocabulary vocab;
  const TermBag ba = clicklog::tokenize(a.query_text, vocab).merged(clicklog::tokenize(a.response_text, vocab));
  const TermBag bb = clicklog::tokenize(b.query_text, vocab).merged(clicklog::tokenize(b.response_text, vocab));
  return bag_distance(ba, bb, scheme);
}

std::size_t LayeredSkeleton::point_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.points.size();
  return n;
}

std::vector<Layer> build_layers(const clicklog::ClickstreamCollection& collection) {
  std::vector<Layer> layers(collection.max_stream_length());
  for (std::size_t k = 0; k < layers.size(); ++k) layers[k].label = k;
  for (std::size_t s = 0; s < collection.size(); ++s) {
    const auto len = collection.streams()[s].clicks.size();
    for (std::size_t k = 0; k < len; ++k) layers[k].points.push_back({s, k});
  }
  return layers;
}

LayeredSkeleton build_skeleton(const clicklog::ClickstreamCollection& collection, DistanceScheme scheme,
                               std::size_t k) {
  LayeredSkeleton skel;
  skel.layers = build_layers(collection);

  std::vector<std::vector<double>> norms(collection.size());
  for (std::size_t s = 0; s < collection.size(); ++s)
    for (std::size_t q = 0; q < collection.streams()[s].clicks.size(); ++q)
      norms[s].push_back(std::sqrt(squared_norm(collection.bag(s, q))));

  auto dist = [&](const PointRef& p, const PointRef& r) {
    const auto& a = collection.bag(p.stream_index, p.seq);
    const auto& b = collection.bag(r.stream_index, r.seq);
    if (scheme == DistanceScheme::jaccard) return jaccard(a, b);
    return cosine_with_norms(a, norms[p.stream_index][p.seq], b, norms[r.stream_index][r.seq]);
  };

  std::map<std::pair<PointRef, PointRef>, Edge> edges;
  for (std::size_t s = 0; s < collection.size(); ++s) {
    const auto len = collection.streams()[s].clicks.size();
    for (std::size_t q = 0; q + 1 < len; ++q) {
      PointRef a{s, q}, b{s, q + 1};
      edges[{a, b}] = Edge{a, b, dist(a, b), EdgeKind::thread};
    }
  }

  if (k > 0) {
    std::vector<PointRef> points;
    for (const auto& layer : skel.layers)
      for (const auto& p : layer.points) points.push_back(p);

    // Per-point candidate lists are computed independently; merging happens
    // afterwards in point order so the edge set is schedule-independent.
    std::vector<std::vector<std::pair<PointRef, double>>> chosen(points.size());
    parallel_for(points.size(), [&](std::size_t idx) {
      const PointRef p = points[idx];
      using Candidate = std::tuple<double, std::size_t, std::size_t, std::size_t>;  // dist, layer, stream, seq
      std::vector<Candidate> cands;
      const std::size_t lo = p.seq == 0 ? 0 : p.seq - 1;
      const std::size_t hi = std::min(p.seq + 1, skel.layers.size() - 1);
      for (std::size_t l = lo; l <= hi; ++l) {
        for (const auto& r : skel.layers[l].points) {
          // Same-stream points in reach are the point itself or its thread partners.
          if (r.stream_index == p.stream_index) continue;
          cands.emplace_back(dist(p, r), l, r.stream_index, r.seq);
        }
      }
      const std::size_t take = std::min(k, cands.size());
      std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(take), cands.end());
      for (std::size_t i = 0; i < take; ++i) {
        const auto& [d, l, st, sq] = cands[i];
        chosen[idx].emplace_back(PointRef{st, sq}, d);
      }
    });
    for (std::size_t idx = 0; idx < points.size(); ++idx) {
      for (const auto& [r, d] : chosen[idx]) {
        PointRef a = std::min(points[idx], r), b = std::max(points[idx], r);
        edges.try_emplace({a, b}, Edge{a, b, d, EdgeKind::neighbor});
      }
    }
  }

  skel.edges.reserve(edges.size());
  for (auto& [key, e] : edges) skel.edges.push_back(e);
  return skel;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string skeleton_to_json(const LayeredSkeleton& skeleton) {
  std::string out = "{\n  \"layers\": [";
  for (std::size_t i = 0; i < skeleton.layers.size(); ++i) {
    const auto& l = skeleton.layers[i];
    out += i ? ",\n    " : "\n    ";
    out += "{\"label\": " + std::to_string(l.label) + ", \"points\": [";
    for (std::size_t j = 0; j < l.points.size(); ++j) {
      if (j) out += ", ";
      out += "[" + std::to_string(l.points[j].stream_index) + ", " + std::to_string(l.points[j].seq) + "]";
    }
    out += "]}";
  }
  out += skeleton.layers.empty() ? "],\n" : "\n  ],\n";
  out += "  \"edges\": [";
  for (std::size_t i = 0; i < skeleton.edges.size(); ++i) {
    const auto& e = skeleton.edges[i];
    out += i ? ",\n    " : "\n    ";
    out += "[" + std::to_string(e.a.stream_index) + ", " + std::to_string(e.a.seq) + ", " +
           std::to_string(e.b.stream_index) + ", " + std::to_string(e.b.seq) + ", " + fmt17(e.length) + ", \"" +
           std::string(to_string(e.kind)) + "\"]";
  }
  out += skeleton.edges.empty() ? "]\n}\n" : "\n  ]\n}\n";
  return out;
}

LayeredSkeleton skeleton_from_json(std::string_view text) {
  using json = nlohmann::json;
  LayeredSkeleton skel;
  try {
    const json j = json::parse(text);
    for (const auto& l : j.at("layers")) {
      Layer layer;
      layer.label = l.at("label").get<std::size_t>();
      for (const auto& p : l.at("points")) layer.points.push_back({p.at(0).get<std::size_t>(), p.at(1).get<std::size_t>()});
      skel.layers.push_back(std::move(layer));
    }
    for (const auto& e : j.at("edges")) {
      Edge edge;
      edge.a = {e.at(0).get<std::size_t>(), e.at(1).get<std::size_t>()};
      edge.b = {e.at(2).get<std::size_t>(), e.at(3).get<std::size_t>()};
      edge.length = e.at(4).get<double>();
      const auto kind = e.at(5).get<std::string>();
      if (kind == "thread")
        edge.kind = EdgeKind::thread;
      else if (kind == "neighbor")
        edge.kind = EdgeKind::neighbor;
      else
        throw ConfigError("unknown edge kind '" + kind + "'");
      skel.edges.push_back(edge);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed skeleton JSON: ") + e.what());
  }
  for (std::size_t i = 0; i < skel.layers.size(); ++i)
    if (skel.layers[i].label != i) throw ConfigError("skeleton layer labels must be contiguous from 0");
  std::set<PointRef> known;
  for (const auto& l : skel.layers)
    for (const auto& p : l.points) {
      if (p.seq != l.label) throw ConfigError("skeleton point seq differs from its layer label");
      known.insert(p);
    }
  for (const auto& e : skel.edges)
    if (!known.count(e.a) || !known.count(e.b)) throw ConfigError("skeleton edge references an unknown point");
  return skel;
}

}  // namespace rforge::prespace
