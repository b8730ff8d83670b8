#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace rforge::clicklog {

// One query/response event. seq is the click's position in its stream.
struct Click {
  std::string stream_id;
  std::uint64_t seq = 0;
  std::int64_t timestamp = 0;  // milliseconds since epoch
  std::string query_text;
  std::string response_text;

  bool operator==(const Click&) const = default;
};

struct Clickstream {
  std::string stream_id;
  std::vector<Click> clicks;

  bool operator==(const Clickstream&) const = default;
};

using TermId = std::uint32_t;

// Interns terms to dense ids in order of first appearance.
class Vocabulary {
public:
  TermId intern(std::string_view term);
  const TermId* find(std::string_view term) const;
  const std::string& term(TermId id) const { return terms_.at(id); }
  std::size_t size() const { return terms_.size(); }

private:
  std::unordered_map<std::string, TermId> ids_;
  std::vector<std::string> terms_;
};

// Sparse term-id -> count map, stored sorted by id. Zero counts are never stored.
class TermBag {
public:
  using Entry = std::pair<TermId, std::uint32_t>;

  TermBag() = default;
  static TermBag from_counts(const std::unordered_map<TermId, std::uint32_t>& counts);

  void add(TermId id, std::uint32_t count = 1);
  TermBag merged(const TermBag& other) const;

  const std::vector<Entry>& entries() const { return entries_; }
  std::uint32_t count(TermId id) const;
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  bool operator==(const TermBag&) const = default;

private:
  std::vector<Entry> entries_;
};

// Lowercase, split on maximal runs of non-alphanumeric bytes, count tokens.
TermBag tokenize(std::string_view text, Vocabulary& vocab);

// Same rule, keyed by the term text.
std::map<std::string, std::uint32_t> tokenize_terms(std::string_view text);

// Validated, immutable set of clickstreams with a shared vocabulary and one
// cached bag (query ⊎ response) per click.
class ClickstreamCollection {
public:
  ClickstreamCollection() = default;

  // Checks stream-id uniqueness, seq contiguity and timestamp order.
  // Streams keep the given order; clicks are sorted by seq.
  static ClickstreamCollection build(std::vector<Clickstream> streams);

  const std::vector<Clickstream>& streams() const { return streams_; }
  const Vocabulary& vocabulary() const { return vocab_; }
  const TermBag& bag(std::size_t stream, std::size_t seq) const { return bags_.at(stream).at(seq); }

  std::size_t size() const { return streams_.size(); }
  bool empty() const { return streams_.empty(); }
  std::size_t click_count() const;
  std::size_t max_stream_length() const;

  bool operator==(const ClickstreamCollection& other) const { return streams_ == other.streams_; }

private:
  std::vector<Clickstream> streams_;
  Vocabulary vocab_;
  std::vector<std::vector<TermBag>> bags_;
};

enum class LogFormat { jsonl, tsv };

LogFormat parse_log_format(std::string_view name);
std::string_view to_string(LogFormat format);

ClickstreamCollection parse_log(std::istream& input, LogFormat format);
ClickstreamCollection parse_log(std::string_view input, LogFormat format);

void serialize_log(const ClickstreamCollection& collection, LogFormat format, std::ostream& out);
std::string serialize_log(const ClickstreamCollection& collection, LogFormat format);

enum class SyntheticMode { random_text, planted_geodesic };

SyntheticMode parse_synthetic_mode(std::string_view name);
std::string_view to_string(SyntheticMode mode);

struct SyntheticConfig {
  std::size_t num_streams = 20;
  std::size_t stream_len = 30;
  std::size_t n = 2;  // latent dimension (planted mode)
  SyntheticMode mode = SyntheticMode::planted_geodesic;

  // Planted mode: stream endpoints are drawn uniformly from [0, latent_extent]^n.
  double latent_extent = 1.5;
  // Number of projection directions whose 1-D bins carry the terms (0 = auto).
  std::size_t directions = 0;
  double bin_width = 0.005;
  std::uint32_t bin_weight = 2;  // count of a fully covered bin

  // Random-text mode.
  std::size_t vocabulary_size = 200;
};

struct SyntheticData {
  ClickstreamCollection collection;
  // latent[stream][seq] in R^n; empty in random_text mode.
  std::vector<std::vector<std::vector<double>>> latent;
};

SyntheticData generate_synthetic(const SyntheticConfig& config, std::uint64_t seed);

}  // namespace rforge::clicklog
