#include "rforge/clicklog.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <numbers>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "rforge/error.hpp"
#include "rforge/random.hpp"

namespace rforge::clicklog {

using json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Vocabulary / TermBag

TermId Vocabulary::intern(std::string_view term) {
  std::string key(term);
  auto it = ids_.find(key);
  if (it != ids_.end()) return it->second;
  const auto id = static_cast<TermId>(terms_.size());
  terms_.push_back(key);
  ids_.emplace(std::move(key), id);
  return id;
}

const TermId* Vocabulary::find(std::string_view term) const {
  auto it = ids_.find(std::string(term));
  return it == ids_.end() ? nullptr : &it->second;
}

TermBag TermBag::from_counts(const std::unordered_map<TermId, std::uint32_t>& counts) {
  TermBag bag;
  bag.entries_.reserve(counts.size());
  for (const auto& [id, c] : counts)
    if (c > 0) bag.entries_.emplace_back(id, c);
  std::sort(bag.entries_.begin(), bag.entries_.end());
  return bag;
}

void TermBag::add(TermId id, std::uint32_t count) {
  if (count == 0) return;
  auto it = std::lower_bound(entries_.begin(), entries_.end(), id,
                             [](const Entry& e, TermId key) { return e.first < key; });
  if (it != entries_.end() && it->first == id)
    it->second += count;
  else
    entries_.insert(it, Entry{id, count});
}

TermBag TermBag::merged(const TermBag& other) const {
  TermBag out;
  out.entries_.reserve(entries_.size() + other.entries_.size());
  auto a = entries_.begin();
  auto b = other.entries_.begin();
  while (a != entries_.end() || b != other.entries_.end()) {
    if (b == other.entries_.end() || (a != entries_.end() && a->first < b->first)) {
      out.entries_.push_back(*a++);
    } else if (a == entries_.end() || b->first < a->first) {
      out.entries_.push_back(*b++);
    } else {
      out.entries_.emplace_back(a->first, a->second + b->second);
      ++a;
      ++b;
    }
  }
  return out;
}

std::uint32_t TermBag::count(TermId id) const {
  auto it = std::lower_bound(entries_.begin(), entries_.end(), id,
                             [](const Entry& e, TermId key) { return e.first < key; });
  return (it != entries_.end() && it->first == id) ? it->second : 0;
}

namespace {

// ASCII letters and digits are word bytes; so is every non-ASCII byte, which
// keeps UTF-8 encoded words intact.
bool is_word_byte(unsigned char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c >= 0x80;
}

template <typename Emit>
void for_each_token(std::string_view text, Emit&& emit) {
  std::string token;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (is_word_byte(c)) {
      token.push_back((c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : ch);
    } else if (!token.empty()) {
      emit(token);
      token.clear();
    }
  }
  if (!token.empty()) emit(token);
}

}  // namespace

TermBag tokenize(std::string_view text, Vocabulary& vocab) {
  std::unordered_map<TermId, std::uint32_t> counts;
  for_each_token(text, [&](const std::string& t) { ++counts[vocab.intern(t)]; });
  return TermBag::from_counts(counts);
}

std::map<std::string, std::uint32_t> tokenize_terms(std::string_view text) {
  std::map<std::string, std::uint32_t> counts;
  for_each_token(text, [&](const std::string& t) { ++counts[t]; });
  return counts;
}

// ---------------------------------------------------------------------------
// ClickstreamCollection

namespace {

struct Located {
  Click click;
  std::size_t line;
};

// Sorts one stream's records by seq and enforces the seq/timestamp contract.
// Line 0 is used for in-memory input.
void check_stream(std::vector<Located>& records) {
  std::stable_sort(records.begin(), records.end(),
                   [](const Located& a, const Located& b) { return a.click.seq < b.click.seq; });
  for (std::size_t k = 0; k < records.size(); ++k) {
    const auto& r = records[k];
    if (k > 0 && r.click.seq == records[k - 1].click.seq) {
      const std::size_t line = std::max(r.line, records[k - 1].line);
      throw SequenceError(line, "duplicate seq " + std::to_string(r.click.seq) + " in stream '" +
                                    r.click.stream_id + "'");
    }
    if (r.click.seq != k) {
      throw SequenceError(r.line, "seq gap in stream '" + r.click.stream_id + "': expected " +
                                      std::to_string(k) + ", found " + std::to_string(r.click.seq));
    }
    if (k > 0 && r.click.timestamp < records[k - 1].click.timestamp) {
      throw OrderError(r.line, "timestamp decreases at seq " + std::to_string(r.click.seq) +
                                   " in stream '" + r.click.stream_id + "'");
    }
  }
}

std::vector<Clickstream> group_records(std::vector<Located> records) {
  std::vector<std::string> order;
  std::unordered_map<std::string, std::vector<Located>> groups;
  for (auto& r : records) {
    auto [it, inserted] = groups.try_emplace(r.click.stream_id);
    if (inserted) order.push_back(r.click.stream_id);
    it->second.push_back(std::move(r));
  }
  std::vector<Clickstream> streams;
  streams.reserve(order.size());
  for (const auto& id : order) {
    auto& group = groups[id];
    check_stream(group);
    Clickstream s{id, {}};
    s.clicks.reserve(group.size());
    for (auto& r : group) s.clicks.push_back(std::move(r.click));
    streams.push_back(std::move(s));
  }
  return streams;
}

}  // namespace

ClickstreamCollection ClickstreamCollection::build(std::vector<Clickstream> streams) {
  std::unordered_set<std::string> seen;
  for (auto& s : streams) {
    if (s.clicks.empty()) throw ConfigError("stream '" + s.stream_id + "' is empty");
    if (!seen.insert(s.stream_id).second) throw ConfigError("duplicate stream id '" + s.stream_id + "'");
    std::vector<Located> records;
    records.reserve(s.clicks.size());
    for (auto& c : s.clicks) {
      if (c.stream_id != s.stream_id)
        throw ConfigError("click of stream '" + c.stream_id + "' filed under '" + s.stream_id + "'");
      records.push_back({std::move(c), 0});
    }
    check_stream(records);
    s.clicks.clear();
    for (auto& r : records) s.clicks.push_back(std::move(r.click));
  }

  ClickstreamCollection out;
  out.bags_.reserve(streams.size());
  for (const auto& s : streams) {
    std::vector<TermBag> bags;
    bags.reserve(s.clicks.size());
    for (const auto& c : s.clicks) {
      TermBag q = tokenize(c.query_text, out.vocab_);
      TermBag r = tokenize(c.response_text, out.vocab_);
      bags.push_back(q.merged(r));
    }
    out.bags_.push_back(std::move(bags));
  }
  out.streams_ = std::move(streams);
  return out;
}

std::size_t ClickstreamCollection::click_count() const {
  std::size_t total = 0;
  for (const auto& s : streams_) total += s.clicks.size();
  return total;
}

std::size_t ClickstreamCollection::max_stream_length() const {
  std::size_t longest = 0;
  for (const auto& s : streams_) longest = std::max(longest, s.clicks.size());
  return longest;
}

// ---------------------------------------------------------------------------
// Log formats

LogFormat parse_log_format(std::string_view name) {
  if (name == "jsonl") return LogFormat::jsonl;
  if (name == "tsv") return LogFormat::tsv;
  throw ConfigError("unknown log format '" + std::string(name) + "'");
}

std::string_view to_string(LogFormat format) {
  return format == LogFormat::jsonl ? "jsonl" : "tsv";
}

namespace {

bool valid_utf8(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t len = 0;
    std::uint32_t cp = 0;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xE0) == 0xC0) {
      len = 2;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      len = 3;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      len = 4;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + len > s.size()) return false;
    for (std::size_t k = 1; k < len; ++k) {
      const auto cc = static_cast<unsigned char>(s[i + k]);
      if ((cc & 0xC0) != 0x80) return false;
      cp = (cp << 6) | (cc & 0x3F);
    }
    // Reject overlong encodings, surrogates and out-of-range code points.
    if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000) ||
        cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF))
      return false;
    i += len;
  }
  return true;
}

bool has_control(std::string_view s) {
  return std::any_of(s.begin(), s.end(), [](char ch) {
    const auto c = static_cast<unsigned char>(ch);
    return c < 0x20 || c == 0x7F;
  });
}

template <typename Int>
bool parse_int(std::string_view s, Int& out) {
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

Click parse_jsonl_record(std::string_view line, std::size_t lineno) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw DecodeError(lineno, std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object()) throw DecodeError(lineno, "record is not a JSON object");
  auto field = [&](const char* key) -> const json& {
    auto it = j.find(key);
    if (it == j.end()) throw DecodeError(lineno, std::string("missing field '") + key + "'");
    return *it;
  };
  Click c;
  const json& sid = field("stream_id");
  const json& seq = field("seq");
  const json& ts = field("timestamp_ms");
  const json& q = field("query");
  const json& r = field("response");
  if (!sid.is_string() || sid.get_ref<const std::string&>().empty())
    throw DecodeError(lineno, "stream_id must be a nonempty string");
  if (!seq.is_number_integer() || (seq.is_number_integer() && !seq.is_number_unsigned() && seq.get<std::int64_t>() < 0))
    throw DecodeError(lineno, "seq must be a nonnegative integer");
  if (!ts.is_number_integer()) throw DecodeError(lineno, "timestamp_ms must be an integer");
  if (!q.is_string() || !r.is_string()) throw DecodeError(lineno, "query and response must be strings");
  c.stream_id = sid.get<std::string>();
  c.seq = seq.get<std::uint64_t>();
  c.timestamp = ts.get<std::int64_t>();
  c.query_text = q.get<std::string>();
  c.response_text = r.get<std::string>();
  return c;
}

Click parse_tsv_record(std::string_view line, std::size_t lineno) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
  if (fields.size() != 5)
    throw DecodeError(lineno, "expected 5 tab-separated fields, found " + std::to_string(fields.size()));
  for (auto f : fields)
    if (has_control(f)) throw DecodeError(lineno, "control character in field");
  Click c;
  if (fields[0].empty()) throw DecodeError(lineno, "empty stream_id");
  c.stream_id = std::string(fields[0]);
  if (!parse_int(fields[1], c.seq)) throw DecodeError(lineno, "seq must be a nonnegative integer");
  if (!parse_int(fields[2], c.timestamp)) throw DecodeError(lineno, "timestamp_ms must be an integer");
  c.query_text = std::string(fields[3]);
  c.response_text = std::string(fields[4]);
  return c;
}

}  // namespace

ClickstreamCollection parse_log(std::istream& input, LogFormat format) {
  std::vector<Located> records;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(input, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!valid_utf8(line)) throw DecodeError(lineno, "invalid UTF-8");
    Click c = format == LogFormat::jsonl ? parse_jsonl_record(line, lineno) : parse_tsv_record(line, lineno);
    records.push_back({std::move(c), lineno});
  }
  return ClickstreamCollection::build(group_records(std::move(records)));
}

ClickstreamCollection parse_log(std::string_view input, LogFormat format) {
  std::istringstream in{std::string(input)};
  return parse_log(in, format);
}

void serialize_log(const ClickstreamCollection& collection, LogFormat format, std::ostream& out) {
  for (const auto& s : collection.streams()) {
    for (const auto& c : s.clicks) {
      if (format == LogFormat::jsonl) {
        json j;
        j["stream_id"] = c.stream_id;
        j["seq"] = c.seq;
        j["timestamp_ms"] = c.timestamp;
        j["query"] = c.query_text;
        j["response"] = c.response_text;
        out << j.dump() << '\n';
      } else {
        for (std::string_view f : {std::string_view(c.stream_id), std::string_view(c.query_text),
                                   std::string_view(c.response_text)})
          if (has_control(f)) throw ConfigError("field of stream '" + c.stream_id + "' is not representable in TSV");
        out << c.stream_id << '\t' << c.seq << '\t' << c.timestamp << '\t' << c.query_text << '\t'
            << c.response_text << '\n';
      }
    }
  }
}

std::string serialize_log(const ClickstreamCollection& collection, LogFormat format) {
  std::ostringstream out;
  serialize_log(collection, format, out);
  return out.str();
}

// ---------------------------------------------------------------------------
// Synthetic generation

SyntheticMode parse_synthetic_mode(std::string_view name) {
  if (name == "random" || name == "random_text") return SyntheticMode::random_text;
  if (name == "planted" || name == "planted_geodesic") return SyntheticMode::planted_geodesic;
  throw ConfigError("unknown synthetic mode '" + std::string(name) + "'");
}

std::string_view to_string(SyntheticMode mode) {
  return mode == SyntheticMode::random_text ? "random_text" : "planted_geodesic";
}

namespace {

constexpr std::int64_t kBaseTimestamp = 1'700'000'000'000;

std::string stream_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "s%04zu", index);
  return buf;
}

// Mean of |<u, e>| over unit u uniform on the sphere S^{n-1}, for fixed unit e.
double mean_abs_projection(std::size_t n) {
  const double dn = static_cast<double>(n);
  return std::tgamma(dn / 2.0) / (std::sqrt(std::numbers::pi) * std::tgamma((dn + 1.0) / 2.0));
}

std::vector<std::vector<double>> projection_directions(std::size_t n, std::size_t count) {
  std::vector<std::vector<double>> dirs;
  if (n == 1) return {{1.0}};
  if (n == 2) {
    for (std::size_t d = 0; d < count; ++d) {
      const double a = std::numbers::pi * static_cast<double>(d) / static_cast<double>(count);
      dirs.push_back({std::cos(a), std::sin(a)});
    }
    return dirs;
  }
  // Fixed internal stream so the term layout does not depend on the data seed.
  Rng rng(0x5eed'd1c7ULL + n);
  for (std::size_t d = 0; d < count; ++d) {
    std::vector<double> u(n);
    double norm = 0.0;
    do {
      norm = 0.0;
      for (auto& x : u) {
        x = rng.normal();
        norm += x * x;
      }
    } while (norm < 1e-12);
    norm = std::sqrt(norm);
    for (auto& x : u) x /= norm;
    dirs.push_back(std::move(u));
  }
  return dirs;
}

void append_term(std::string& text, std::size_t dir, long bin, std::uint32_t count) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "d%zu%c%ld", dir, bin < 0 ? 'n' : 'p', bin < 0 ? -bin : bin);
  for (std::uint32_t k = 0; k < count; ++k) {
    if (!text.empty()) text.push_back(' ');
    text += buf;
  }
}

// Each direction contributes a window of half-width w around the projected
// position; bins inside the window carry bin_weight, boundary bins carry their
// covered fraction. The window overlap of two points falls linearly with the
// projected separation, and averaging over directions makes the resulting
// cosine distance track Euclidean latent distance for separations below 2w.
std::pair<std::string, std::string> planted_texts(const std::vector<double>& x,
                                                  const std::vector<std::vector<double>>& dirs,
                                                  double half_width, double bin_width, std::uint32_t weight) {
  std::string query, response;
  for (std::size_t d = 0; d < dirs.size(); ++d) {
    double p = 0.0;
    for (std::size_t a = 0; a < x.size(); ++a) p += dirs[d][a] * x[a];
    const double lo = p - half_width;
    const double hi = p + half_width;
    const long first = static_cast<long>(std::floor(lo / bin_width));
    const long last = static_cast<long>(std::floor(hi / bin_width));
    for (long k = first; k <= last; ++k) {
      const double b0 = static_cast<double>(k) * bin_width;
      const double covered = std::max(0.0, std::min(b0 + bin_width, hi) - std::max(b0, lo)) / bin_width;
      const auto count = static_cast<std::uint32_t>(std::lround(covered * weight));
      if (count > 0) append_term(d == 0 ? query : response, d, k, count);
    }
  }
  return {query, response};
}

}  // namespace

SyntheticData generate_synthetic(const SyntheticConfig& config, std::uint64_t seed) {
  if (config.num_streams < 1) throw ConfigError("num_streams must be >= 1");
  if (config.stream_len < 1) throw ConfigError("stream_len must be >= 1");
  Rng rng(seed);
  SyntheticData data;
  std::vector<Clickstream> streams;
  streams.reserve(config.num_streams);

  if (config.mode == SyntheticMode::random_text) {
    if (config.vocabulary_size < 1) throw ConfigError("vocabulary_size must be >= 1");
    auto word = [&] { return "w" + std::to_string(rng.below(config.vocabulary_size)); };
    for (std::size_t s = 0; s < config.num_streams; ++s) {
      Clickstream stream{stream_name(s), {}};
      std::int64_t t = kBaseTimestamp + static_cast<std::int64_t>(s) * 3'600'000;
      for (std::size_t k = 0; k < config.stream_len; ++k) {
        Click c;
        c.stream_id = stream.stream_id;
        c.seq = k;
        c.timestamp = t;
        const auto qlen = 1 + rng.below(3);
        for (std::uint64_t i = 0; i < qlen; ++i) c.query_text += (i ? " " : "") + word();
        const auto rlen = 5 + rng.below(11);
        for (std::uint64_t i = 0; i < rlen; ++i) c.response_text += (i ? " " : "") + word();
        stream.clicks.push_back(std::move(c));
        t += 1000 + static_cast<std::int64_t>(rng.below(59'000));
      }
      streams.push_back(std::move(stream));
    }
    data.collection = ClickstreamCollection::build(std::move(streams));
    return data;
  }

  if (config.n < 1) throw ConfigError("latent dimension n must be >= 1");
  if (!(config.latent_extent > 0.0)) throw ConfigError("latent_extent must be positive");
  if (!(config.bin_width > 0.0)) throw ConfigError("bin_width must be positive");
  if (config.bin_weight < 1) throw ConfigError("bin_weight must be >= 1");

  const std::size_t n = config.n;
  const std::size_t ndirs = config.directions > 0 ? config.directions : (n == 2 ? 16 : 8 * n * n);
  const auto dirs = projection_directions(n, ndirs);
  // Unit slope: cosine distance ~ |x - y| for small separations.
  const double half_width = mean_abs_projection(n) / 2.0;

  data.latent.resize(config.num_streams);
  for (std::size_t s = 0; s < config.num_streams; ++s) {
    std::vector<double> a(n), b(n);
    for (auto& v : a) v = rng.uniform(0.0, config.latent_extent);
    for (auto& v : b) v = rng.uniform(0.0, config.latent_extent);
    Clickstream stream{stream_name(s), {}};
    std::int64_t t = kBaseTimestamp + static_cast<std::int64_t>(s) * 3'600'000;
    const double denom = config.stream_len > 1 ? static_cast<double>(config.stream_len - 1) : 1.0;
    for (std::size_t k = 0; k < config.stream_len; ++k) {
      const double frac = static_cast<double>(k) / denom;
      std::vector<double> x(n);
      for (std::size_t i = 0; i < n; ++i) x[i] = a[i] + (b[i] - a[i]) * frac;
      auto [q, r] = planted_texts(x, dirs, half_width, config.bin_width, config.bin_weight);
      Click c{stream.stream_id, k, t, std::move(q), std::move(r)};
      stream.clicks.push_back(std::move(c));
      data.latent[s].push_back(std::move(x));
      t += 1000 + static_cast<std::int64_t>(rng.below(59'000));
    }
    streams.push_back(std::move(stream));
  }
  data.collection = ClickstreamCollection::build(std::move(streams));
  return data;
}

}  // namespace rforge::clicklog
