#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "rforge/clicklog.hpp"
#include "rforge/error.hpp"
#include "rforge/random.hpp"

using namespace rforge;
using namespace rforge::clicklog;

namespace {

std::string record(const std::string& id, int seq, long long ts, const std::string& q, const std::string& r) {
  std::ostringstream s;
  s << R"({"stream_id":")" << id << R"(","seq":)" << seq << R"(,"timestamp_ms":)" << ts << R"(,"query":")" << q
    << R"(","response":")" << r << "\"}\n";
  return s.str();
}

ClickstreamCollection random_collection(Rng& rng) {
  static const char* words[] = {"alpha", "Beta", "gamma", "d3lta", "tab\tby", "caf\xc3\xa9", "x-y", "\"quoted\""};
  std::vector<Clickstream> streams;
  const auto ns = 1 + rng.below(4);
  for (std::size_t s = 0; s < ns; ++s) {
    Clickstream cs;
    cs.stream_id = "u" + std::to_string(s);
    std::int64_t t = static_cast<std::int64_t>(rng.below(1000));
    const auto len = 1 + rng.below(5);
    for (std::size_t q = 0; q < len; ++q) {
      Click c;
      c.stream_id = cs.stream_id;
      c.seq = q;
      t += static_cast<std::int64_t>(rng.below(3));
      c.timestamp = t;
      for (std::size_t w = rng.below(4); w > 0; --w) c.query_text += std::string(words[rng.below(8)]) + " ";
      for (std::size_t w = rng.below(4); w > 0; --w) c.response_text += std::string(words[rng.below(8)]) + " ";
      cs.clicks.push_back(c);
    }
    streams.push_back(cs);
  }
  return ClickstreamCollection::build(std::move(streams));
}

}  // namespace

TEST_CASE("parse_log basic cases") {
  CHECK(parse_log(std::string_view(""), LogFormat::jsonl).size() == 0);

  const auto one = parse_log(record("s1", 0, 100, "cats", "cat page"), LogFormat::jsonl);
  REQUIRE(one.size() == 1);
  CHECK(one.streams()[0].clicks.size() == 1);
  CHECK(one.streams()[0].clicks[0].query_text == "cats");

  const auto gap = record("s1", 0, 100, "a", "b") + record("s1", 2, 101, "a", "b");
  try {
    parse_log(gap, LogFormat::jsonl);
    FAIL("expected SequenceError");
  } catch (const SequenceError& e) {
    CHECK(e.line() == 2);
  }
}

TEST_CASE("parse_log rejects bad records") {
  CHECK_THROWS_AS(parse_log(std::string_view("{not json}\n"), LogFormat::jsonl), DecodeError);
  CHECK_THROWS_AS(parse_log(std::string_view(R"({"stream_id":"a","seq":0})" "\n"), LogFormat::jsonl), DecodeError);
  const auto back = record("s1", 0, 100, "a", "b") + record("s1", 1, 99, "a", "b");
  CHECK_THROWS_AS(parse_log(back, LogFormat::jsonl), OrderError);
  const auto dup = record("s1", 0, 100, "a", "b") + record("s1", 0, 100, "a", "b");
  CHECK_THROWS_AS(parse_log(dup, LogFormat::jsonl), SequenceError);
  CHECK_THROWS_AS(parse_log(std::string_view("a\t0\t1\tq\n"), LogFormat::tsv), DecodeError);
  CHECK_THROWS_AS(parse_log_format("xml"), ConfigError);
}

TEST_CASE("records may arrive out of seq order") {
  const auto text = record("s1", 1, 200, "b", "") + record("s2", 0, 5, "z", "") + record("s1", 0, 100, "a", "");
  const auto c = parse_log(text, LogFormat::jsonl);
  REQUIRE(c.size() == 2);
  CHECK(c.streams()[0].stream_id == "s1");
  CHECK(c.streams()[0].clicks[0].query_text == "a");
  CHECK(c.streams()[0].clicks[1].query_text == "b");
}

TEST_CASE("tokenize") {
  CHECK(tokenize_terms("").empty());
  CHECK(tokenize_terms("Cat cat, DOG") == std::map<std::string, std::uint32_t>{{"cat", 2}, {"dog", 1}});
  CHECK(tokenize_terms("a1-b2") == std::map<std::string, std::uint32_t>{{"a1", 1}, {"b2", 1}});

  Vocabulary v;
  const auto bag = tokenize("x y x", v);
  CHECK(bag.size() == 2);
  CHECK(bag.count(*v.find("x")) == 2);
}

TEST_CASE("property: tokenize is idempotent on its own output") {
  Rng rng(11);
  const std::string alphabet = "abAB01 ,.-_\t!";
  for (int trial = 0; trial < 200; ++trial) {
    std::string text;
    for (std::size_t i = rng.below(40); i > 0; --i) text += alphabet[rng.below(alphabet.size())];
    const auto terms = tokenize_terms(text);
    std::string again;
    for (const auto& [t, n] : terms)
      for (std::uint32_t i = 0; i < n; ++i) again += t + " ";
    CHECK(tokenize_terms(again) == terms);
  }
}

TEST_CASE("property: serialize then parse is the identity") {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const auto c = random_collection(rng);
    CHECK(parse_log(serialize_log(c, LogFormat::jsonl), LogFormat::jsonl) == c);
    bool tsv_ok = true;
    for (const auto& s : c.streams())
      for (const auto& k : s.clicks)
        if (k.query_text.find('\t') != std::string::npos || k.response_text.find('\t') != std::string::npos)
          tsv_ok = false;
    if (tsv_ok)
      CHECK(parse_log(serialize_log(c, LogFormat::tsv), LogFormat::tsv) == c);
    else
      CHECK_THROWS_AS(serialize_log(c, LogFormat::tsv), ConfigError);
  }
}

TEST_CASE("generate_synthetic") {
  SyntheticConfig cfg;
  cfg.num_streams = 2;
  cfg.stream_len = 3;
  cfg.mode = SyntheticMode::random_text;
  const auto a = generate_synthetic(cfg, 7);
  const auto b = generate_synthetic(cfg, 7);
  CHECK(serialize_log(a.collection, LogFormat::jsonl) == serialize_log(b.collection, LogFormat::jsonl));
  CHECK(a.collection.click_count() == 6);

  cfg.num_streams = 5;
  cfg.stream_len = 4;
  CHECK(generate_synthetic(cfg, 1).collection.click_count() == 20);

  int differ = 0;
  for (std::uint64_t s = 0; s < 10; ++s)
    if (!(generate_synthetic(cfg, 2 * s).collection == generate_synthetic(cfg, 2 * s + 1).collection)) ++differ;
  CHECK(differ == 10);
}

TEST_CASE("planted latent points are collinear per stream") {
  SyntheticConfig cfg;
  cfg.n = 2;
  const auto d = generate_synthetic(cfg, 3);
  REQUIRE(d.latent.size() == cfg.num_streams);
  for (const auto& stream : d.latent) {
    REQUIRE(stream.size() >= 3);
    const double dx = stream.back()[0] - stream.front()[0];
    const double dy = stream.back()[1] - stream.front()[1];
    const double len = std::hypot(dx, dy);
    for (const auto& p : stream) {
      const double cross = (p[0] - stream.front()[0]) * dy - (p[1] - stream.front()[1]) * dx;
      CHECK(std::abs(cross) / std::max(len, 1e-300) < 1e-12);
    }
  }
  cfg.n = 0;
  CHECK_THROWS_AS(generate_synthetic(cfg, 0), ConfigError);
}
