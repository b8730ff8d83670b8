#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "../support/chain.hpp"

using namespace rforge;
using namespace rforge::testing;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("rforge-cli-" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("exit codes") {
  const auto none = invoke({});
  CHECK(none.code == 2);
  CHECK(none.err.find("Usage") != std::string::npos);
  CHECK(none.out.empty());

  CHECK(invoke({"--help"}).code == 0);
  CHECK(invoke({"frobnicate"}).code == 2);
  CHECK(invoke({"probcheck", "accardi", "--p", "0.25"}).code == 2);
  CHECK(invoke({"probcheck", "accardi", "--p", "x", "--q", "0.25", "--r", "0.25"}).code == 2);

  const auto acc = invoke({"probcheck", "accardi", "--p", "0.25", "--q", "0.25", "--r", "0.25", "--stdout"});
  CHECK(acc.code == 0);
  const auto report = nlohmann::json::parse(acc.out);
  CHECK(report["schema"] == "reality-forge.report/1");
  CHECK(report["outputs"]["verdict"] == "nonclassical");
  CHECK(report["outputs"]["lp_verdict"] == "nonclassical");

  // Domain errors go to the error stream with exit 1.
  const auto bad = invoke({"probcheck", "bell", "--p-ab", "1.5", "--p-bc", "0", "--p-ac", "0"});
  CHECK(bad.code == 1);
  CHECK(bad.err.find("error:") == 0);
}

TEST_CASE("ingest names the offending line") {
  const auto dir = scratch("ingest");
  spit(dir / "bad.jsonl",
       "{\"stream_id\": \"u\", \"seq\": 0, \"timestamp_ms\": 0, \"query\": \"a\", \"response\": \"b\"}\n"
       "{\"stream_id\": \"u\", \"seq\": 2, \"timestamp_ms\": 2, \"query\": \"c\", \"response\": \"d\"}\n");
  const auto r = invoke({"ingest", "--format", "jsonl", (dir / "bad.jsonl").string()});
  CHECK(r.code == 1);
  CHECK(r.err.find("line 2") != std::string::npos);
  CHECK(invoke({"ingest", (dir / "missing.jsonl").string()}).code == 1);
}

TEST_CASE("reports stay off standard output unless asked") {
  const auto dir = scratch("quiet");
  const auto r = invoke({"probcheck", "bell", "--p-ab", "0.2", "--p-bc", "0.2", "--p-ac", "0.2", "--report",
                         (dir / "r.json").string()});
  CHECK(r.code == 0);
  CHECK(r.out.empty());
  const auto j = nlohmann::json::parse(slurp(dir / "r.json"));
  for (const char* key : {"schema", "command", "inputs", "outputs", "checks", "timing"}) CHECK(j.contains(key));
}

TEST_CASE("failed runs leave no output files") {
  const auto dir = scratch("partial");
  spit(dir / "bad.json", R"({"seed": 1, "embed": {"n": 0}})");
  const auto r = invoke({"pipeline", (dir / "bad.json").string(), "--report", (dir / "r.json").string(),
                         "--embedding-out", (dir / "e.csv").string()});
  CHECK(r.code == 1);
  CHECK(r.err.find("ConfigError") != std::string::npos);
  std::size_t files = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir)) ++files;
  CHECK(files == 1);

  // Outputs of a failed command are never written.
  spit(dir / "cyclic.json", R"({"m": 2, "edges": [[0, 1], [1, 0]]})");
  CHECK(invoke({"rota", "template", "--dag", (dir / "cyclic.json").string(), "--out", (dir / "mask.json").string(),
                "--report", (dir / "r.json").string()})
            .code == 1);
  CHECK_FALSE(fs::exists(dir / "mask.json"));
  CHECK_FALSE(fs::exists(dir / "r.json"));
}

TEST_CASE("atomic writes replace the target and clean up") {
  const auto dir = scratch("atomic");
  const auto target = (dir / "f.txt").string();
  cli::write_file_atomic(target, "one");
  cli::write_file_atomic(target, "two");
  CHECK(slurp(target) == "two");
  std::size_t files = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir)) ++files;
  CHECK(files == 1);
  CHECK_THROWS(cli::write_file_atomic((dir / "no" / "such" / "dir.txt").string(), "x"));
}

TEST_CASE("seeded reruns are byte-identical") {
  const auto a = run_chain(scratch("chain-a"), false);
  const auto b = run_chain(scratch("chain-b"), false);
  CHECK(a.failures.empty());
  for (const auto& f : a.failures) MESSAGE("failed: " << f);
  REQUIRE(a.files.size() == b.files.size());
  for (const auto& [name, text] : a.files) {
    INFO(name);
    CHECK(b.files.at(name) == text);
  }
}
