#pragma once

// Seeded run of every subcommand through dispatch(), used by the determinism
// checks. Each command writes its report and outputs into `dir`.

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rforge/cli.hpp"

namespace rforge::testing {

struct Invocation {
  int code = 0;
  std::string out, err;
};

inline Invocation invoke(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  Invocation r;
  r.code = cli::dispatch(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

inline void spit(const std::filesystem::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

// Report text with the timing block removed.
inline std::string without_timing(const std::string& report) {
  auto j = nlohmann::ordered_json::parse(report);
  j.erase("timing");
  return j.dump(2);
}

struct ChainResult {
  std::size_t commands = 0;
  std::vector<std::string> failures;  // commands that did not exit 0
  std::map<std::string, std::string> files;  // name -> content, reports without timing
};

inline ChainResult run_chain(const std::filesystem::path& dir, bool include_pipeline) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const auto p = [&](const std::string& name) { return (dir / name).string(); };

  spit(p("family.json"), R"({"T": 2, "n": 2, "cond": [[[[1,0],[0,1]], [[0.7,0.3],[0.2,0.8]]], [[[0.35,0.65],[0.1,0.9]], [[1,0],[0,1]]]], "marg": [[0.5,0.5],[0.65,0.35]]})");
  spit(p("dag.json"), R"({"m": 3, "edges": [[0, 1], [1, 2]]})");
  spit(p("weights.json"), "[[1, 0.5, 0], [0, 1, 2], [0, 0, 1]]");
  spit(p("subspace.json"), "[[[1,1,0],[0,1,0],[0,0,1]], [[0,0,0],[0,0,1],[0,0,0]]]");

  std::vector<std::pair<std::string, std::vector<std::string>>> commands = {
      {"synth", {"synth", "--streams", "6", "--length", "8", "--seed", "5", "--out", p("log.jsonl"), "--latent-out",
                 p("latent.csv")}},
      {"ingest", {"ingest", p("log.jsonl"), "--out", p("log.tsv"), "--out-format", "tsv"}},
      {"prespace", {"prespace", "--log", p("log.jsonl"), "--k", "4", "--out", p("skeleton.json")}},
      {"embed", {"embed", "--skeleton", p("skeleton.json"), "--lambda", "0.001", "--restarts", "2", "--seed", "3",
                 "--out", p("emb.csv")}},
      {"geodesic", {"geodesic", "--embedding", p("emb.csv"), "--skeleton", p("skeleton.json"), "--cells", "4",
                    "--metric-out", p("metric.json")}},
      {"predict", {"predict", "--metric", p("metric.json"), "--embedding", p("emb.csv"), "--stream", "0", "--upto", "5"}},
      {"bell", {"probcheck", "bell", "--p-ab", "0.25", "--p-bc", "0.25", "--p-ac", "0.25"}},
      {"accardi", {"probcheck", "accardi", "--p", "0.3", "--q", "0.8", "--r", "0.1"}},
      {"lp", {"probcheck", "lp", "--family", p("family.json"), "--witness-out", p("witness.json")}},
      {"invariant", {"probcheck", "invariant", "--px", "0.5", "--px-r", "0.8", "--px-notr", "0.2", "--pr", "0.5"}},
      {"melucci", {"melucci", "--delta", "0.2", "--N", "5000", "--seed", "9", "--counts-out", p("counts.jsonl")}},
      {"automaton", {"automaton", "logic", "--preset", "finkelstein", "--max-len", "2", "--poset-out", p("poset.json")}},
      {"template", {"rota", "template", "--dag", p("dag.json"), "--out", p("mask.json")}},
      {"propagate", {"rota", "propagate", "--dag", p("dag.json"), "--weights", p("weights.json"), "--signal", "1,2,3",
                     "--layers", "2"}},
      {"spatialize", {"rota", "spatialize", "--subspace", p("subspace.json"), "--out", p("spatial.json")}},
  };
  if (include_pipeline)
    commands.push_back({"pipeline", {"pipeline", "--preset", "planted", "--predictions-out", p("predictions.csv")}});

  ChainResult result;
  result.commands = commands.size();
  for (auto& [name, args] : commands) {
    const auto report = p(name + ".report.json");
    args.push_back("--report");
    args.push_back(report);
    if (invoke(args).code != 0) result.failures.push_back(name);
  }
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    auto text = slurp(entry.path());
    // Reports echo input paths; compare runs from different directories.
    const auto root = dir.string();
    for (auto at = text.find(root); at != std::string::npos; at = text.find(root, at)) text.replace(at, root.size(), "$DIR");
    result.files[name] = name.find(".report.json") != std::string::npos ? without_timing(text) : text;
  }
  return result;
}

}  // namespace rforge::testing
