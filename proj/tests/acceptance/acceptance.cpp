// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>

#include "../support/chain.hpp"
#include "rforge/automaton.hpp"
#include "rforge/geodesic.hpp"
#include "rforge/melucci.hpp"
#include "rforge/pipeline.hpp"
#include "rforge/probcheck.hpp"
#include "rforge/random.hpp"
#include "rforge/rota.hpp"

using namespace rforge;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
  double seconds = -1.0;  // overrides the wall time when the budget covers only part of the run
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double a : v) x(i++) = a;
  return x;
}

// ---------------------------------------------------------------------------

Outcome bell() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = probcheck::bell_sum(0.25, 0.25, 0.25);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  // The report verdict comes from the command line front end, outside the budget.
  const auto rep = testing::invoke({"probcheck", "bell", "--p-ab", "0.25", "--p-bc", "0.25", "--p-ac", "0.25", "--stdout"});
  const auto verdict = rep.code == 0 ? nlohmann::json::parse(rep.out)["outputs"]["verdict"].get<std::string>() : "";
  return {r.sum == 0.75 && !r.classical_consistent && verdict == "violated",
          "sum " + fmt("%.17g", r.sum) + ", verdict " + verdict + " (exact)", secs};
}

Outcome accardi_fedullo() {
  Rng rng(2024);
  int compared = 0, disagreements = 0;
  double worst_witness = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const probcheck::DichotomicTriple t{rng.uniform(), rng.uniform(), rng.uniform()};
    const double band = std::min(std::abs(t.r - std::abs(t.p + t.q - 1.0)), std::abs(t.r - (1.0 - std::abs(t.p - t.q))));
    if (band < 1e-9) continue;
    ++compared;
    const auto f = probcheck::family_from_triple(t);
    const auto lp = probcheck::kolmogorov_feasible(f);
    if (lp.feasible != probcheck::accardi_fedullo_classical(t)) ++disagreements;
    if (lp.witness) worst_witness = std::max(worst_witness, probcheck::witness_violation(f, *lp.witness));
  }
  return {disagreements == 0 && compared > 990 && worst_witness < 1e-9,
          std::to_string(disagreements) + " disagreements on " + std::to_string(compared) +
              " triples (band 1e-9), witness residual " + fmt("%.1e", worst_witness)};
}

Outcome classical_invariant() {
  Rng rng(99);
  double worst = 0.0;
  int nonclassical = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    probcheck::MelucciStats s;
    s.pR = rng.uniform();
    s.pX_given_R = rng.uniform();
    do s.pX_given_notR = rng.uniform();
    while (std::abs(s.pX_given_R - s.pX_given_notR) < 1e-3);
    s.pX = s.pX_given_R * s.pR + s.pX_given_notR * (1.0 - s.pR);
    const double A = probcheck::accardi_invariant(s);
    worst = std::max(worst, std::abs(A - s.pR));
    if (probcheck::classify_accardi(A) != probcheck::Verdict::classical) ++nonclassical;
  }
  return {worst < 1e-12 && nonclassical == 0,
          "max |A - P(R)| " + fmt("%.1e", worst) + " (tol 1e-12), " + std::to_string(nonclassical) + " nonclassical"};
}

melucci::Estimate melucci_run(const melucci::SourceConfig& cfg) {
  using melucci::Mode;
  return melucci::accardi_estimate(melucci::estimate_stats(melucci::run_experiment(cfg, Mode::filter_R),
                                                           melucci::run_experiment(cfg, Mode::filter_notR),
                                                           melucci::run_experiment(cfg, Mode::no_filter)));
}

Outcome melucci_sim() {
  int covered = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    melucci::SourceConfig cfg;
    cfg.N = 100000;
    cfg.seed = seed;
    const auto A = melucci_run(cfg);
    if (std::abs(A.value - cfg.pR) <= 3.0 * A.se) ++covered;
  }
  melucci::SourceConfig interf;
  interf.delta = 0.4;
  const auto A = melucci_run(interf);
  const bool near = std::abs(A.value - 7.0 / 6.0) <= 3.0 * A.se;
  const bool flagged = probcheck::classify_accardi(A.value, 3.0 * A.se) == probcheck::Verdict::nonclassical;
  return {covered >= 198 && near && flagged,
          "coverage " + std::to_string(covered) + "/200 (need 198); delta 0.4: A " + fmt("%.4f", A.value) + " +- " +
              fmt("%.4f", A.se) + (flagged ? " nonclassical" : " classical")};
}

Outcome pipeline_round_trip() {
  const auto r = pipeline::run_pipeline(pipeline::planted_preset(0));
  const double stress = r.embedding.final_stress;
  const double rms = r.procrustes_rms.value_or(INFINITY), diam = r.latent_diameter.value_or(0.0);
  const double ratio = r.mean_error / r.mean_step;
  return {stress < 0.05 && rms < 0.1 * diam && ratio < 0.2,
          "seed 0: stress " + fmt("%.2e", stress) + " (< 0.05), rms/diameter " + fmt("%.4f", rms / diam) +
              " (< 0.1), error/step " + fmt("%.4f", ratio) + " (< 0.2)"};
}

// Seeds beyond the pinned one, reported but not scored.
std::string pipeline_sweep() {
  std::ostringstream s;
  int ok = 0;
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    const auto r = pipeline::run_pipeline(pipeline::planted_preset(seed));
    const double ratio = r.mean_error / r.mean_step;
    if (r.embedding.final_stress < 0.05 && *r.procrustes_rms < 0.1 * *r.latent_diameter && ratio < 0.2) ++ok;
    s << (seed ? " " : "") << fmt("%.3f", ratio);
  }
  return std::to_string(ok) + "/12 seeds meet all bounds; error/step " + s.str();
}

Outcome geodesic_numerics() {
  using namespace geodesic;
  const auto grid = [](const Eigen::VectorXd& lo, double h, std::size_t nodes, const MetricField::TensorFn& fn) {
    return MetricField::from_function(lo, Eigen::VectorXd::Constant(lo.size(), h),
                                      std::vector<std::size_t>(static_cast<std::size_t>(lo.size()), nodes), fn, 1e-9);
  };

  const auto flat = grid(Eigen::VectorXd::Constant(3, -10.0), 2.0, 11, [](const Eigen::VectorXd&) {
    return Eigen::MatrixXd::Identity(3, 3);
  });
  Rng rng(12);
  double straight = 0.0;
  for (int t = 0; t < 20; ++t) {
    const Eigen::VectorXd x0 = vec({rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3)});
    const Eigen::VectorXd v0 = vec({rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)});
    const auto path = integrate_geodesic(flat, x0, v0, 100, 0.05);
    for (std::size_t i = 0; i < path.samples.size(); ++i)
      straight = std::max(straight, (path.samples[i].position - (x0 + 0.05 * static_cast<double>(i) * v0)).norm());
  }

  // g = exp(2 phi) I, phi = a.x + b|x|^2/2.
  const auto conformal = [](Eigen::VectorXd a, double b) {
    return [a, b](const Eigen::VectorXd& x) {
      return std::exp(2.0 * (a.dot(x) + 0.5 * b * x.squaredNorm())) * Eigen::MatrixXd::Identity(x.size(), x.size());
    };
  };
  const auto fine = grid(Eigen::VectorXd::Constant(2, -3.0), 1.0 / 64.0, 385, conformal(vec({0.15, -0.1}), 0.05));
  const auto path = integrate_geodesic(fine, vec({-1.0, -0.5}), vec({0.6, 0.4}), 1000, 0.003);
  const double e0 = geodesic_energy(fine, path.samples.front());
  double drift = 0.0;
  for (const auto& s : path.samples) drift = std::max(drift, std::abs(geodesic_energy(fine, s) - e0) / e0);

  const Eigen::VectorXd a = vec({0.3, -0.2});
  const double b = 0.4;
  const Eigen::VectorXd x = vec({0.5, 0.25});
  const Eigen::VectorXd p = a + b * x;
  std::vector<double> errs;
  for (int level = 0; level < 4; ++level) {
    const double h = 0.25 / std::pow(2.0, level);
    const auto f = grid(Eigen::VectorXd::Constant(2, -2.0), h, static_cast<std::size_t>(std::lround(4.0 / h)) + 1,
                        conformal(a, b));
    const auto G = christoffel(f, x);
    double err = 0.0;
    for (std::size_t k = 0; k < 2; ++k)
      for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j) {
          const auto K = static_cast<Eigen::Index>(k), I = static_cast<Eigen::Index>(i), J = static_cast<Eigen::Index>(j);
          const double exact = (k == i ? p(J) : 0.0) + (k == j ? p(I) : 0.0) - (i == j ? p(K) : 0.0);
          err = std::max(err, std::abs(G(k, i, j) - exact));
        }
    errs.push_back(err);
  }
  bool ratios_ok = true;
  std::string ratios;
  for (std::size_t i = 1; i < errs.size(); ++i) {
    const double q = errs[i - 1] / errs[i];
    ratios_ok = ratios_ok && q > 3.5 && q < 4.5;
    ratios += (i > 1 ? " " : "") + fmt("%.2f", q);
  }
  return {straight < 1e-9 && !path.truncated && drift < 1e-4 && ratios_ok,
          "straightness " + fmt("%.1e", straight) + " (< 1e-9), energy drift " + fmt("%.1e", drift) +
              " (< 1e-4), christoffel ratios " + ratios + " (in 3.5..4.5)"};
}

std::set<automaton::StateSet> named(const automaton::MooreAutomaton& m, const std::vector<std::vector<std::string>>& names) {
  std::set<automaton::StateSet> out;
  for (const auto& n : names) {
    automaton::StateSet s;
    for (const auto& x : n) s.push_back(m.state_index(x));
    std::sort(s.begin(), s.end());
    out.insert(s);
  }
  return out;
}

// Unions of experiment cells over all words up to `len`, by direct simulation.
std::set<automaton::StateSet> enumerate_cells(const automaton::MooreAutomaton& m, std::size_t len) {
  std::set<automaton::StateSet> out{{}, m.ensemble()};
  std::vector<automaton::Word> frontier{{}}, words{{}};
  for (std::size_t l = 0; l < len; ++l) {
    std::vector<automaton::Word> next;
    for (const auto& w : frontier)
      for (std::size_t x = 0; x < m.inputs().size(); ++x) {
        auto v = w;
        v.push_back(x);
        next.push_back(v);
      }
    words.insert(words.end(), next.begin(), next.end());
    frontier = next;
  }
  for (const auto& w : words) {
    std::map<std::vector<std::size_t>, automaton::StateSet> groups;
    for (auto s0 : m.ensemble()) {
      std::vector<std::size_t> outs{m.output(s0)};
      auto s = s0;
      for (auto x : w) outs.push_back(m.output(s = m.next(s, x)));
      groups[outs].push_back(s0);
    }
    std::vector<automaton::StateSet> cells;
    for (auto& [k, c] : groups) cells.push_back(c);
    for (std::size_t mask = 1; mask < (std::size_t{1} << cells.size()); ++mask) {
      automaton::StateSet u;
      for (std::size_t c = 0; c < cells.size(); ++c)
        if (mask >> c & 1U) u.insert(u.end(), cells[c].begin(), cells[c].end());
      std::sort(u.begin(), u.end());
      out.insert(u);
    }
  }
  return out;
}

Outcome automaton_logic() {
  using namespace automaton;
  const auto h = hit_detector();
  const auto all = property_logic(h, 1, LogicMode::all_cells);
  const std::set<StateSet> got(all.elements.begin(), all.elements.end());
  const bool all_ok = all.elements.size() == 10 && got == enumerate_cells(h, 1);

  const auto f = finkelstein();
  const std::size_t hit = f.output_index("hit");
  const OutputPredicate no_hit = [hit](const std::vector<std::size_t>& outs) {
    return std::find(outs.begin(), outs.end(), hit) == outs.end();
  };
  const auto d = property_logic(f, 1, LogicMode::designated, no_hit);
  const std::set<StateSet> lattice(d.elements.begin(), d.elements.end());
  const bool designated_ok =
      d.elements.size() == 6 &&
      lattice == named(f, {{}, {"2", "3", "4"}, {"1", "3", "4"}, {"1", "2", "4"}, {"1", "2", "3"}, {"1", "2", "3", "4"}});
  return {all_ok && designated_ok, "hit detector all_cells " + std::to_string(all.elements.size()) +
                                       " elements (enumeration " + (all_ok ? "agrees" : "differs") +
                                       "), finkelstein designated " + std::to_string(d.elements.size()) +
                                       " elements (" + (designated_ok ? "exact" : "mismatch") + ")"};
}

Outcome rota_round_trip() {
  using namespace rota;
  const bool example = template_matrix(Dag(2, {{0, 1}})).rows() == std::vector<std::string>{"**", "0*"};
  std::size_t checked = 0, failures = 0;
  for (std::size_t m = 1; m <= 5; ++m) {
    const std::size_t pairs = m * (m - 1);
    std::vector<std::pair<std::size_t, std::size_t>> all;
    for (std::size_t j = 0; j < m; ++j)
      for (std::size_t k = 0; k < m; ++k)
        if (j != k) all.emplace_back(j, k);
    for (std::size_t mask = 0; mask < (std::size_t{1} << pairs); ++mask) {
      EdgeList edges;
      for (std::size_t i = 0; i < pairs; ++i)
        if (mask >> i & 1U) edges.push_back(all[i]);
      TemplateMatrix t(m);
      for (std::size_t j = 0; j < m; ++j) t.set(j, j);
      for (const auto& [j, k] : edges) t.set(j, k);
      // Only transitively closed DAG templates; cycles show up as symmetric pairs.
      if (!is_closed_algebra(t)) continue;
      bool acyclic = true;
      for (const auto& [j, k] : edges) acyclic = acyclic && !t(k, j);
      if (!acyclic) continue;
      ++checked;
      const auto s = spatialize(template_basis(t));
      if (!s.dag || !(algebra_closure(template_matrix(*s.dag)) == t)) ++failures;
    }
  }
  // Labelled partial orders on 1..5 points: 1 + 3 + 19 + 219 + 4231.
  return {example && failures == 0 && checked == 4473,
          std::to_string(checked) + " closed DAG templates, " + std::to_string(failures) + " failures; 2-vertex mask " +
              (example ? "[[*,*],[0,*]]" : "wrong")};
}

Outcome determinism() {
  namespace fs = std::filesystem;
  const auto base = fs::temp_directory_path() / "rforge-acceptance";
  fs::remove_all(base);
  const auto a = testing::run_chain(base / "a", true);
  const auto b = testing::run_chain(base / "b", true);
  std::size_t differing = 0;
  for (const auto& [name, text] : a.files) {
    const auto it = b.files.find(name);
    if (it == b.files.end() || it->second != text) ++differing;
  }
  fs::remove_all(base);
  return {a.failures.empty() && b.failures.empty() && differing == 0 && a.files.size() == b.files.size(),
          std::to_string(a.files.size()) + " files from " + std::to_string(a.commands) + " seeded commands, " +
              std::to_string(differing) + " differ" + (a.failures.empty() ? "" : ", failed: " + a.failures.front())};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double budget_s;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "bell violation", 0.001, bell},
      {2, "closed form vs LP", 5, accardi_fedullo},
      {3, "classical invariant", 1, classical_invariant},
      {4, "two-slit simulator", 60, melucci_sim},
      {5, "pipeline round trip", 120, pipeline_round_trip},
      {6, "geodesic numerics", 30, geodesic_numerics},
      {7, "automaton logic", 1, automaton_logic},
      {8, "rota round trip", 60, rota_round_trip},
      {9, "determinism", 120, determinism},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs =
        o.seconds >= 0.0 ? o.seconds : std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs <= c.budget_s;
    const bool pass = o.pass && in_time;
    if (!pass) ++failed;
    std::printf("%s %d %-20s %s [%.6fs, budget %gs%s]\n", pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs,
                c.budget_s, in_time ? "" : ", over budget");
    std::fflush(stdout);
  }
  const auto t0 = std::chrono::steady_clock::now();
  const auto sweep = pipeline_sweep();
  std::printf("INFO 5 %-20s %s [%.1fs]\n", "seed sweep", sweep.c_str(),
              std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  return failed == 0 ? 0 : 1;
}
