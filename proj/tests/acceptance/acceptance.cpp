// Prints one PASS/FAIL line per acceptance criterion; exits non-zero if any
// criterion fails.

#include "modplan/bnb.hpp"
#include "modplan/generators.hpp"
#include "modplan/io.hpp"
#include "modplan/run.hpp"
#include "modplan/slicing.hpp"
#include "modplan/svg.hpp"

#include "support/oracle.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

using namespace modplan;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances.
constexpr double kOracleRelTol = 1e-6;
constexpr double kUpperBoundTol = 1e-6;
constexpr double kEpsBoundTol = 1e-6;
constexpr double kFeasTol = 1e-6;
constexpr double kDisplacementTol = 0.1;
constexpr double kRotationTol = 1e-6;
constexpr double kEpsNonNegTol = 1e-9;
constexpr double kObstacleCostTol = 1e-9;
constexpr double kFreePathTol = 1e-6;

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

BnbConfig exact_config(BranchingRule rule = BranchingRule::GroupSide) {
  BnbConfig c;
  c.branching = rule;
  c.rel_gap = 1e-9;
  c.abs_gap = 1e-10;
  return c;
}

// Every solution produced anywhere in this run, for criteria 4 and 6.
struct Emitted {
  std::string label;
  Scenario scenario;
  Solution solution;
};
std::vector<Emitted> g_emitted;

void emit(const std::string& label, const Scenario& s, const Solution& sol) { g_emitted.push_back({label, s, sol}); }

double max_angular_velocity(const Solution& sol) {
  double m = 0.0;
  for (const auto& traj : sol.obstacle_velocities)
    for (const auto& v : traj) m = std::max(m, std::abs(v.stheta));
  return m;
}

Outcome criterion1() {
  Outcome out;
  int scenarios = 0;
  double worst = 0.0, worst_admm = 0.0;
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < 24; ++i) {
    const int nobs = 1 + i % 2;
    const int T = 4 + i % 5;
    const Scenario s = oracle::random_scenario(1000 + static_cast<std::uint64_t>(i), T, nobs);
    const auto built = build(s);
    const auto exact = enumerate_oracle(built.problem, 1L << 40);
    if (!exact.feasible()) {
      out.pass = false;
      out.detail = "oracle found no feasible assignment for scenario " + std::to_string(i);
      return out;
    }
    for (auto rule : {BranchingRule::MostFractional, BranchingRule::GroupSide}) {
      BnbConfig c;
      c.branching = rule;
      const auto r = solve_miqp(built.problem, c);
      const double rel = std::abs(r.value - exact.value) / std::max(1.0, std::abs(exact.value));
      worst = std::max(worst, rel);
      if (!(rel <= kOracleRelTol)) out.pass = false;
      if (r.has_incumbent()) emit("c1-" + std::to_string(i), s, extract(r.incumbent, built.layout, s));
    }
    // Independent check of the oracle's leaf: test-side ADMM at its binaries.
    std::vector<std::pair<int, double>> fixed;
    for (int b : built.problem.binaries) fixed.emplace_back(b, std::round(exact.z[b]));
    const auto leaf = oracle::admm(oracle::with_fixed(oracle::DenseQp::from(built.problem.qp), fixed));
    const double rel = std::abs(leaf.value - exact.value) / std::max(1.0, std::abs(exact.value));
    worst_admm = std::max(worst_admm, rel);
    if (!leaf.feasible || !(rel <= kOracleRelTol)) out.pass = false;
    ++scenarios;
  }
  out.detail = std::to_string(scenarios) + " scenarios, max rel diff vs enumeration " + fmt("%.2e", worst) +
               ", enumeration vs test ADMM " + fmt("%.2e", worst_admm) + ", " + fmt("%.1f", seconds_since(t0)) + " s";
  return out;
}

struct CorpusStats {
  int scenarios = 0;
  int pairs = 0;
  double worst_upper = 0.0;       // max of J* - J^s
  double worst_eps_margin = -1e300;  // max of eps - bound
  double max_eps_over_m = 0.0;    // max of eps / m
  int eps_ge_m = 0;
  int eps_over_bound = 0;
  int upper_violations = 0;
  double seconds = 0.0;
};

CorpusStats run_corpus() {
  CorpusStats st;
  const auto t0 = std::chrono::steady_clock::now();
  const BnbConfig config = exact_config();
  for (int i = 0; i < 50; ++i) {
    const int nobs = 1 + i % 4;
    const int T = 8 + (i * 7) % 13;
    const Scenario s = oracle::random_scenario(2000 + static_cast<std::uint64_t>(i), T, nobs);
    const auto full = solve_exact(s, config);
    emit("corpus-" + std::to_string(i) + "-m1", s, full.solution);
    const double J = full.solution.cost.total;
    for (int m : {2, 3}) {
      const auto sliced = solve_sliced(s, m, config);
      emit("corpus-" + std::to_string(i) + "-m" + std::to_string(m), s, sliced.solution);
      const double Js = sliced.solution.cost.total;
      st.worst_upper = std::max(st.worst_upper, J - Js);
      if (!(Js >= J - kUpperBoundTol)) ++st.upper_violations;
      const auto g = gap_analysis(sliced.solution, full.solution, s, sliced.plan);
      if (J > 0.0 && g.epsilon && g.bound) {
        st.worst_eps_margin = std::max(st.worst_eps_margin, *g.epsilon - *g.bound);
        st.max_eps_over_m = std::max(st.max_eps_over_m, *g.epsilon / m);
        if (!(*g.epsilon <= *g.bound + kEpsBoundTol)) ++st.eps_over_bound;
        if (!(*g.epsilon < m)) ++st.eps_ge_m;
      }
      ++st.pairs;
    }
    ++st.scenarios;
  }
  st.seconds = seconds_since(t0);
  return st;
}

Outcome criterion2(const CorpusStats& st) {
  return {st.upper_violations == 0 && st.scenarios >= 50,
          std::to_string(st.scenarios) + " scenarios, " + std::to_string(st.pairs) + " sliced solves, max J*-J^s " +
              fmt("%.2e", st.worst_upper) + ", " + std::to_string(st.upper_violations) + " violations, " +
              fmt("%.1f", st.seconds) + " s"};
}

Outcome criterion3(const CorpusStats& st) {
  return {st.eps_over_bound == 0 && st.eps_ge_m == 0,
          "max eps - m*dmax/J* " + fmt("%.2e", st.worst_eps_margin) + ", max eps/m " + fmt("%.4f", st.max_eps_over_m) +
              ", " + std::to_string(st.eps_over_bound) + " bound and " + std::to_string(st.eps_ge_m) +
              " eps>=m violations"};
}

void double_integrator_solves() {
  for (int i = 0; i < 6; ++i) {
    const Scenario s = oracle::random_scenario(3000 + static_cast<std::uint64_t>(i), 8, 1 + i % 2,
                                               RobotModel::DoubleIntegrator);
    emit("di-" + std::to_string(i) + "-m1", s, solve_exact(s, exact_config()).solution);
    emit("di-" + std::to_string(i) + "-m2", s, solve_sliced(s, 2, exact_config()).solution);
  }
}

Outcome criterion4() {
  Outcome out;
  int failed = 0;
  double worst_clearance = 0.0;
  std::string first;
  for (const auto& e : g_emitted) {
    const auto rep = check_feasibility(e.solution, e.scenario, FeasibilityTolerances{kFeasTol, kFeasTol});
    worst_clearance = std::max(worst_clearance, rep.clearance);
    if (!rep.empty()) {
      if (first.empty()) first = e.label + " (" + to_string(rep.violations.front().family) + ")";
      ++failed;
    }
  }
  out.pass = failed == 0 && !g_emitted.empty();
  out.detail = std::to_string(g_emitted.size()) + " solutions checked, " + std::to_string(failed) +
               " infeasible, max clearance deficit " + fmt("%.2e", worst_clearance);
  if (!first.empty()) out.detail += ", first: " + first;
  return out;
}

Outcome criterion5() {
  const Scenario s = oracle::two_corridor_scenario();
  const auto full = solve_exact(s, exact_config());
  const auto sliced = solve_sliced(s, 2, exact_config());
  emit("fig2-m1", s, full.solution);
  emit("fig2-m2", s, sliced.solution);
  const double d1 = total_displacement_magnitude(full.solution);
  const double d2 = total_displacement_magnitude(sliced.solution);
  return {std::abs(d1 - 3.0) <= kDisplacementTol && std::abs(d2 - 4.0) <= kDisplacementTol,
          "m=1 displacement " + fmt("%.4f", d1) + ", m=2 displacement " + fmt("%.4f", d2)};
}

Outcome criterion6() {
  double worst = 0.0;
  int n = 0;
  for (const auto& e : g_emitted) {
    if (e.label.rfind("corpus-", 0) != 0) continue;
    worst = std::max(worst, max_angular_velocity(e.solution));
    ++n;
  }
  return {n > 0 && worst <= kRotationTol, std::to_string(n) + " corpus solutions, max |s^theta| " + fmt("%.2e", worst)};
}

Outcome criterion7(std::string& table) {
  GeneratorParams p;
  p.family = Family::Square;
  p.obstacles = 9;
  const Scenario s = generate(p);
  RunOptions o;
  o.m_list = {1, 2, 3, 4};
  o.with_reference = true;
  o.config.branching = BranchingRule::GroupSide;
  // Best of three sweeps per m damps scheduler noise.
  std::map<int, double> best;
  RunReport report;
  for (int rep = 0; rep < 3; ++rep) {
    report = run(s, o);
    for (const auto& r : report.rows) {
      auto it = best.find(r.m);
      if (it == best.end() || r.wall_seconds < it->second) best[r.m] = r.wall_seconds;
    }
  }
  table = report.to_text();
  Outcome out;
  out.pass = report.rows.size() == 4 && report.failures.empty();
  std::string times;
  for (int m = 1; m <= 4; ++m) {
    times += (m > 1 ? ", " : "") + std::string("m=") + std::to_string(m) + " " + fmt("%.4f", best[m]) + " s";
    if (m > 1 && !(best[m] < best[m - 1])) out.pass = false;
  }
  double min_eps = 1e300;
  for (const auto& r : report.rows) {
    if (r.m <= 1) continue;
    if (!r.gap) {
      out.pass = false;
      continue;
    }
    min_eps = std::min(min_eps, *r.gap);
    if (!(*r.gap >= -kEpsNonNegTol)) out.pass = false;
  }
  for (int m = 1; m <= 4; ++m) {
    const auto sol = m == 1 ? solve_exact(s, o.config) : solve_sliced(s, m, o.config);
    emit("trend-m" + std::to_string(m), s, sol.solution);
  }
  out.detail = s.name + ": " + times + "; min eps(m>1) " + fmt("%.4f", min_eps);
  return out;
}

Outcome criterion8() {
  Outcome out;
  std::string detail;
  for (auto model : {RobotModel::FirstOrder, RobotModel::DoubleIntegrator}) {
    for (auto terminal : {TerminalMode::Soft, TerminalMode::Hard}) {
      Scenario s;
      s.name = "free";
      s.model = model;
      s.horizon = 9;
      s.tau = 0.4;
      s.terminal = terminal;
      if (model == RobotModel::FirstOrder) {
        s.start = PoseState{0, 0, 0};
        s.goal = PoseState{5, 2, 0.7};
      } else {
        s.start = KinoState{0, 0, 0, 0};
        s.goal = KinoState{5, 2, 0, 0};
        s.state_bounds = Box::unbounded(4);
        s.control_bounds = Box::unbounded(2);
      }
      const auto sol = solve_exact(s, exact_config()).solution;
      emit("free-" + to_string(model) + "-" + to_string(terminal), s, sol);
      const auto ref = oracle::free_path(s);
      const double diff = std::abs(sol.cost.robot - ref.robot_cost);
      const bool ok = sol.cost.obstacle <= kObstacleCostTol && diff <= kFreePathTol * std::max(1.0, ref.robot_cost) &&
                      !ref.states.empty();
      out.pass = out.pass && ok;
      detail += (detail.empty() ? "" : ", ") + to_string(model) + "/" + to_string(terminal) + " |dJ^r| " +
                fmt("%.1e", diff);
    }
  }
  out.detail = detail;
  return out;
}

std::map<std::string, std::string> sweep_outputs(const Scenario& s, const fs::path& dir) {
  fs::remove_all(dir);
  RunOptions o;
  o.m_list = {1, 2, 3};
  o.with_reference = true;
  o.output_dir = dir;
  o.write_timing = false;
  o.config.deterministic = true;
  const auto report = run(s, o);
  std::map<std::string, std::string> files;
  for (const auto& r : report.rows) {
    if (!r.solution_file) continue;
    const Solution sol = load_solution(*r.solution_file);
    emit("determinism-m" + std::to_string(r.m), s, sol);
    const fs::path svg = fs::path(*r.solution_file).replace_extension(".svg");
    write_svg(s, sol, svg);
  }
  for (const auto& e : fs::directory_iterator(dir)) files[e.path().filename().string()] = read_file(e.path());
  return files;
}

Outcome criterion9() {
  GeneratorParams p;
  p.obstacles = 4;
  p.horizon = 10;
  const Scenario s = generate(p);
  const fs::path root = fs::temp_directory_path() / "modplan_acceptance_determinism";
  const auto a = sweep_outputs(s, root / "a");
  const auto b = sweep_outputs(s, root / "b");
  std::size_t bytes = 0;
  for (const auto& [k, v] : a) bytes += v.size();
  const bool same = a == b && a.size() == 6;
  return {same, std::to_string(a.size()) + " files (" + std::to_string(bytes) + " bytes) per sweep, " +
                    (a == b ? "byte-identical" : "DIFFERENT")};
}

}  // namespace

int main() {
  std::vector<std::pair<std::string, Outcome>> lines;
  const auto record = [&](const std::string& name, Outcome o) {
    std::cout << "criterion " << name << ": " << (o.pass ? "PASS" : "FAIL") << "  " << o.detail << std::endl;
    lines.emplace_back(name, std::move(o));
  };
  try {
    record("1 oracle optimality", criterion1());
    const CorpusStats corpus = run_corpus();
    record("2 upper bound", criterion2(corpus));
    record("3 epsilon bound", criterion3(corpus));
    double_integrator_solves();
    Outcome c5 = criterion5();
    std::string table;
    Outcome c7 = criterion7(table);
    Outcome c8 = criterion8();
    Outcome c9 = criterion9();
    record("4 feasibility", criterion4());
    record("5 two-corridor displacement", c5);
    record("6 rotation cost", criterion6());
    record("7 slicing trend", c7);
    std::cout << table;
    record("8 obstacle-free path", c8);
    record("9 determinism", c9);
  } catch (const std::exception& e) {
    std::cout << "acceptance aborted: " << e.what() << std::endl;
    return 1;
  }
  int failed = 0;
  for (const auto& [name, o] : lines) failed += !o.pass;
  std::cout << (lines.size() - static_cast<std::size_t>(failed)) << "/" << lines.size() << " criteria passed"
            << std::endl;
  return failed == 0 ? 0 : 1;
}
