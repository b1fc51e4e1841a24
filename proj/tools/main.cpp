// modplan: command-line front end for minimum-obstacle-displacement planning.

#include "modplan/generators.hpp"
#include "modplan/io.hpp"
#include "modplan/run.hpp"
#include "modplan/slicing.hpp"
#include "modplan/svg.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <map>
#include <memory>

namespace {

using namespace modplan;

struct SolverFlags {
  long node_limit = 2'000'000;
  double time_limit = 0.0;
  double gap_limit = 0.0;
  double big_m = 0.0;
  std::string terminal;
  BranchingRule branching = BranchingRule::GroupSide;
  int workers = 1;
  bool deterministic = false;
  std::string node_log;
};

void add_solver_flags(CLI::App* app, SolverFlags& f) {
  const std::map<std::string, BranchingRule> rules{{"most-fractional", BranchingRule::MostFractional},
                                                   {"group-side", BranchingRule::GroupSide}};
  app->add_option("--node-limit", f.node_limit, "Branch-and-bound node limit per slice")->check(CLI::PositiveNumber);
  app->add_option("--time-limit", f.time_limit, "Wall-clock limit per slice in seconds")->check(CLI::PositiveNumber);
  app->add_option("--gap-limit", f.gap_limit, "Stop once the relative gap falls below this")
      ->check(CLI::PositiveNumber);
  app->add_option("--big-m", f.big_m, "Override the big-M constant")->check(CLI::PositiveNumber);
  app->add_option("--terminal", f.terminal, "Override the terminal mode")->check(CLI::IsMember({"soft", "hard"}));
  app->add_option("--branching", f.branching, "Branching rule")
      ->transform(CLI::CheckedTransformer(rules, CLI::ignore_case))
      ->default_str("group-side");
  app->add_option("--workers", f.workers, "Branch-and-bound worker threads")->check(CLI::PositiveNumber);
  app->add_flag("--deterministic", f.deterministic, "Single worker, reproducible node order");
  app->add_option("--node-log", f.node_log, "Write one line per branch-and-bound node to this file");
}

BnbConfig config_from(const SolverFlags& f, std::ostream* log) {
  BnbConfig c;
  c.node_limit = f.node_limit;
  if (f.time_limit > 0.0) c.time_limit = f.time_limit;
  if (f.gap_limit > 0.0) c.gap_limit = f.gap_limit;
  c.branching = f.branching;
  c.workers = f.workers;
  c.deterministic = f.deterministic || f.workers == 1;
  c.node_log = log;
  return c;
}

void apply_overrides(Scenario& s, const SolverFlags& f) {
  if (f.big_m > 0.0) s.big_m = f.big_m;
  if (!f.terminal.empty()) s.terminal = terminal_mode_from_string(f.terminal);
}

std::unique_ptr<std::ofstream> open_log(const SolverFlags& f) {
  if (f.node_log.empty()) return nullptr;
  auto os = std::make_unique<std::ofstream>(f.node_log);
  if (!*os) throw std::runtime_error("cannot open " + f.node_log);
  return os;
}

std::vector<int> parse_m_list(const std::string& text) {
  std::vector<int> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t next = text.find(',', pos);
    const std::string item = text.substr(pos, next == std::string::npos ? std::string::npos : next - pos);
    std::size_t used = 0;
    const int m = std::stoi(item, &used);
    if (used != item.size() || m < 1) throw CLI::ValidationError("--m-list", "expected positive integers, got '" + item + "'");
    out.push_back(m);
    if (next == std::string::npos) break;
    pos = next + 1;
  }
  return out;
}

void print_summary(const Solution& sol) {
  std::cout << "status " << sol.solver.status << "  nodes " << sol.solver.nodes << "  J " << sol.cost.total
            << "  J_r " << sol.cost.robot << "  J_o " << sol.cost.obstacle << "  wall " << sol.solver.wall_seconds
            << " s\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Minimum-obstacle-displacement trajectory planner"};
  app.require_subcommand(1);

  // solve
  auto* solve = app.add_subcommand("solve", "Solve one scenario, optionally sliced");
  std::string solve_in, solve_out, solve_svg;
  int solve_m = 1;
  bool solve_no_timing = false;
  SolverFlags solve_flags;
  solve->add_option("scenario", solve_in, "Scenario JSON")->required()->check(CLI::ExistingFile);
  solve->add_option("-m,--slices", solve_m, "Number of horizon slices")->check(CLI::PositiveNumber);
  solve->add_option("-o,--output", solve_out, "Solution JSON path");
  solve->add_option("--svg", solve_svg, "Also render the solution to this SVG");
  solve->add_flag("--no-timing", solve_no_timing, "Omit timings from the solution file");
  add_solver_flags(solve, solve_flags);

  // generate
  auto* gen = app.add_subcommand("generate", "Write a generated benchmark scenario");
  GeneratorParams gp;
  std::string gen_family = "square", gen_model = "first-order", gen_terminal = "soft", gen_weights = "default",
              gen_out, gen_name;
  double gen_max_control = 0.0, gen_max_speed = 0.0;
  gen->add_option("--family", gen_family, "square, corridor or random")
      ->check(CLI::IsMember({"square", "corridor", "random"}));
  gen->add_option("-n,--obstacles", gp.obstacles, "Obstacle count")->check(CLI::NonNegativeNumber);
  gen->add_option("--seed", gp.seed, "Random seed");
  gen->add_option("--width", gp.width, "Obstacle field width [m]")->check(CLI::PositiveNumber);
  gen->add_option("--height", gp.height, "Obstacle field height [m]")->check(CLI::PositiveNumber);
  gen->add_option("--obstacle-radius", gp.obstacle_radius, "Obstacle radius [m]")->check(CLI::PositiveNumber);
  gen->add_option("--robot-radius", gp.robot_radius, "Robot radius [m]")->check(CLI::PositiveNumber);
  gen->add_option("--jitter", gp.jitter, "Grid position jitter [m]")->check(CLI::NonNegativeNumber);
  gen->add_option("-T,--horizon", gp.horizon, "Number of states")->check(CLI::Range(2, 100000));
  gen->add_option("--tau", gp.tau, "Time step [s]")->check(CLI::PositiveNumber);
  gen->add_option("--model", gen_model, "Robot model")->check(CLI::IsMember({"first-order", "double-integrator"}));
  gen->add_option("--terminal", gen_terminal, "Terminal mode")->check(CLI::IsMember({"soft", "hard"}));
  gen->add_option("--weights", gen_weights, "Weight preset")->check(CLI::IsMember({"default", "light", "heavy"}));
  gen->add_option("--max-control", gen_max_control, "Per-axis robot control bound")->check(CLI::PositiveNumber);
  gen->add_option("--max-obstacle-speed", gen_max_speed, "Per-axis obstacle speed bound")
      ->check(CLI::PositiveNumber);
  gen->add_option("--name", gen_name, "Scenario name");
  gen->add_option("-o,--output", gen_out, "Scenario JSON path")->required();

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Solve one scenario for several slice counts");
  std::string sweep_in, sweep_mlist = "1,2,3,4", sweep_dir = "results", sweep_csv;
  bool sweep_reference = false, sweep_svg = false, sweep_no_timing = false;
  SolverFlags sweep_flags;
  sweep->add_option("scenario", sweep_in, "Scenario JSON")->required()->check(CLI::ExistingFile);
  sweep->add_option("--m-list", sweep_mlist, "Comma-separated slice counts");
  sweep->add_flag("--reference", sweep_reference, "Also solve m=1 and report epsilon against it");
  sweep->add_option("--output-dir", sweep_dir, "Directory for solution files and the report");
  sweep->add_option("--csv", sweep_csv, "Report CSV path (default <output-dir>/report.csv)");
  sweep->add_flag("--svg", sweep_svg, "Render every solution to SVG");
  sweep->add_flag("--no-timing", sweep_no_timing, "Omit timings from solution files");
  add_solver_flags(sweep, sweep_flags);

  // render
  auto* render = app.add_subcommand("render", "Render a solution to SVG");
  std::string render_scenario, render_solution, render_out;
  render->add_option("scenario", render_scenario, "Scenario JSON")->required()->check(CLI::ExistingFile);
  render->add_option("solution", render_solution, "Solution JSON")->required()->check(CLI::ExistingFile);
  render->add_option("-o,--output", render_out, "SVG path")->required();

  // validate
  auto* val = app.add_subcommand("validate", "Check a scenario file, and optionally a solution against it");
  std::string val_scenario, val_solution;
  val->add_option("scenario", val_scenario, "Scenario JSON")->required()->check(CLI::ExistingFile);
  val->add_option("--solution", val_solution, "Solution JSON to check for feasibility")->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*solve) {
      Scenario s = load_scenario(solve_in);
      apply_overrides(s, solve_flags);
      auto log = open_log(solve_flags);
      const SlicedResult res = solve_sliced(s, solve_m, config_from(solve_flags, log.get()));
      print_summary(res.solution);
      if (!solve_out.empty()) save_solution(res.solution, solve_out, SolutionWriteOptions{!solve_no_timing});
      if (!solve_svg.empty()) write_svg(s, res.solution, solve_svg);
      return 0;
    }
    if (*gen) {
      gp.family = family_from_string(gen_family);
      gp.model = robot_model_from_string(gen_model);
      gp.terminal = terminal_mode_from_string(gen_terminal);
      gp.weights = weight_preset_from_string(gen_weights);
      if (gen_max_control > 0.0) gp.max_control = gen_max_control;
      if (gen_max_speed > 0.0) gp.max_obstacle_speed = gen_max_speed;
      if (!gen_name.empty()) gp.name = gen_name;
      save_scenario(generate(gp), gen_out);
      return 0;
    }
    if (*sweep) {
      Scenario s = load_scenario(sweep_in);
      apply_overrides(s, sweep_flags);
      auto log = open_log(sweep_flags);
      RunOptions opt;
      opt.m_list = parse_m_list(sweep_mlist);
      opt.config = config_from(sweep_flags, log.get());
      opt.with_reference = sweep_reference;
      opt.output_dir = sweep_dir;
      opt.write_timing = !sweep_no_timing;
      const RunReport report = run(s, opt);
      const std::filesystem::path csv = sweep_csv.empty() ? std::filesystem::path(sweep_dir) / "report.csv" : std::filesystem::path(sweep_csv);
      write_file_atomic(csv, report.to_csv());
      write_file_atomic(std::filesystem::path(sweep_dir) / "report.txt", report.to_text());
      for (const auto& row : report.rows) {
        if (row.gap_report) {
          write_file_atomic(std::filesystem::path(sweep_dir) /
                                (file_stem(s.name) + "_m" + std::to_string(row.m) + "_gap.json"),
                            to_json(*row.gap_report) + "\n");
        }
        if (sweep_svg && row.solution_file) {
          auto svg = *row.solution_file;
          svg.replace_extension(".svg");
          write_svg(s, load_solution(*row.solution_file), svg);
        }
      }
      std::cout << report.to_text();
      return report.failures.empty() ? 0 : 2;
    }
    if (*render) {
      write_svg(load_scenario(render_scenario), load_solution(render_solution), render_out);
      return 0;
    }
    if (*val) {
      const Scenario s = load_scenario(val_scenario);
      std::cout << val_scenario << ": valid scenario '" << s.name << "' (" << to_string(s.model) << ", T="
                << s.horizon << ", " << s.obstacles.size() << " obstacles)\n";
      if (!val_solution.empty()) {
        const ViolationReport rep = check_feasibility(load_solution(val_solution), s);
        if (!rep.empty()) {
          for (const auto& v : rep.violations) std::cout << "  " << to_string(v.family) << ": " << v.amount << "\n";
          std::cout << val_solution << ": infeasible\n";
          return 2;
        }
        std::cout << val_solution << ": feasible\n";
      }
      return 0;
    }
  } catch (const SchemaError& e) {
    std::cerr << "schema error: " << e.what() << "\n";
    return 1;
  } catch (const SliceInfeasibleError& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
