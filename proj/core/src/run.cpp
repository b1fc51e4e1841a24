#include "modplan/run.hpp"

#include "modplan/io.hpp"
#include "modplan/qp.hpp"

#include <cctype>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

namespace modplan {

const std::vector<std::string>& RunReport::columns() {
  static const std::vector<std::string> cols{"scenario", "model", "m",   "cpu_s", "gap",
                                             "J_r",      "J_o",   "status", "nodes"};
  return cols;
}

namespace {

std::string fmt(double v, const char* spec = "%.6g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::vector<std::string> cells(const RunRow& r) {
  return {r.scenario,
          to_string(r.model),
          std::to_string(r.m),
          fmt(r.cpu_seconds, "%.3f"),
          r.gap ? fmt(*r.gap, "%.4f") : std::string("-"),
          fmt(r.robot_cost, "%.4f"),
          fmt(r.obstacle_cost, "%.4f"),
          r.status,
          std::to_string(r.nodes)};
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string RunReport::to_csv() const {
  std::ostringstream os;
  const auto& cols = columns();
  for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
  os << "\n";
  for (const auto& r : rows) {
    const auto c = cells(r);
    for (std::size_t i = 0; i < c.size(); ++i) os << (i ? "," : "") << csv_field(c[i]);
    os << "\n";
  }
  return os.str();
}

std::string RunReport::to_text() const {
  const std::vector<std::string> head{"Scenario", "Model", "m", "CPU [s]", "Gap/eps", "J^r", "J^o", "Status", "Nodes"};
  std::vector<std::vector<std::string>> table{head};
  for (const auto& r : rows) table.push_back(cells(r));
  std::vector<std::size_t> width(head.size(), 0);
  for (const auto& row : table) {
    for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
  }
  std::ostringstream os;
  for (std::size_t t = 0; t < table.size(); ++t) {
    for (std::size_t i = 0; i < table[t].size(); ++i) {
      const std::string& s = table[t][i];
      // Text columns left-aligned, numbers right-aligned.
      const bool left = i < 2 || i == 7;
      if (i) os << "  ";
      if (left) os << s << std::string(width[i] - s.size(), ' ');
      else os << std::string(width[i] - s.size(), ' ') << s;
    }
    os << "\n";
    if (t == 0) {
      std::size_t total = 0;
      for (auto w : width) total += w;
      os << std::string(total + 2 * (width.size() - 1), '-') << "\n";
    }
  }
  for (const auto& f : failures) os << "m=" << f.m << " failed: " << f.message << "\n";
  return os.str();
}

std::string file_stem(const std::string& name) {
  std::string out;
  for (char c : name) {
    const auto u = static_cast<unsigned char>(c);
    out += (std::isalnum(u) || c == '-' || c == '_' || c == '.') ? c : '_';
  }
  return out.empty() ? std::string("scenario") : out;
}

RunReport run(const Scenario& scenario, const RunOptions& options) {
  RunReport report;
  std::map<int, SlicedResult> results;
  std::set<int> failed;
  const auto attempt = [&](int m) -> const SlicedResult* {
    if (auto it = results.find(m); it != results.end()) return &it->second;
    if (failed.count(m)) return nullptr;
    failed.insert(m);
    try {
      return &results.emplace(m, solve_sliced(scenario, m, options.config)).first->second;
    } catch (const SliceInfeasibleError& e) {
      report.failures.push_back({m, e.what()});
    } catch (const ModelError& e) {
      report.failures.push_back({m, e.what()});
    } catch (const QpError& e) {
      report.failures.push_back({m, e.what()});
    } catch (const std::invalid_argument& e) {
      report.failures.push_back({m, e.what()});
    }
    return nullptr;
  };

  const SlicedResult* reference = options.with_reference ? attempt(1) : nullptr;
  if (options.output_dir) std::filesystem::create_directories(*options.output_dir);

  for (int m : options.m_list) {
    const SlicedResult* res = attempt(m);
    if (!res) continue;
    const Solution& sol = res->solution;
    RunRow row;
    row.scenario = scenario.name;
    row.model = scenario.model;
    row.m = m;
    row.cpu_seconds = sol.solver.cpu_seconds;
    row.wall_seconds = sol.solver.wall_seconds;
    row.robot_cost = sol.cost.robot;
    row.obstacle_cost = sol.cost.obstacle;
    row.total_cost = sol.cost.total;
    row.status = sol.solver.status;
    row.nodes = sol.solver.nodes;
    if (reference) {
      row.gap_report = gap_analysis(sol, reference->solution, scenario, res->plan);
      if (row.gap_report->epsilon) row.gap = *row.gap_report->epsilon;
      else if (reference->solution.cost.total == 0.0 && sol.cost.total == 0.0) row.gap = 0.0;
    } else if (m == 1 && !res->slices.empty()) {
      row.gap = res->slices.front().gap;
    }
    if (options.output_dir) {
      const auto path = *options.output_dir / (file_stem(scenario.name) + "_m" + std::to_string(m) + ".json");
      save_solution(sol, path, SolutionWriteOptions{options.write_timing});
      row.solution_file = path;
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

}  // namespace modplan
