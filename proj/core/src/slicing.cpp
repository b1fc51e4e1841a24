#include "modplan/slicing.hpp"

#include "modplan/formulation.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <ctime>

namespace modplan {

SlicePlan plan_slices(int horizon, int m, double terminal_weight) {
  if (horizon < 2) throw std::invalid_argument("horizon must be at least 2");
  if (m < 1 || m > horizon - 1) {
    throw std::invalid_argument("slice count m=" + std::to_string(m) + " outside [1, " +
                                std::to_string(horizon - 1) + "]");
  }
  SlicePlan plan;
  plan.horizon = horizon;
  plan.m = m;
  const int q = horizon / m;
  for (int i = 0; i < m; ++i) {
    const int first = i * q + 1;
    const int last = i + 1 == m ? horizon : (i + 1) * q;
    plan.ranges.push_back({first, last});
    plan.terminal_weights.push_back(terminal_weight);
  }
  return plan;
}

namespace {

int severity(BnbStatus s) {
  switch (s) {
    case BnbStatus::Optimal: return 0;
    case BnbStatus::GapLimit: return 1;
    case BnbStatus::NodeLimit: return 2;
    case BnbStatus::TimeLimit: return 3;
    case BnbStatus::Infeasible: return 4;
  }
  return 4;
}

}  // namespace

SlicedResult solve_sliced(const Scenario& scenario, int m, const BnbConfig& config) {
  validate(scenario);
  SlicedResult out;
  out.plan = plan_slices(scenario.horizon, m, scenario.weights.alpha_re);
  const double big_m = scenario.big_m ? *scenario.big_m : (scenario.obstacles.empty() ? 0.0 : default_big_M(scenario));
  const int nobs = static_cast<int>(scenario.obstacles.size());

  Solution& full = out.solution;
  full.model = scenario.model;
  full.obstacle_states.resize(static_cast<std::size_t>(nobs));
  full.obstacle_velocities.resize(static_cast<std::size_t>(nobs));
  full.binaries.resize(static_cast<std::size_t>(nobs));

  RobotState current = scenario.start;
  std::vector<ObstacleState> obstacles;
  for (const auto& ob : scenario.obstacles) obstacles.push_back(ob.initial);

  const auto wall0 = std::chrono::steady_clock::now();
  const std::clock_t cpu0 = std::clock();
  BnbStatus worst = BnbStatus::Optimal;
  long nodes = 0;

  for (int i = 0; i < m; ++i) {
    const bool final_slice = i + 1 == m;
    const SliceRange& r = out.plan.ranges[static_cast<std::size_t>(i)];
    Scenario sub = scenario;
    sub.horizon = final_slice ? r.size() : r.size() + 1;
    sub.start = current;
    for (int o = 0; o < nobs; ++o) sub.obstacles[static_cast<std::size_t>(o)].initial = obstacles[static_cast<std::size_t>(o)];
    sub.weights.alpha_re = out.plan.terminal_weights[static_cast<std::size_t>(i)];
    if (!final_slice) {
      sub.terminal = TerminalMode::Soft;
      sub.collide_terminal = true;
    }

    BuiltProblem built;
    try {
      built = build(sub, BuildOptions{std::nullopt, big_m});
    } catch (const ModelError& e) {
      throw SliceInfeasibleError(i, "slice " + std::to_string(i) + ": " + e.what());
    }
    const BnbResult res = solve_miqp(built.problem, config);
    if (!res.has_incumbent()) {
      throw SliceInfeasibleError(i, "slice " + std::to_string(i) + " has no feasible solution (" +
                                        to_string(res.status) + ")");
    }
    const Solution part = extract(res.incumbent, built.layout, sub, config.integrality_tol);
    out.slices.push_back({res.status, res.nodes, res.wall_seconds, res.value, res.gap});
    if (severity(res.status) > severity(worst)) worst = res.status;
    nodes += res.nodes;

    // Non-final slices hand their last state to the next slice.
    const std::size_t keep = final_slice ? part.states.size() : part.states.size() - 1;
    for (std::size_t k = 0; k < keep; ++k) full.states.push_back(part.states[k]);
    for (const auto& u : part.controls) full.controls.push_back(u);
    for (int o = 0; o < nobs; ++o) {
      const auto os = static_cast<std::size_t>(o);
      for (std::size_t k = 0; k < keep; ++k) full.obstacle_states[os].push_back(part.obstacle_states[os][k]);
      for (const auto& v : part.obstacle_velocities[os]) full.obstacle_velocities[os].push_back(v);
      const std::size_t bits = final_slice ? part.binaries[os].size() : keep;
      for (std::size_t k = 0; k < bits; ++k) full.binaries[os].push_back(part.binaries[os][k]);
      obstacles[os] = part.obstacle_states[os].back();
    }
    current = part.states.back();
  }

  full.cost = evaluate_cost(full, scenario);
  full.solver.status = to_string(worst);
  full.solver.nodes = nodes;
  full.solver.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
  full.solver.cpu_seconds = static_cast<double>(std::clock() - cpu0) / CLOCKS_PER_SEC;
  return out;
}

SlicedResult solve_exact(const Scenario& scenario, const BnbConfig& config) {
  return solve_sliced(scenario, 1, config);
}

GapReport gap_analysis(const Solution& sliced, const std::optional<Solution>& optimal,
                       const Scenario& scenario, const SlicePlan& plan) {
  if (plan.horizon != scenario.horizon || sliced.horizon() != scenario.horizon) {
    throw std::invalid_argument("sliced solution horizon does not match the scenario");
  }
  if (optimal && optimal->horizon() != scenario.horizon) {
    throw std::invalid_argument("optimal solution horizon does not match the scenario");
  }
  const auto per_slice = [&](const Solution& sol) {
    const std::vector<double> c = stage_costs(sol, scenario);
    std::vector<double> sums;
    for (const auto& r : plan.ranges) {
      double s = 0.0;
      for (int k = r.first; k <= r.last; ++k) s += c[static_cast<std::size_t>(k - 1)];
      sums.push_back(s);
    }
    return sums;
  };

  GapReport g;
  g.m = plan.m;
  g.sliced_slice_costs = per_slice(sliced);
  g.sliced_cost = evaluate_cost(sliced, scenario).total;
  if (!optimal) return g;

  g.optimal_cost = evaluate_cost(*optimal, scenario).total;
  g.optimal_slice_costs = per_slice(*optimal);
  double dmax = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < g.sliced_slice_costs.size(); ++i) {
    g.deltas.push_back(g.sliced_slice_costs[i] - g.optimal_slice_costs[i]);
    dmax = std::max(dmax, g.deltas.back());
  }
  g.delta_max = dmax;
  if (*g.optimal_cost > 0.0) {
    g.epsilon = (g.sliced_cost - *g.optimal_cost) / *g.optimal_cost;
    g.bound = plan.m * dmax / *g.optimal_cost;
  }
  return g;
}

std::string to_json(const GapReport& r, int indent) {
  nlohmann::json j;
  j["format_version"] = 1;
  j["m"] = r.m;
  j["J_s"] = r.sliced_cost;
  j["J_s_slices"] = r.sliced_slice_costs;
  if (r.optimal_cost) {
    j["J_star"] = *r.optimal_cost;
    j["J_star_slices"] = r.optimal_slice_costs;
    j["deltas"] = r.deltas;
  }
  if (r.delta_max) j["delta_max"] = *r.delta_max;
  if (r.epsilon) j["epsilon"] = *r.epsilon;
  if (r.bound) j["bound"] = *r.bound;
  return j.dump(indent);
}

}  // namespace modplan
