#include "modplan/io.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <system_error>

namespace modplan {

using nlohmann::json;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

[[noreturn]] void schema_fail(const std::string& key, const std::string& what) {
  throw SchemaError("\"" + key + "\": " + what);
}

const json& require(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object()) schema_fail(path, "expected an object");
  const auto it = obj.find(key);
  if (it == obj.end()) schema_fail(path.empty() ? key : path + "." + key, "missing");
  return *it;
}

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

double number(const json& v, const std::string& path) {
  if (!v.is_number()) schema_fail(path, "expected a number");
  return v.get<double>();
}

double positive(const json& v, const std::string& path) {
  const double x = number(v, path);
  if (!(x > 0.0)) schema_fail(path, "must be positive");
  return x;
}

Eigen::VectorXd vector(const json& v, const std::string& path, int dim, bool allow_null, double null_value) {
  if (!v.is_array()) schema_fail(path, "expected an array");
  if (static_cast<int>(v.size()) != dim) schema_fail(path, "expected " + std::to_string(dim) + " entries");
  Eigen::VectorXd out(dim);
  for (int i = 0; i < dim; ++i) {
    const json& e = v[static_cast<std::size_t>(i)];
    const std::string p = path + "[" + std::to_string(i) + "]";
    if (e.is_null() && allow_null) out[i] = null_value;
    else out[i] = number(e, p);
  }
  return out;
}

Box box(const json& v, const std::string& path, int dim) {
  Box b;
  b.lower = vector(require(v, "lower", path), join(path, "lower"), dim, true, -kInf);
  b.upper = vector(require(v, "upper", path), join(path, "upper"), dim, true, kInf);
  return b;
}

json encode(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::isfinite(v[i])) a.push_back(v[i]);
    else a.push_back(nullptr);
  }
  return a;
}

json encode(const Box& b) { return {{"lower", encode(b.lower)}, {"upper", encode(b.upper)}}; }

json parse(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("invalid JSON: ") + e.what());
  }
}

void check_version(const json& doc, int expected) {
  const auto it = doc.find("format_version");
  if (it == doc.end()) schema_fail("format_version", "missing");
  if (!it->is_number_integer() || it->get<int>() != expected) {
    schema_fail("format_version", "unsupported version (expected " + std::to_string(expected) + ")");
  }
}

}  // namespace

std::string to_string(RobotModel model) {
  return model == RobotModel::FirstOrder ? "first-order" : "double-integrator";
}

RobotModel robot_model_from_string(const std::string& text) {
  if (text == "first-order") return RobotModel::FirstOrder;
  if (text == "double-integrator") return RobotModel::DoubleIntegrator;
  throw SchemaError("\"model\": unknown robot model '" + text + "'");
}

std::string to_string(TerminalMode mode) { return mode == TerminalMode::Soft ? "soft" : "hard"; }

TerminalMode terminal_mode_from_string(const std::string& text) {
  if (text == "soft") return TerminalMode::Soft;
  if (text == "hard") return TerminalMode::Hard;
  throw SchemaError("\"terminal\": unknown terminal mode '" + text + "'");
}

Scenario scenario_from_json(const std::string& text) {
  const json doc = parse(text);
  if (!doc.is_object()) throw SchemaError("scenario document must be an object");
  check_version(doc, kScenarioFormatVersion);
  Scenario s;
  if (doc.contains("name")) {
    if (!doc["name"].is_string()) schema_fail("name", "expected a string");
    s.name = doc["name"].get<std::string>();
  }
  const json& model = require(doc, "model", "");
  if (!model.is_string()) schema_fail("model", "expected a string");
  s.model = robot_model_from_string(model.get<std::string>());
  const int dx = state_dim(s.model);
  const int du = control_dim(s.model);
  s.start = robot_state_from(s.model, vector(require(doc, "start", ""), "start", dx, false, 0.0));
  s.goal = robot_state_from(s.model, vector(require(doc, "goal", ""), "goal", dx, false, 0.0));
  s.robot_radius = positive(require(doc, "robot_radius", ""), "robot_radius");
  const json& T = require(doc, "T", "");
  if (!T.is_number_integer() || T.get<long>() < 2) schema_fail("T", "must be an integer >= 2");
  s.horizon = T.get<int>();
  s.tau = positive(require(doc, "tau", ""), "tau");

  s.state_bounds = Box::unbounded(dx);
  s.control_bounds = Box::unbounded(du);
  if (doc.contains("bounds")) {
    const json& b = doc["bounds"];
    if (!b.is_object()) schema_fail("bounds", "expected an object");
    if (b.contains("state")) s.state_bounds = box(b["state"], "bounds.state", dx);
    if (b.contains("control")) s.control_bounds = box(b["control"], "bounds.control", du);
  }
  if (doc.contains("weights")) {
    const json& w = doc["weights"];
    const auto weight = [&](const char* key, double& out) {
      if (!w.contains(key)) return;
      out = number(w[key], std::string("weights.") + key);
      if (out < 0.0) schema_fail(std::string("weights.") + key, "must be non-negative");
    };
    if (!w.is_object()) schema_fail("weights", "expected an object");
    weight("alpha_r", s.weights.alpha_r);
    weight("alpha_o", s.weights.alpha_o);
    weight("alpha_re", s.weights.alpha_re);
  }
  if (doc.contains("terminal")) {
    if (!doc["terminal"].is_string()) schema_fail("terminal", "expected a string");
    s.terminal = terminal_mode_from_string(doc["terminal"].get<std::string>());
  }
  const auto flag = [&](const char* key, bool& out) {
    if (!doc.contains(key)) return;
    if (!doc[key].is_boolean()) schema_fail(key, "expected a boolean");
    out = doc[key].get<bool>();
  };
  flag("heading_in_path_cost", s.heading_in_path_cost);
  flag("collide_terminal", s.collide_terminal);
  if (doc.contains("big_m") && !doc["big_m"].is_null()) s.big_m = positive(doc["big_m"], "big_m");

  const json& obs = require(doc, "obstacles", "");
  if (!obs.is_array()) schema_fail("obstacles", "expected an array");
  for (std::size_t i = 0; i < obs.size(); ++i) {
    const std::string path = "obstacles[" + std::to_string(i) + "]";
    const json& o = obs[i];
    Obstacle ob;
    ob.initial = obstacle_state_from(vector(require(o, "position", path), join(path, "position"), 3, false, 0.0));
    ob.radius = positive(require(o, "radius", path), join(path, "radius"));
    if (o.contains("state_bounds")) ob.state_bounds = box(o["state_bounds"], join(path, "state_bounds"), 3);
    if (o.contains("velocity_bounds")) ob.velocity_bounds = box(o["velocity_bounds"], join(path, "velocity_bounds"), 3);
    s.obstacles.push_back(ob);
  }
  validate(s);
  return s;
}

std::string scenario_to_json(const Scenario& s) {
  json doc;
  doc["format_version"] = kScenarioFormatVersion;
  doc["name"] = s.name;
  doc["model"] = to_string(s.model);
  doc["start"] = encode(to_vector(s.start));
  doc["goal"] = encode(to_vector(s.goal));
  doc["robot_radius"] = s.robot_radius;
  doc["T"] = s.horizon;
  doc["tau"] = s.tau;
  doc["bounds"] = {{"state", encode(s.state_bounds)}, {"control", encode(s.control_bounds)}};
  doc["weights"] = {{"alpha_r", s.weights.alpha_r}, {"alpha_o", s.weights.alpha_o}, {"alpha_re", s.weights.alpha_re}};
  doc["terminal"] = to_string(s.terminal);
  doc["heading_in_path_cost"] = s.heading_in_path_cost;
  doc["collide_terminal"] = s.collide_terminal;
  if (s.big_m) doc["big_m"] = *s.big_m;
  json obs = json::array();
  for (const auto& ob : s.obstacles) {
    obs.push_back({{"position", encode(Eigen::VectorXd(to_vector(ob.initial)))},
                   {"radius", ob.radius},
                   {"state_bounds", encode(ob.state_bounds)},
                   {"velocity_bounds", encode(ob.velocity_bounds)}});
  }
  doc["obstacles"] = obs;
  return doc.dump(2) + "\n";
}

Scenario load_scenario(const std::filesystem::path& path) { return scenario_from_json(read_file(path)); }

void save_scenario(const Scenario& scenario, const std::filesystem::path& path) {
  write_file_atomic(path, scenario_to_json(scenario));
}

std::string solution_to_json(const Solution& sol, const SolutionWriteOptions& options) {
  json doc;
  doc["format_version"] = kSolutionFormatVersion;
  doc["model"] = to_string(sol.model);
  json states = json::array(), controls = json::array();
  for (const auto& x : sol.states) states.push_back(encode(to_vector(x)));
  for (const auto& u : sol.controls) controls.push_back(encode(to_vector(u)));
  doc["states"] = states;
  doc["controls"] = controls;
  json obs = json::array();
  for (int i = 0; i < sol.obstacle_count(); ++i) {
    const auto is = static_cast<std::size_t>(i);
    json os = json::array(), vs = json::array(), bs = json::array();
    for (const auto& o : sol.obstacle_states[is]) os.push_back(encode(Eigen::VectorXd(to_vector(o))));
    for (const auto& v : sol.obstacle_velocities[is]) vs.push_back(encode(Eigen::VectorXd(to_vector(v))));
    if (is < sol.binaries.size()) {
      for (const auto& b : sol.binaries[is]) bs.push_back(b);
    }
    const Displacement d = total_displacement(sol.obstacle_states[is]);
    obs.push_back({{"states", os}, {"velocities", vs}, {"binaries", bs}, {"displacement", {d.dx, d.dy, d.dtheta}}});
  }
  doc["obstacles"] = obs;
  doc["cost"] = {{"J", sol.cost.total}, {"J_r", sol.cost.robot}, {"J_o", sol.cost.obstacle}};
  json solver = {{"status", sol.solver.status}, {"nodes", sol.solver.nodes}};
  if (options.include_timing) {
    solver["wall_seconds"] = sol.solver.wall_seconds;
    solver["cpu_seconds"] = sol.solver.cpu_seconds;
  }
  doc["solver"] = solver;
  return doc.dump(2) + "\n";
}

Solution solution_from_json(const std::string& text) {
  const json doc = parse(text);
  if (!doc.is_object()) throw SchemaError("solution document must be an object");
  check_version(doc, kSolutionFormatVersion);
  Solution sol;
  const json& model = require(doc, "model", "");
  if (!model.is_string()) schema_fail("model", "expected a string");
  sol.model = robot_model_from_string(model.get<std::string>());
  const int dx = state_dim(sol.model);
  const int du = control_dim(sol.model);
  const auto list = [](const json& v, const std::string& path) -> const json& {
    if (!v.is_array()) schema_fail(path, "expected an array");
    return v;
  };
  const json& states = list(require(doc, "states", ""), "states");
  for (std::size_t k = 0; k < states.size(); ++k) {
    sol.states.push_back(robot_state_from(sol.model, vector(states[k], "states[" + std::to_string(k) + "]", dx, false, 0.0)));
  }
  const json& controls = list(require(doc, "controls", ""), "controls");
  for (std::size_t k = 0; k < controls.size(); ++k) {
    sol.controls.push_back(
        robot_control_from(sol.model, vector(controls[k], "controls[" + std::to_string(k) + "]", du, false, 0.0)));
  }
  const json& obs = list(require(doc, "obstacles", ""), "obstacles");
  for (std::size_t i = 0; i < obs.size(); ++i) {
    const std::string path = "obstacles[" + std::to_string(i) + "]";
    std::vector<ObstacleState> os;
    std::vector<ObstacleVelocity> vs;
    std::vector<std::array<int, 4>> bs;
    const json& js = list(require(obs[i], "states", path), join(path, "states"));
    for (std::size_t k = 0; k < js.size(); ++k) {
      os.push_back(obstacle_state_from(vector(js[k], join(path, "states"), 3, false, 0.0)));
    }
    const json& jv = list(require(obs[i], "velocities", path), join(path, "velocities"));
    for (std::size_t k = 0; k < jv.size(); ++k) {
      vs.push_back(obstacle_velocity_from(vector(jv[k], join(path, "velocities"), 3, false, 0.0)));
    }
    const json& jb = list(require(obs[i], "binaries", path), join(path, "binaries"));
    for (const auto& b : jb) {
      if (!b.is_array() || b.size() != 4) schema_fail(join(path, "binaries"), "expected 4 entries per step");
      std::array<int, 4> bits{};
      for (std::size_t j = 0; j < 4; ++j) {
        if (!b[j].is_number_integer() || (b[j].get<int>() != 0 && b[j].get<int>() != 1)) {
          schema_fail(join(path, "binaries"), "entries must be 0 or 1");
        }
        bits[j] = b[j].get<int>();
      }
      bs.push_back(bits);
    }
    sol.obstacle_states.push_back(std::move(os));
    sol.obstacle_velocities.push_back(std::move(vs));
    sol.binaries.push_back(std::move(bs));
  }
  const json& cost = require(doc, "cost", "");
  sol.cost.total = number(require(cost, "J", "cost"), "cost.J");
  sol.cost.robot = number(require(cost, "J_r", "cost"), "cost.J_r");
  sol.cost.obstacle = number(require(cost, "J_o", "cost"), "cost.J_o");
  if (doc.contains("solver")) {
    const json& s = doc["solver"];
    if (s.contains("status")) sol.solver.status = s["status"].get<std::string>();
    if (s.contains("nodes")) sol.solver.nodes = s["nodes"].get<long>();
    if (s.contains("wall_seconds")) sol.solver.wall_seconds = s["wall_seconds"].get<double>();
    if (s.contains("cpu_seconds")) sol.solver.cpu_seconds = s["cpu_seconds"].get<double>();
  }
  return sol;
}

Solution load_solution(const std::filesystem::path& path) { return solution_from_json(read_file(path)); }

void save_solution(const Solution& solution, const std::filesystem::path& path,
                   const SolutionWriteOptions& options) {
  write_file_atomic(path, solution_to_json(solution, options));
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << contents;
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw std::runtime_error("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
  }
}

}  // namespace modplan
