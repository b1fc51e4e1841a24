#include "modplan/svg.hpp"

#include "modplan/io.hpp"
#include "modplan/run.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace modplan {

namespace {

std::string num(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  std::string s = buf;
  if (s == "-0.0000") s = "0.0000";
  return s;
}

struct Frame {
  double xmin, xmax, ymin, ymax, scale;
  double X(double x) const { return (x - xmin) * scale; }
  double Y(double y) const { return (ymax - y) * scale; }
  double width() const { return (xmax - xmin) * scale; }
  double height() const { return (ymax - ymin) * scale; }
};

Frame frame_for(const Scenario& sc, const Solution& sol, const SvgOptions& opt) {
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin, ymin = xmin, ymax = -xmin;
  const auto grow = [&](const Eigen::Vector2d& p, double r) {
    xmin = std::min(xmin, p.x() - r);
    xmax = std::max(xmax, p.x() + r);
    ymin = std::min(ymin, p.y() - r);
    ymax = std::max(ymax, p.y() + r);
  };
  grow(position(sc.start), sc.robot_radius);
  grow(position(sc.goal), sc.robot_radius);
  for (const auto& x : sol.states) grow(position(x), sc.robot_radius);
  for (const auto& ob : sc.obstacles) grow(position(ob.initial), ob.radius);
  for (std::size_t i = 0; i < sol.obstacle_states.size(); ++i) {
    for (const auto& o : sol.obstacle_states[i]) grow(position(o), sc.obstacles[i].radius);
  }
  // A finite workspace box replaces the content extent on that axis.
  const Box& b = sc.state_bounds;
  if (std::isfinite(b.lower[0]) && std::isfinite(b.upper[0])) { xmin = b.lower[0]; xmax = b.upper[0]; }
  if (std::isfinite(b.lower[1]) && std::isfinite(b.upper[1])) { ymin = b.lower[1]; ymax = b.upper[1]; }
  return Frame{xmin - opt.margin, xmax + opt.margin, ymin - opt.margin, ymax + opt.margin, opt.pixels_per_metre};
}

void check_pair(const Scenario& sc, const Solution& sol) {
  if (sol.model != sc.model) throw ModelError("solution model does not match the scenario");
  if (sol.states.empty()) throw ModelError("solution has no states");
  if (sol.obstacle_count() != static_cast<int>(sc.obstacles.size())) {
    throw ModelError("solution obstacle count does not match the scenario");
  }
  for (const auto& traj : sol.obstacle_states) {
    if (traj.empty()) throw ModelError("obstacle trajectory is empty");
  }
}

}  // namespace

std::string render_svg(const Scenario& sc, const Solution& sol, const SvgOptions& opt) {
  check_pair(sc, sol);
  const Frame f = frame_for(sc, sol, opt);
  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(f.width()) << "\" height=\"" << num(f.height())
     << "\" viewBox=\"0 0 " << num(f.width()) << " " << num(f.height()) << "\">\n";
  os << "  <title>" << file_stem(sc.name) << "</title>\n";
  os << "  <rect class=\"workspace\" x=\"0.0000\" y=\"0.0000\" width=\"" << num(f.width()) << "\" height=\""
     << num(f.height()) << "\" fill=\"white\" stroke=\"black\" stroke-width=\"1\"/>\n";

  for (std::size_t i = 0; i < sc.obstacles.size(); ++i) {
    const double r = sc.obstacles[i].radius * f.scale;
    const auto p0 = position(sol.obstacle_states[i].front());
    const auto p1 = position(sol.obstacle_states[i].back());
    os << "  <circle class=\"obstacle-initial\" data-index=\"" << i << "\" cx=\"" << num(f.X(p0.x())) << "\" cy=\""
       << num(f.Y(p0.y())) << "\" r=\"" << num(r) << "\" fill=\"none\" stroke=\"gray\" stroke-dasharray=\"4 3\"/>\n";
    os << "  <circle class=\"obstacle-final\" data-index=\"" << i << "\" cx=\"" << num(f.X(p1.x())) << "\" cy=\""
       << num(f.Y(p1.y())) << "\" r=\"" << num(r) << "\" fill=\"cyan\" fill-opacity=\"0.6\" stroke=\"teal\"/>\n";
  }

  for (std::size_t i = 0; i < sc.obstacles.size(); ++i) {
    const auto p0 = position(sol.obstacle_states[i].front());
    const auto p1 = position(sol.obstacle_states[i].back());
    const Eigen::Vector2d d = p1 - p0;
    if (d.norm() < opt.arrow_threshold) continue;
    const Eigen::Vector2d a(f.X(p0.x()), f.Y(p0.y()));
    const Eigen::Vector2d b(f.X(p1.x()), f.Y(p1.y()));
    const Eigen::Vector2d dir = (b - a).normalized();
    const Eigen::Vector2d nrm(-dir.y(), dir.x());
    const double head = std::min(8.0, 0.5 * (b - a).norm());
    const Eigen::Vector2d base = b - head * dir;
    const Eigen::Vector2d l = base + 0.5 * head * nrm, r = base - 0.5 * head * nrm;
    os << "  <g class=\"displacement-arrow\" data-index=\"" << i << "\">\n";
    os << "    <line x1=\"" << num(a.x()) << "\" y1=\"" << num(a.y()) << "\" x2=\"" << num(base.x()) << "\" y2=\""
       << num(base.y()) << "\" stroke=\"teal\" stroke-width=\"2\"/>\n";
    os << "    <polygon points=\"" << num(b.x()) << "," << num(b.y()) << " " << num(l.x()) << "," << num(l.y()) << " "
       << num(r.x()) << "," << num(r.y()) << "\" fill=\"teal\"/>\n";
    os << "  </g>\n";
  }

  for (const auto& x : sol.states) {
    const auto p = position(x);
    os << "  <circle class=\"robot\" cx=\"" << num(f.X(p.x())) << "\" cy=\"" << num(f.Y(p.y())) << "\" r=\""
       << num(sc.robot_radius * f.scale) << "\" fill=\"none\" stroke=\"orange\" stroke-opacity=\"0.4\"/>\n";
  }
  os << "  <polyline class=\"robot-path\" points=\"";
  for (std::size_t k = 0; k < sol.states.size(); ++k) {
    const auto p = position(sol.states[k]);
    os << (k ? " " : "") << num(f.X(p.x())) << "," << num(f.Y(p.y()));
  }
  os << "\" fill=\"none\" stroke=\"orangered\" stroke-width=\"2\"/>\n";

  const auto s = position(sc.start), g = position(sc.goal);
  os << "  <circle class=\"marker-start\" cx=\"" << num(f.X(s.x())) << "\" cy=\"" << num(f.Y(s.y()))
     << "\" r=\"5.0000\" fill=\"green\"/>\n";
  os << "  <circle class=\"marker-goal\" cx=\"" << num(f.X(g.x())) << "\" cy=\"" << num(f.Y(g.y()))
     << "\" r=\"5.0000\" fill=\"red\"/>\n";
  os << "</svg>\n";
  return os.str();
}

void write_svg(const Scenario& scenario, const Solution& solution, const std::filesystem::path& path,
               const SvgOptions& options) {
  write_file_atomic(path, render_svg(scenario, solution, options));
}

}  // namespace modplan
