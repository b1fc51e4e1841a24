#include "modplan/bnb.hpp"

#include <algorithm>
#include <chrono>
#include <condition_variable>
#include <map>
#include <mutex>
#include <ostream>
#include <set>
#include <stdexcept>
#include <thread>
#include <vector>

namespace modplan {

namespace {

using Eigen::VectorXd;
using Clock = std::chrono::steady_clock;
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kRowTol = 1e-9;

struct Node {
  Fixings fix;
  double bound = -kInf;
  int depth = 0;
  long id = 0;
};

struct Relaxation {
  bool solved = false;
  bool infeasible = false;
  double value = -kInf;
  VectorXd z;  // polished: binaries moved to 0/1 wherever the rows allow
  std::vector<int> fractional;
};

double frac(double v) { return std::min(v, 1.0 - v); }

class Search {
 public:
  Search(const MiqpProblem& p, const BnbConfig& c) : p_(p), c_(c) {
    const int n = p.qp.num_variables();
    group_of_.assign(static_cast<std::size_t>(n), -1);
    for (std::size_t g = 0; g < p.groups.size(); ++g) {
      for (int j : p.groups[g].binaries) group_of_[static_cast<std::size_t>(j)] = static_cast<int>(g);
    }
    is_binary_.assign(static_cast<std::size_t>(n), 0);
    for (int j : p.binaries) is_binary_[static_cast<std::size_t>(j)] = 1;
    for (std::size_t g = 0; g < p.groups.size(); ++g) {
      for (int j : p.groups[g].binaries) {
        if (!is_binary_[static_cast<std::size_t>(j)]) throw QpError("collision group refers to a non-binary variable");
      }
    }
  }

  BnbResult run() {
    start_ = Clock::now();
    Node root;
    root.id = next_id_++;
    open_.emplace(std::make_pair(root.bound, root.id), root);

    const int workers = c_.deterministic ? 1 : std::max(1, c_.workers);
    if (workers == 1) {
      worker();
    } else {
      std::vector<std::thread> pool;
      for (int w = 0; w < workers; ++w) pool.emplace_back([this] { worker(); });
      for (auto& t : pool) t.join();
    }

    BnbResult r;
    r.nodes = nodes_;
    r.wall_seconds = elapsed();
    r.value = inc_value_;
    r.incumbent = inc_;
    r.lower_bound = open_.empty() ? inc_value_ : std::min(inc_value_, open_.begin()->second.bound);
    if (!stopped_) {
      r.status = std::isfinite(inc_value_) ? BnbStatus::Optimal : BnbStatus::Infeasible;
      if (std::isfinite(inc_value_)) r.lower_bound = inc_value_;
    } else {
      r.status = stop_status_;
    }
    if (std::isfinite(inc_value_)) {
      r.gap = std::max(0.0, (inc_value_ - r.lower_bound) / std::max(std::abs(inc_value_), 1e-10));
      if (inc_value_ == r.lower_bound) r.gap = 0.0;
    }
    return r;
  }

 private:
  double elapsed() const { return std::chrono::duration<double>(Clock::now() - start_).count(); }

  double prune_tol() const { return std::max(c_.abs_gap, c_.rel_gap * std::abs(inc_value_)); }

  double global_lower_bound() const {
    double lb = inc_value_;
    if (!open_.empty()) lb = std::min(lb, open_.begin()->second.bound);
    if (!active_bounds_.empty()) lb = std::min(lb, *active_bounds_.begin());
    return lb;
  }

  void worker() {
    QpSolver solver(c_.qp);
    Node node;
    while (pop(node)) {
      const double bound = node.bound;
      process(node, solver);
      std::lock_guard<std::mutex> lock(mu_);
      active_bounds_.erase(active_bounds_.find(bound));
      cv_.notify_all();
    }
  }

  bool pop(Node& out) {
    std::unique_lock<std::mutex> lock(mu_);
    for (;;) {
      if (stopped_) return false;
      if (nodes_ >= c_.node_limit) return stop(BnbStatus::NodeLimit);
      if (elapsed() > c_.time_limit) return stop(BnbStatus::TimeLimit);
      if (c_.gap_limit && std::isfinite(inc_value_)) {
        const double lb = global_lower_bound();
        if ((inc_value_ - lb) <= *c_.gap_limit * std::max(std::abs(inc_value_), 1e-10) && !open_.empty()) {
          return stop(BnbStatus::GapLimit);
        }
      }
      if (!open_.empty()) {
        auto it = open_.begin();
        const bool dfs = c_.selection == NodeSelection::DepthFirst || open_.size() > c_.memory_threshold;
        if (dfs) {
          it = std::max_element(open_.begin(), open_.end(), [](const auto& a, const auto& b) {
            return std::make_pair(a.second.depth, a.second.id) < std::make_pair(b.second.depth, b.second.id);
          });
        }
        out = std::move(it->second);
        open_.erase(it);
        if (out.bound >= inc_value_ - prune_tol()) continue;
        active_bounds_.insert(out.bound);
        ++nodes_;
        return true;
      }
      if (active_bounds_.empty()) return false;
      cv_.wait(lock);
    }
  }

  bool stop(BnbStatus status) {
    stopped_ = true;
    stop_status_ = status;
    cv_.notify_all();
    return false;
  }

  bool conflicting(const Fixings& fix) const {
    for (const auto& g : p_.groups) {
      int ones = 0;
      for (int j : g.binaries) {
        const auto it = fix.find(j);
        if (it != fix.end() && it->second == 1) ++ones;
      }
      if (ones == 4) return true;
    }
    return false;
  }

  Relaxation relax(const Fixings& fix, QpSolver& solver) const {
    Relaxation r;
    VectorXd lower = p_.qp.lower, upper = p_.qp.upper;
    for (int j : p_.binaries) {
      lower[j] = std::max(lower[j], 0.0);
      upper[j] = std::min(upper[j], 1.0);
    }
    for (const auto& [j, v] : fix) lower[j] = upper[j] = v;
    const QpSolution s = solver.solve_unchecked(p_.qp, lower, upper);
    if (s.status == QpStatus::Infeasible) {
      r.infeasible = true;
      return r;
    }
    if (s.status != QpStatus::Optimal) return r;
    r.solved = true;
    r.value = s.objective;
    r.z = s.z;
    polish(fix, r);
    return r;
  }

  // Binaries carry no cost, so moving them while every row stays satisfied
  // keeps the relaxation optimal.
  void polish(const Fixings& fix, Relaxation& r) const {
    VectorXd& z = r.z;
    const VectorXd act = p_.qp.A * z;
    const auto slack_ok = [&](int row, double activity) {
      return activity <= p_.qp.b[row] + kRowTol * (1.0 + std::abs(p_.qp.b[row]));
    };
    for (const auto& g : p_.groups) {
      std::array<bool, 4> open{};
      int ones = 0;
      std::vector<int> pending;
      for (std::size_t j = 0; j < 4; ++j) {
        const int v = g.binaries[j];
        const auto it = fix.find(v);
        if (it != fix.end()) {
          open[j] = it->second == 0;
          ones += it->second;
          continue;
        }
        // Coefficient of xi in its big-M row is -M.
        const double without = act[g.rows[j]] + p_.big_m * z[v];
        if (slack_ok(g.rows[j], without)) {
          z[v] = 0.0;
          open[j] = true;
        } else {
          pending.push_back(v);
        }
      }
      if (ones + static_cast<int>(pending.size()) <= 3) {
        for (int v : pending) z[v] = 1.0;
      } else {
        for (int v : pending) r.fractional.push_back(v);
      }
    }
    for (int j : p_.binaries) {
      if (group_of_[static_cast<std::size_t>(j)] >= 0 || fix.count(j) > 0) continue;
      if (frac(z[j]) > c_.integrality_tol) r.fractional.push_back(j);
      else z[j] = std::round(z[j]);
    }
    std::sort(r.fractional.begin(), r.fractional.end());
  }

  // Exact QP with every binary pinned to its value in z.
  void try_incumbent(const VectorXd& z, QpSolver& solver) {
    VectorXd lower = p_.qp.lower, upper = p_.qp.upper;
    std::vector<int> bits;
    bits.reserve(p_.binaries.size());
    for (int j : p_.binaries) {
      const double v = std::round(z[j]);
      lower[j] = upper[j] = v;
      bits.push_back(static_cast<int>(v));
    }
    const QpSolution s = solver.solve_unchecked(p_.qp, lower, upper);
    if (s.status != QpStatus::Optimal) return;
    std::lock_guard<std::mutex> lock(mu_);
    const double tie = std::isfinite(inc_value_) ? 1e-12 * (1.0 + std::abs(inc_value_)) : 0.0;
    const bool better = s.objective < inc_value_ - tie;
    const bool tied_smaller = std::abs(s.objective - inc_value_) <= tie && bits < inc_bits_;
    if (better || tied_smaller) {
      inc_value_ = s.objective;
      inc_ = s.z;
      inc_bits_ = std::move(bits);
    }
  }

  // Opens the least-violated side of every undecided group.
  void rounding_heuristic(const Fixings& fix, const Relaxation& r, QpSolver& solver) {
    VectorXd z = r.z;
    const VectorXd act = p_.qp.A * z;
    std::set<int> undecided;
    for (int v : r.fractional) undecided.insert(group_of_[static_cast<std::size_t>(v)]);
    for (int gi : undecided) {
      if (gi < 0) continue;
      const auto& g = p_.groups[static_cast<std::size_t>(gi)];
      int best = -1;
      double best_violation = kInf;
      for (std::size_t j = 0; j < 4; ++j) {
        const auto it = fix.find(g.binaries[j]);
        if (it != fix.end() && it->second == 1) continue;
        const double violation = act[g.rows[j]] + p_.big_m * z[g.binaries[j]] - p_.qp.b[g.rows[j]];
        if (violation < best_violation) {
          best_violation = violation;
          best = static_cast<int>(j);
        }
      }
      for (std::size_t j = 0; j < 4; ++j) {
        const int v = g.binaries[j];
        const auto it = fix.find(v);
        z[v] = it != fix.end() ? it->second : (static_cast<int>(j) == best ? 0.0 : 1.0);
      }
    }
    for (int v : r.fractional) {
      if (group_of_[static_cast<std::size_t>(v)] < 0) z[v] = std::round(z[v]);
    }
    try_incumbent(z, solver);
  }

  std::vector<Node> branch(const Node& node, const Relaxation& r) const {
    int pick = -1;
    double best = -1.0;
    for (int v : r.fractional) {
      const double f = frac(r.z[v]);
      if (f > best) {
        best = f;
        pick = v;
      }
    }
    std::vector<Node> children;
    const auto child = [&](Fixings fix) {
      Node c;
      c.fix = std::move(fix);
      c.bound = node.bound;
      c.depth = node.depth + 1;
      children.push_back(std::move(c));
    };
    const int gi = group_of_[static_cast<std::size_t>(pick)];
    if (c_.branching == BranchingRule::GroupSide && gi >= 0) {
      const auto& g = p_.groups[static_cast<std::size_t>(gi)];
      for (int v : g.binaries) {
        if (node.fix.count(v) > 0) continue;
        Fixings f = node.fix;
        f[v] = 0;
        child(std::move(f));
      }
    } else {
      for (int value : {0, 1}) {
        Fixings f = node.fix;
        f[pick] = value;
        child(std::move(f));
      }
    }
    return children;
  }

  // Fallback when a relaxation fails to converge: branch on the first free binary.
  std::vector<Node> branch_blind(const Node& node) const {
    for (int v : p_.binaries) {
      if (node.fix.count(v) > 0) continue;
      Relaxation r;
      r.z = VectorXd::Constant(p_.qp.num_variables(), 0.5);
      r.fractional = {v};
      return branch(node, r);
    }
    return {};
  }

  void process(Node& node, QpSolver& solver) {
    if (conflicting(node.fix)) {
      log(node, node.bound, -1);
      return;
    }
    const Relaxation r = relax(node.fix, solver);
    std::vector<Node> children;
    if (r.infeasible) {
      log(node, kInf, -1);
      return;
    }
    if (!r.solved) {
      log(node, node.bound, -2);
      children = branch_blind(node);
    } else {
      node.bound = std::max(node.bound, r.value);
      log(node, node.bound, static_cast<int>(r.fractional.size()));
      {
        std::lock_guard<std::mutex> lock(mu_);
        if (node.bound >= inc_value_ - prune_tol()) return;
      }
      if (r.fractional.empty()) {
        try_incumbent(r.z, solver);
        return;
      }
      const bool run_heuristic =
          node.id == 0 || (c_.heuristic_frequency > 0 && node.id % c_.heuristic_frequency == 0);
      if (run_heuristic) rounding_heuristic(node.fix, r, solver);
      children = branch(node, r);
    }
    std::lock_guard<std::mutex> lock(mu_);
    for (auto& ch : children) {
      ch.id = next_id_++;
      if (ch.bound >= inc_value_ - prune_tol()) continue;
      open_.emplace(std::make_pair(ch.bound, ch.id), std::move(ch));
    }
  }

  void log(const Node& node, double bound, int fractional) {
    if (c_.node_log == nullptr) return;
    std::lock_guard<std::mutex> lock(mu_);
    *c_.node_log << "node " << node.id << " depth " << node.depth << " bound " << bound << " fractional "
                 << fractional << '\n';
  }

  const MiqpProblem& p_;
  const BnbConfig& c_;
  std::vector<int> group_of_;
  std::vector<char> is_binary_;

  std::mutex mu_;
  std::condition_variable cv_;
  std::map<std::pair<double, long>, Node> open_;
  std::multiset<double> active_bounds_;
  double inc_value_ = kInf;
  VectorXd inc_;
  std::vector<int> inc_bits_;
  long nodes_ = 0;
  long next_id_ = 0;
  bool stopped_ = false;
  BnbStatus stop_status_ = BnbStatus::Optimal;
  Clock::time_point start_;
};

}  // namespace

std::string to_string(BnbStatus status) {
  switch (status) {
    case BnbStatus::Optimal: return "optimal";
    case BnbStatus::GapLimit: return "gap-limit";
    case BnbStatus::NodeLimit: return "node-limit";
    case BnbStatus::TimeLimit: return "time-limit";
    case BnbStatus::Infeasible: return "infeasible";
  }
  return "unknown";
}

BnbResult solve_miqp(const MiqpProblem& problem, const BnbConfig& config) {
  if (!(config.integrality_tol > 0.0) || !(config.abs_gap > 0.0) || !(config.rel_gap > 0.0)) {
    throw QpError("branch-and-bound tolerances must be positive");
  }
  validate(problem.qp);
  const int n = problem.qp.num_variables();
  for (std::size_t i = 0; i < problem.binaries.size(); ++i) {
    const int j = problem.binaries[i];
    if (j < 0 || j >= n) throw QpError("binary index out of range");
    if (i > 0 && j <= problem.binaries[i - 1]) throw QpError("binary indices must be sorted and unique");
  }
  Search search(problem, config);
  return search.run();
}

namespace {

class Oracle {
 public:
  Oracle(const MiqpProblem& p, const QpSettings& st) : p_(p), solver_(st), rows_(p.qp.A) {
    std::vector<char> grouped(static_cast<std::size_t>(p.qp.num_variables()), 0);
    for (const auto& g : p.groups) {
      for (int j : g.binaries) grouped[static_cast<std::size_t>(j)] = 1;
    }
    for (int j : p.binaries) {
      if (!grouped[static_cast<std::size_t>(j)]) loose_.push_back(j);
    }
    row_owner_.assign(static_cast<std::size_t>(p.qp.A.rows()), -1);
    for (std::size_t g = 0; g < p.groups.size(); ++g) {
      for (int r : p.groups[g].rows) row_owner_[static_cast<std::size_t>(r)] = static_cast<int>(g);
    }
  }

  OracleResult run() {
    Fixings fix;
    dfs(0, fix);
    result_.value = best_;
    result_.z = best_z_;
    return result_;
  }

 private:
  int items() const { return static_cast<int>(p_.groups.size() + loose_.size()); }

  // QP with groups [0, assigned_groups) active and the rest removed.
  QpSolution solve(int assigned_groups, const Fixings& fix) {
    QpProblem q = p_.qp;
    std::vector<Eigen::Triplet<double>> trip;
    std::vector<double> rhs;
    int kept = 0;
    for (Eigen::Index r = 0; r < rows_.rows(); ++r) {
      const int owner = row_owner_[static_cast<std::size_t>(r)];
      if (owner >= assigned_groups) continue;
      for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(rows_, r); it; ++it) {
        trip.emplace_back(kept, it.col(), it.value());
      }
      rhs.push_back(p_.qp.b[r]);
      ++kept;
    }
    q.A.resize(kept, q.num_variables());
    q.A.setFromTriplets(trip.begin(), trip.end());
    q.b = Eigen::Map<VectorXd>(rhs.data(), kept);
    for (int j : p_.binaries) {
      q.lower[j] = std::max(q.lower[j], 0.0);
      q.upper[j] = std::min(q.upper[j], 1.0);
    }
    for (std::size_t g = static_cast<std::size_t>(assigned_groups); g < p_.groups.size(); ++g) {
      for (int j : p_.groups[g].binaries) q.lower[j] = q.upper[j] = 1.0;
    }
    for (const auto& [j, v] : fix) q.lower[j] = q.upper[j] = v;
    ++result_.qp_solves;
    return solver_.solve_unchecked(q, q.lower, q.upper);
  }

  void dfs(int depth, Fixings& fix) {
    const int groups = static_cast<int>(p_.groups.size());
    const int assigned = std::min(depth, groups);
    const QpSolution s = solve(assigned, fix);
    if (s.status != QpStatus::Optimal) {
      if (s.status == QpStatus::Infeasible) return;
      throw std::runtime_error("oracle QP did not converge");
    }
    if (s.objective >= best_ - 1e-9 * std::max(1.0, std::abs(best_))) return;
    if (depth == items()) {
      best_ = s.objective;
      best_z_ = s.z;
      return;
    }
    if (depth < groups) {
      const auto& g = p_.groups[static_cast<std::size_t>(depth)];
      for (std::size_t open = 0; open < 4; ++open) {
        for (std::size_t j = 0; j < 4; ++j) fix[g.binaries[j]] = j == open ? 0 : 1;
        dfs(depth + 1, fix);
      }
      for (int j : g.binaries) fix.erase(j);
    } else {
      const int v = loose_[static_cast<std::size_t>(depth - groups)];
      for (int value : {0, 1}) {
        fix[v] = value;
        dfs(depth + 1, fix);
      }
      fix.erase(v);
    }
  }

  const MiqpProblem& p_;
  QpSolver solver_;
  Eigen::SparseMatrix<double, Eigen::RowMajor> rows_;
  std::vector<int> loose_;
  std::vector<int> row_owner_;
  double best_ = kInf;
  VectorXd best_z_;
  OracleResult result_;
};

}  // namespace

OracleResult enumerate_oracle(const MiqpProblem& problem, long cap, const QpSettings& settings) {
  validate(problem.qp);
  std::size_t grouped = 0;
  for (const auto& g : problem.groups) grouped += g.binaries.size();
  const std::size_t loose = problem.binaries.size() - std::min(grouped, problem.binaries.size());
  long count = 1;
  const auto grow = [&](long factor) {
    count = count > cap / factor ? cap + 1 : count * factor;
  };
  for (std::size_t g = 0; g < problem.groups.size() && count <= cap; ++g) grow(4);
  for (std::size_t j = 0; j < loose && count <= cap; ++j) grow(2);
  if (count > cap) {
    throw std::length_error("enumeration exceeds the assignment cap of " + std::to_string(cap));
  }
  Oracle oracle(problem, settings);
  return oracle.run();
}

}  // namespace modplan
