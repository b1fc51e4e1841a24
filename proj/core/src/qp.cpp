#include "modplan/qp.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace modplan {

namespace {

using Eigen::Index;
using Eigen::VectorXd;
using RowMajorMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using Triplet = Eigen::Triplet<double>;

constexpr double kInf = std::numeric_limits<double>::infinity();

double inf_norm(const VectorXd& v) { return v.size() > 0 ? v.lpNorm<Eigen::Infinity>() : 0.0; }

// Problem left after presolve: every variable free, every row with at least
// two free entries, rows scaled to unit infinity norm.
struct ReducedQp {
  SparseMatrix H;
  VectorXd f;
  SparseMatrix A;
  VectorXd h;
  SparseMatrix E;
  VectorXd e;
  VectorXd l;
  VectorXd u;
};

enum class IpmOutcome { Converged, Stalled, Diverged, IterationLimit };

struct IpmResult {
  VectorXd x, y, lam, lam_l, lam_u;
  int iterations = 0;
  IpmOutcome outcome = IpmOutcome::IterationLimit;
};

struct Direction {
  VectorXd dx, dy, ds, dlam, dsl, dll, dsu, dlu;
};

double max_step(const VectorXd& v, const VectorXd& dv) {
  double alpha = 1.0;
  for (Index i = 0; i < v.size(); ++i) {
    if (dv[i] < 0.0) alpha = std::min(alpha, -v[i] / dv[i]);
  }
  return alpha;
}

class InteriorPoint {
 public:
  InteriorPoint(const ReducedQp& p, const QpSettings& st) : p_(p), st_(st) {
    n_ = p.f.size();
    mi_ = p.A.rows();
    me_ = p.E.rows();
    for (Index j = 0; j < n_; ++j) {
      if (std::isfinite(p.l[j])) lo_.push_back(j);
      if (std::isfinite(p.u[j])) up_.push_back(j);
    }
    At_ = p.A.transpose();
    Et_ = p.E.transpose();
  }

  IpmResult run() {
    init_point();
    const Index ncomp = mi_ + static_cast<Index>(lo_.size() + up_.size());
    const double fscale = 1.0 + inf_norm(p_.f);
    std::vector<double> pres_hist;
    std::vector<double> merit_hist;
    int tiny_steps = 0;
    IpmResult res;

    for (int iter = 0; iter < st_.max_iterations; ++iter) {
      res.iterations = iter;
      residuals();
      const double comp = s_.dot(lam_) + sl_.dot(ll_) + su_.dot(lu_);
      const double mu = ncomp > 0 ? comp / static_cast<double>(ncomp) : 0.0;
      const VectorXd Hx = p_.H * x_;
      const double obj = 0.5 * x_.dot(Hx) + p_.f.dot(x_);
      const double pres = std::max({inf_norm(re_), inf_norm(ra_), inf_norm(rl_), inf_norm(ru_)});
      const double dscale = std::max(fscale, 1.0 + inf_norm(Hx));
      const double dres = inf_norm(rd_) / dscale;
      const double gap = comp / (1.0 + std::abs(obj));

      if (pres <= st_.primal_tol && inf_norm(re_) <= 1e-2 * st_.primal_tol &&
          dres <= st_.dual_tol && gap <= st_.dual_tol) {
        res.outcome = IpmOutcome::Converged;
        break;
      }
      const double lam_max = std::max({inf_norm(lam_), inf_norm(ll_), inf_norm(lu_)});
      if (inf_norm(x_) > 1e12 || lam_max > 1e14) {
        res.outcome = IpmOutcome::Diverged;
        break;
      }
      pres_hist.push_back(pres);
      merit_hist.push_back(std::max({pres, dres, gap}));
      const auto w = static_cast<std::size_t>(st_.stall_window);
      if (pres_hist.size() > w) {
        const std::size_t back = pres_hist.size() - 1 - w;
        if (pres > st_.primal_tol && pres > 0.5 * pres_hist[back]) {
          res.outcome = IpmOutcome::Stalled;
          break;
        }
        if (merit_hist.size() > 3 * w && merit_hist.back() > 0.5 * merit_hist[merit_hist.size() - 1 - 3 * w]) {
          res.outcome = IpmOutcome::Stalled;
          break;
        }
      }

      if (!factorize()) {
        res.outcome = IpmOutcome::Stalled;
        break;
      }

      if (ncomp == 0) {
        const Direction d = direction(VectorXd(), VectorXd(), VectorXd());
        x_ += d.dx;
        y_ += d.dy;
        continue;
      }

      // Predictor.
      const Direction aff = direction(s_.cwiseProduct(lam_), sl_.cwiseProduct(ll_),
                                      su_.cwiseProduct(lu_));
      const double a_aff = step_length(aff);
      const double mu_aff = ((s_ + a_aff * aff.ds).dot(lam_ + a_aff * aff.dlam) +
                             (sl_ + a_aff * aff.dsl).dot(ll_ + a_aff * aff.dll) +
                             (su_ + a_aff * aff.dsu).dot(lu_ + a_aff * aff.dlu)) /
                            static_cast<double>(ncomp);
      const double sigma = std::pow(std::clamp(mu_aff / mu, 0.0, 1.0), 3);
      const double target = sigma * mu;

      // Corrector.
      const VectorXd rc = (s_.cwiseProduct(lam_) + aff.ds.cwiseProduct(aff.dlam)).array() - target;
      const VectorXd rcl = (sl_.cwiseProduct(ll_) + aff.dsl.cwiseProduct(aff.dll)).array() - target;
      const VectorXd rcu = (su_.cwiseProduct(lu_) + aff.dsu.cwiseProduct(aff.dlu)).array() - target;
      const Direction d = direction(rc, rcl, rcu);
      const double alpha = std::min(1.0, 0.995 * step_length(d));
      tiny_steps = alpha < 1e-10 ? tiny_steps + 1 : 0;
      if (tiny_steps >= 5) {
        res.outcome = IpmOutcome::Stalled;
        break;
      }
      x_ += alpha * d.dx;
      y_ += alpha * d.dy;
      s_ += alpha * d.ds;
      lam_ += alpha * d.dlam;
      sl_ += alpha * d.dsl;
      ll_ += alpha * d.dll;
      su_ += alpha * d.dsu;
      lu_ += alpha * d.dlu;
    }

    res.x = x_;
    res.y = y_;
    res.lam = lam_;
    res.lam_l = VectorXd::Zero(n_);
    res.lam_u = VectorXd::Zero(n_);
    for (std::size_t i = 0; i < lo_.size(); ++i) res.lam_l[lo_[i]] = ll_[static_cast<Index>(i)];
    for (std::size_t i = 0; i < up_.size(); ++i) res.lam_u[up_[i]] = lu_[static_cast<Index>(i)];
    return res;
  }

 private:
  void init_point() {
    x_.resize(n_);
    for (Index j = 0; j < n_; ++j) {
      const double l = p_.l[j], u = p_.u[j];
      if (std::isfinite(l) && std::isfinite(u)) x_[j] = 0.5 * (l + u);
      else if (std::isfinite(l)) x_[j] = l + 1.0;
      else if (std::isfinite(u)) x_[j] = u - 1.0;
      else x_[j] = 0.0;
    }
    y_ = VectorXd::Zero(me_);
    s_ = (p_.h - p_.A * x_).cwiseMax(1.0);
    lam_ = VectorXd::Ones(mi_);
    const auto nl = static_cast<Index>(lo_.size());
    const auto nu = static_cast<Index>(up_.size());
    sl_.resize(nl);
    su_.resize(nu);
    for (Index i = 0; i < nl; ++i) sl_[i] = std::max(x_[lo_[i]] - p_.l[lo_[i]], 1.0);
    for (Index i = 0; i < nu; ++i) su_[i] = std::max(p_.u[up_[i]] - x_[up_[i]], 1.0);
    ll_ = VectorXd::Ones(nl);
    lu_ = VectorXd::Ones(nu);
  }

  void residuals() {
    rd_ = p_.H * x_ + p_.f;
    if (me_ > 0) rd_ += Et_ * y_;
    if (mi_ > 0) rd_ += At_ * lam_;
    for (std::size_t i = 0; i < lo_.size(); ++i) rd_[lo_[i]] -= ll_[static_cast<Index>(i)];
    for (std::size_t i = 0; i < up_.size(); ++i) rd_[up_[i]] += lu_[static_cast<Index>(i)];
    re_ = p_.E * x_ - p_.e;
    ra_ = p_.A * x_ + s_ - p_.h;
    rl_.resize(sl_.size());
    ru_.resize(su_.size());
    for (std::size_t i = 0; i < lo_.size(); ++i) {
      const auto k = static_cast<Index>(i);
      rl_[k] = p_.l[lo_[i]] - x_[lo_[i]] + sl_[k];
    }
    for (std::size_t i = 0; i < up_.size(); ++i) {
      const auto k = static_cast<Index>(i);
      ru_[k] = x_[up_[i]] + su_[k] - p_.u[up_[i]];
    }
  }

  // Lays out the lower triangle of
  //   [H + A'WA + D + delta I, E'; E, -delta I]
  // once and records where every contribution lands.
  void build_pattern() {
    const Index dim = n_ + me_;
    std::vector<Triplet> trip;
    for (Index k = 0; k < p_.H.outerSize(); ++k) {
      for (SparseMatrix::InnerIterator it(p_.H, k); it; ++it) {
        if (it.row() >= it.col()) trip.emplace_back(it.row(), it.col(), 0.0);
      }
    }
    const RowMajorMatrix Ar = p_.A;
    for (Index r = 0; r < Ar.rows(); ++r) {
      for (RowMajorMatrix::InnerIterator a(Ar, r); a; ++a) {
        for (RowMajorMatrix::InnerIterator b(Ar, r); b; ++b) {
          if (a.col() >= b.col()) trip.emplace_back(a.col(), b.col(), 0.0);
        }
      }
    }
    for (Index j = 0; j < dim; ++j) trip.emplace_back(j, j, 0.0);
    for (Index k = 0; k < p_.E.outerSize(); ++k) {
      for (SparseMatrix::InnerIterator it(p_.E, k); it; ++it) trip.emplace_back(n_ + it.row(), it.col(), 0.0);
    }
    K_.resize(dim, dim);
    K_.setFromTriplets(trip.begin(), trip.end());
    K_.makeCompressed();

    const auto slot = [this](Index row, Index col) {
      const int* begin = K_.innerIndexPtr() + K_.outerIndexPtr()[col];
      const int* end = K_.innerIndexPtr() + K_.outerIndexPtr()[col + 1];
      return static_cast<int>(std::lower_bound(begin, end, static_cast<int>(row)) - K_.innerIndexPtr());
    };
    for (Index k = 0; k < p_.H.outerSize(); ++k) {
      for (SparseMatrix::InnerIterator it(p_.H, k); it; ++it) {
        if (it.row() >= it.col()) fixed_.push_back({slot(it.row(), it.col()), it.value()});
      }
    }
    for (Index k = 0; k < p_.E.outerSize(); ++k) {
      for (SparseMatrix::InnerIterator it(p_.E, k); it; ++it) {
        fixed_.push_back({slot(n_ + it.row(), it.col()), it.value()});
      }
    }
    for (Index r = 0; r < Ar.rows(); ++r) {
      for (RowMajorMatrix::InnerIterator a(Ar, r); a; ++a) {
        for (RowMajorMatrix::InnerIterator b(Ar, r); b; ++b) {
          if (a.col() >= b.col()) weighted_.push_back({slot(a.col(), b.col()), static_cast<int>(r), a.value() * b.value()});
        }
      }
    }
    diag_.resize(static_cast<std::size_t>(dim));
    for (Index j = 0; j < dim; ++j) diag_[static_cast<std::size_t>(j)] = slot(j, j);
    ldlt_.analyzePattern(K_);
  }

  bool factorize() {
    if (diag_.empty() && n_ + me_ > 0) build_pattern();
    w_ = lam_.cwiseQuotient(s_);
    dbound_ = VectorXd::Zero(n_);
    for (std::size_t i = 0; i < lo_.size(); ++i) {
      const auto k = static_cast<Index>(i);
      dbound_[lo_[i]] += ll_[k] / sl_[k];
    }
    for (std::size_t i = 0; i < up_.size(); ++i) {
      const auto k = static_cast<Index>(i);
      dbound_[up_[i]] += lu_[k] / su_[k];
    }
    double* val = K_.valuePtr();
    for (double delta : {1e-9, 1e-7, 1e-5}) {
      delta_ = delta;
      std::fill(val, val + K_.nonZeros(), 0.0);
      for (const auto& e : fixed_) val[e.slot] += e.value;
      for (const auto& e : weighted_) val[e.slot] += w_[e.row] * e.value;
      for (Index j = 0; j < n_; ++j) val[diag_[static_cast<std::size_t>(j)]] += dbound_[j] + delta;
      for (Index i = 0; i < me_; ++i) val[diag_[static_cast<std::size_t>(n_ + i)]] -= delta;
      ldlt_.factorize(K_);
      if (ldlt_.info() == Eigen::Success) return true;
    }
    return false;
  }

  // Unregularised KKT operator, for iterative refinement.
  VectorXd apply_kkt(const VectorXd& v) const {
    VectorXd out = K_.selfadjointView<Eigen::Lower>() * v;
    out.head(n_) -= delta_ * v.head(n_);
    out.tail(me_) += delta_ * v.tail(me_);
    return out;
  }

  Direction direction(const VectorXd& rc, const VectorXd& rcl, const VectorXd& rcu) {
    VectorXd rhs(n_ + me_);
    VectorXd top = -rd_;
    if (mi_ > 0) top -= At_ * (w_.cwiseProduct(ra_) - rc.cwiseQuotient(s_));
    for (std::size_t i = 0; i < lo_.size(); ++i) {
      const auto k = static_cast<Index>(i);
      top[lo_[i]] += (ll_[k] * rl_[k] - rcl[k]) / sl_[k];
    }
    for (std::size_t i = 0; i < up_.size(); ++i) {
      const auto k = static_cast<Index>(i);
      top[up_[i]] -= (lu_[k] * ru_[k] - rcu[k]) / su_[k];
    }
    rhs.head(n_) = top;
    if (me_ > 0) rhs.tail(me_) = -re_;

    VectorXd v = ldlt_.solve(rhs);
    const double rscale = 1.0 + inf_norm(rhs);
    for (int refine = 0; refine < 2; ++refine) {
      const VectorXd r = rhs - apply_kkt(v);
      if (inf_norm(r) <= 1e-12 * rscale) break;
      v += ldlt_.solve(r);
    }

    Direction d;
    d.dx = v.head(n_);
    d.dy = v.tail(me_);
    const VectorXd Adx = p_.A * d.dx;
    d.ds = -ra_ - Adx;
    d.dlam = w_.cwiseProduct(Adx + ra_) - rc.cwiseQuotient(s_);
    const auto nl = static_cast<Index>(lo_.size());
    const auto nu = static_cast<Index>(up_.size());
    d.dsl.resize(nl);
    d.dll.resize(nl);
    d.dsu.resize(nu);
    d.dlu.resize(nu);
    for (Index k = 0; k < nl; ++k) {
      const double dxj = d.dx[lo_[static_cast<std::size_t>(k)]];
      d.dsl[k] = dxj - rl_[k];
      d.dll[k] = -ll_[k] / sl_[k] * dxj + (ll_[k] * rl_[k] - rcl[k]) / sl_[k];
    }
    for (Index k = 0; k < nu; ++k) {
      const double dxj = d.dx[up_[static_cast<std::size_t>(k)]];
      d.dsu[k] = -ru_[k] - dxj;
      d.dlu[k] = lu_[k] / su_[k] * dxj + (lu_[k] * ru_[k] - rcu[k]) / su_[k];
    }
    return d;
  }

  double step_length(const Direction& d) const {
    return std::min({max_step(s_, d.ds), max_step(lam_, d.dlam), max_step(sl_, d.dsl),
                     max_step(ll_, d.dll), max_step(su_, d.dsu), max_step(lu_, d.dlu)});
  }

  const ReducedQp& p_;
  const QpSettings& st_;
  Index n_ = 0, mi_ = 0, me_ = 0;
  std::vector<Index> lo_, up_;
  SparseMatrix At_, Et_, K_;
  VectorXd x_, y_, s_, lam_, sl_, ll_, su_, lu_;
  VectorXd rd_, re_, ra_, rl_, ru_, w_, dbound_;
  double delta_ = 1e-9;
  struct FixedEntry {
    int slot;
    double value;
  };
  struct WeightedEntry {
    int slot;
    int row;
    double value;
  };
  std::vector<FixedEntry> fixed_;
  std::vector<WeightedEntry> weighted_;
  std::vector<int> diag_;
  Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt_;
};

// Smallest uniform relaxation t >= 0 of every row and bound that admits a
// point. Returns +inf if the phase-1 solve itself fails.
double phase_one(const ReducedQp& p, const QpSettings& st) {
  const Index n = p.f.size();
  std::vector<Triplet> trip;
  std::vector<double> rhs;
  Index row = 0;
  const auto add_block = [&](const SparseMatrix& M, const VectorXd& r, double sign) {
    for (Index k = 0; k < M.outerSize(); ++k) {
      for (SparseMatrix::InnerIterator it(M, k); it; ++it) {
        trip.emplace_back(row + it.row(), it.col(), sign * it.value());
      }
    }
    for (Index i = 0; i < M.rows(); ++i) {
      trip.emplace_back(row + i, n, -1.0);
      rhs.push_back(sign * r[i]);
    }
    row += M.rows();
  };
  add_block(p.A, p.h, 1.0);
  add_block(p.E, p.e, 1.0);
  add_block(p.E, p.e, -1.0);
  for (Index j = 0; j < n; ++j) {
    if (std::isfinite(p.l[j])) {
      trip.emplace_back(row, j, -1.0);
      trip.emplace_back(row, n, -1.0);
      rhs.push_back(-p.l[j]);
      ++row;
    }
    if (std::isfinite(p.u[j])) {
      trip.emplace_back(row, j, 1.0);
      trip.emplace_back(row, n, -1.0);
      rhs.push_back(p.u[j]);
      ++row;
    }
  }
  ReducedQp q;
  q.H.resize(n + 1, n + 1);
  q.f = VectorXd::Zero(n + 1);
  q.f[n] = 1.0;
  q.A.resize(row, n + 1);
  q.A.setFromTriplets(trip.begin(), trip.end());
  q.h = Eigen::Map<VectorXd>(rhs.data(), static_cast<Index>(rhs.size()));
  q.E.resize(0, n + 1);
  q.e.resize(0);
  q.l = VectorXd::Constant(n + 1, -kInf);
  q.u = VectorXd::Constant(n + 1, kInf);
  q.l[n] = 0.0;
  QpSettings relaxed = st;
  relaxed.primal_tol = 1e-9;
  relaxed.dual_tol = 1e-9;
  InteriorPoint ipm(q, relaxed);
  const IpmResult r = ipm.run();
  if (r.outcome != IpmOutcome::Converged) return kInf;
  return std::max(0.0, r.x[n]);
}

// Removes fixed variables and rows with fewer than two free entries.
struct Presolve {
  bool infeasible = false;
  double infeasibility = 0.0;

  VectorXd value;
  std::vector<char> fixed;
  std::vector<int> fix_order;
  std::vector<int> fix_eq_row;
  std::vector<double> fix_eq_coef;

  VectorXd lo, hi;
  std::vector<int> lo_row, hi_row;
  std::vector<double> lo_coef, hi_coef;

  std::vector<int> reduced_index;
  std::vector<int> free_vars;
  std::vector<int> kept_ineq, kept_eq;
  VectorXd ineq_scale, eq_scale;
  ReducedQp reduced;

  Presolve(const QpProblem& P, const VectorXd& lower, const VectorXd& upper) {
    const int n = P.num_variables();
    value = VectorXd::Zero(n);
    fixed.assign(static_cast<std::size_t>(n), 0);
    fix_eq_row.assign(static_cast<std::size_t>(n), -1);
    fix_eq_coef.assign(static_cast<std::size_t>(n), 0.0);
    lo = lower;
    hi = upper;
    lo_row.assign(static_cast<std::size_t>(n), -1);
    hi_row.assign(static_cast<std::size_t>(n), -1);
    lo_coef.assign(static_cast<std::size_t>(n), 0.0);
    hi_coef.assign(static_cast<std::size_t>(n), 0.0);

    for (int j = 0; j < n; ++j) {
      if (lo[j] > hi[j] + bound_tol(lo[j])) {
        fail(lo[j] - hi[j]);
        return;
      }
      if (std::isfinite(lo[j]) && hi[j] - lo[j] <= 1e-13 * (1.0 + std::abs(lo[j]))) fix(j, lo[j]);
    }

    const RowMajorMatrix Ar = P.A;
    const RowMajorMatrix Er = P.Aeq;
    std::vector<char> ineq_done(static_cast<std::size_t>(Ar.rows()), 0);
    std::vector<char> eq_done(static_cast<std::size_t>(Er.rows()), 0);

    for (int pass = 0; pass < 50; ++pass) {
      bool changed = false;
      for (Index r = 0; r < Er.rows(); ++r) {
        if (eq_done[static_cast<std::size_t>(r)]) continue;
        int free_count = 0, last = -1;
        double coef = 0.0, rest = P.beq[r], scale = std::abs(P.beq[r]);
        for (RowMajorMatrix::InnerIterator it(Er, r); it; ++it) {
          const auto j = static_cast<int>(it.col());
          if (fixed[static_cast<std::size_t>(j)]) {
            rest -= it.value() * value[j];
            scale += std::abs(it.value() * value[j]);
          } else {
            ++free_count;
            last = j;
            coef = it.value();
          }
        }
        if (free_count == 0) {
          eq_done[static_cast<std::size_t>(r)] = 1;
          if (std::abs(rest) > 1e-9 * (1.0 + scale)) {
        fail(std::abs(rest));
        return;
      }
        } else if (free_count == 1) {
          eq_done[static_cast<std::size_t>(r)] = 1;
          const double v = rest / coef;
          const double tol = bound_tol(v);
          if (v < lo[last] - tol) {
        fail(lo[last] - v);
        return;
      }
          if (v > hi[last] + tol) {
        fail(v - hi[last]);
        return;
      }
          fix(last, v);
          fix_eq_row[static_cast<std::size_t>(last)] = static_cast<int>(r);
          fix_eq_coef[static_cast<std::size_t>(last)] = coef;
          changed = true;
        }
      }
      for (Index r = 0; r < Ar.rows(); ++r) {
        if (ineq_done[static_cast<std::size_t>(r)]) continue;
        int free_count = 0, last = -1;
        double coef = 0.0, rest = P.b[r], scale = std::abs(P.b[r]);
        for (RowMajorMatrix::InnerIterator it(Ar, r); it; ++it) {
          const auto j = static_cast<int>(it.col());
          if (fixed[static_cast<std::size_t>(j)]) {
            rest -= it.value() * value[j];
            scale += std::abs(it.value() * value[j]);
          } else if (it.value() != 0.0) {
            ++free_count;
            last = j;
            coef = it.value();
          }
        }
        if (free_count == 0) {
          ineq_done[static_cast<std::size_t>(r)] = 1;
          if (rest < -1e-9 * (1.0 + scale)) {
        fail(-rest);
        return;
      }
        } else if (free_count == 1) {
          ineq_done[static_cast<std::size_t>(r)] = 1;
          const auto js = static_cast<std::size_t>(last);
          const double bound = rest / coef;
          if (coef > 0.0 && bound < hi[last]) {
            hi[last] = bound;
            hi_row[js] = static_cast<int>(r);
            hi_coef[js] = coef;
          } else if (coef < 0.0 && bound > lo[last]) {
            lo[last] = bound;
            lo_row[js] = static_cast<int>(r);
            lo_coef[js] = coef;
          }
          if (lo[last] > hi[last] + bound_tol(lo[last])) {
        fail(lo[last] - hi[last]);
        return;
      }
          if (std::isfinite(lo[last]) && hi[last] - lo[last] <= bound_tol(lo[last])) {
            // Snap the row-derived side onto the original bound.
            fix(last, hi_row[js] >= 0 ? lo[last] : hi[last]);
          }
          changed = true;
        }
      }
      if (!changed) break;
    }

    reduced_index.assign(static_cast<std::size_t>(n), -1);
    for (int j = 0; j < n; ++j) {
      if (!fixed[static_cast<std::size_t>(j)]) {
        reduced_index[static_cast<std::size_t>(j)] = static_cast<int>(free_vars.size());
        free_vars.push_back(j);
      }
    }
    for (Index r = 0; r < Ar.rows(); ++r) {
      if (!ineq_done[static_cast<std::size_t>(r)]) kept_ineq.push_back(static_cast<int>(r));
    }
    for (Index r = 0; r < Er.rows(); ++r) {
      if (!eq_done[static_cast<std::size_t>(r)]) kept_eq.push_back(static_cast<int>(r));
    }
    build_reduced(P, Ar, Er);
  }

  static double bound_tol(double v) { return 1e-9 * (1.0 + std::abs(v)); }

  void fail(double amount) {
    infeasible = true;
    infeasibility = amount;
  }

  void fix(int j, double v) {
    value[j] = v;
    fixed[static_cast<std::size_t>(j)] = 1;
    fix_order.push_back(j);
  }

  void build_reduced(const QpProblem& P, const RowMajorMatrix& Ar, const RowMajorMatrix& Er) {
    const auto nf = static_cast<Index>(free_vars.size());
    VectorXd zf = VectorXd::Zero(P.num_variables());
    for (int j : fix_order) zf[j] = value[j];
    const VectorXd g = P.f + P.H * zf;

    reduced.f.resize(nf);
    reduced.l.resize(nf);
    reduced.u.resize(nf);
    for (Index k = 0; k < nf; ++k) {
      const int j = free_vars[static_cast<std::size_t>(k)];
      reduced.f[k] = g[j];
      reduced.l[k] = lo[j];
      reduced.u[k] = hi[j];
    }

    std::vector<Triplet> trip;
    for (Index k = 0; k < P.H.outerSize(); ++k) {
      for (SparseMatrix::InnerIterator it(P.H, k); it; ++it) {
        const int r = reduced_index[static_cast<std::size_t>(it.row())];
        const int c = reduced_index[static_cast<std::size_t>(it.col())];
        if (r >= 0 && c >= 0) trip.emplace_back(r, c, it.value());
      }
    }
    reduced.H.resize(nf, nf);
    reduced.H.setFromTriplets(trip.begin(), trip.end());

    const auto reduce_rows = [&](const RowMajorMatrix& M, const VectorXd& rhs,
                                 const std::vector<int>& rows, SparseMatrix& out,
                                 VectorXd& out_rhs, VectorXd& scale) {
      trip.clear();
      out_rhs.resize(static_cast<Index>(rows.size()));
      scale.resize(static_cast<Index>(rows.size()));
      for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto ri = static_cast<Index>(i);
        double rest = rhs[rows[i]];
        double norm = 0.0;
        for (RowMajorMatrix::InnerIterator it(M, rows[i]); it; ++it) {
          const int c = reduced_index[static_cast<std::size_t>(it.col())];
          if (c < 0) rest -= it.value() * value[it.col()];
          else norm = std::max(norm, std::abs(it.value()));
        }
        scale[ri] = norm > 0.0 ? norm : 1.0;
        out_rhs[ri] = rest / scale[ri];
        for (RowMajorMatrix::InnerIterator it(M, rows[i]); it; ++it) {
          const int c = reduced_index[static_cast<std::size_t>(it.col())];
          if (c >= 0 && it.value() != 0.0) trip.emplace_back(ri, c, it.value() / scale[ri]);
        }
      }
      out.resize(static_cast<Index>(rows.size()), nf);
      out.setFromTriplets(trip.begin(), trip.end());
    };
    reduce_rows(Ar, P.b, kept_ineq, reduced.A, reduced.h, ineq_scale);
    reduce_rows(Er, P.beq, kept_eq, reduced.E, reduced.e, eq_scale);
  }
};

double max_abs(const SparseMatrix& M) {
  double m = 0.0;
  for (Index k = 0; k < M.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(M, k); it; ++it) m = std::max(m, std::abs(it.value()));
  }
  return m;
}

void check_dims(const QpProblem& p) {
  const Index n = p.f.size();
  const auto fail = [](const std::string& what) { throw QpError("QP dimension mismatch: " + what); };
  if (p.H.rows() != n || p.H.cols() != n) fail("H");
  if (p.A.cols() != n || p.A.rows() != p.b.size()) fail("A/b");
  if (p.Aeq.cols() != n || p.Aeq.rows() != p.beq.size()) fail("Aeq/beq");
  if (p.lower.size() != n || p.upper.size() != n) fail("bounds");
}

}  // namespace

double QpProblem::objective(const VectorXd& z) const {
  return 0.5 * z.dot(H * z) + f.dot(z) + c0;
}

QpProblem make_qp(int n) {
  QpProblem p;
  p.H.resize(n, n);
  p.f = VectorXd::Zero(n);
  p.A.resize(0, n);
  p.b.resize(0);
  p.Aeq.resize(0, n);
  p.beq.resize(0);
  p.lower = VectorXd::Constant(n, -kInf);
  p.upper = VectorXd::Constant(n, kInf);
  return p;
}

std::string to_string(QpStatus status) {
  switch (status) {
    case QpStatus::Optimal: return "optimal";
    case QpStatus::Infeasible: return "infeasible";
    case QpStatus::Unbounded: return "unbounded";
    case QpStatus::MaxIterations: return "max-iterations";
  }
  return "unknown";
}

void validate(const QpProblem& p) {
  check_dims(p);
  const Index n = p.f.size();
  if (n == 0) return;
  const SparseMatrix Ht = p.H.transpose();
  const double hmax = max_abs(p.H);
  if (max_abs(p.H - Ht) > 1e-12 * std::max(1.0, hmax)) throw QpError("H is not symmetric");
  // LDL' of H + eps I has only positive pivots iff H + eps I is positive definite.
  const double eps = 1e-10 * std::max(1.0, hmax);
  SparseMatrix S = p.H;
  SparseMatrix I(n, n);
  I.setIdentity();
  S += eps * I;
  Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt(S);
  if (ldlt.info() != Eigen::Success || ldlt.vectorD().minCoeff() < 0.0) {
    throw QpError("H is not positive semidefinite");
  }
  for (Index j = 0; j < n; ++j) {
    if (std::isnan(p.lower[j]) || std::isnan(p.upper[j])) throw QpError("NaN bound");
  }
}

KktResiduals kkt_residuals(const QpProblem& p, const QpSolution& s) {
  KktResiduals k;
  const VectorXd& z = s.z;
  VectorXd g = p.H * z + p.f;
  if (s.eq_duals.size() > 0) g += p.Aeq.transpose() * s.eq_duals;
  if (s.ineq_duals.size() > 0) g += p.A.transpose() * s.ineq_duals;
  g += s.upper_duals - s.lower_duals;
  k.stationarity = inf_norm(g);

  const VectorXd eq = p.Aeq * z - p.beq;
  const VectorXd in = p.A * z - p.b;
  k.primal = inf_norm(eq);
  for (Index i = 0; i < in.size(); ++i) {
    k.primal = std::max(k.primal, in[i]);
    k.complementarity = std::max(k.complementarity, std::abs(s.ineq_duals[i] * in[i]));
    k.dual_sign = std::max(k.dual_sign, -s.ineq_duals[i]);
  }
  for (Index j = 0; j < z.size(); ++j) {
    k.primal = std::max({k.primal, p.lower[j] - z[j], z[j] - p.upper[j]});
    if (std::isfinite(p.lower[j])) {
      k.complementarity = std::max(k.complementarity, std::abs(s.lower_duals[j] * (z[j] - p.lower[j])));
    }
    if (std::isfinite(p.upper[j])) {
      k.complementarity = std::max(k.complementarity, std::abs(s.upper_duals[j] * (p.upper[j] - z[j])));
    }
    k.dual_sign = std::max({k.dual_sign, -s.lower_duals[j], -s.upper_duals[j]});
  }
  return k;
}

void apply_fixings(const QpProblem& problem, const Fixings& fixings,
                   std::span<const int> relaxed_box, VectorXd& lower, VectorXd& upper) {
  const int n = problem.num_variables();
  lower = problem.lower;
  upper = problem.upper;
  for (int j : relaxed_box) {
    if (j < 0 || j >= n) throw QpError("relaxed index out of range");
    if (fixings.count(j) > 0) throw QpError("index both fixed and relaxed");
    lower[j] = std::max(lower[j], 0.0);
    upper[j] = std::min(upper[j], 1.0);
  }
  for (const auto& [j, v] : fixings) {
    if (j < 0 || j >= n) throw QpError("fixing index out of range");
    if (v != 0 && v != 1) throw QpError("fixings must be 0 or 1");
    if (v < problem.lower[j] || v > problem.upper[j]) {
      throw QpError("fixing of variable " + std::to_string(j) + " conflicts with its bounds");
    }
    lower[j] = v;
    upper[j] = v;
  }
}

QpSolver::QpSolver(QpSettings settings) : settings_(settings) {}

QpSolution QpSolver::solve(const QpProblem& problem) {
  validate(problem);
  return solve_unchecked(problem, problem.lower, problem.upper);
}

QpSolution QpSolver::solve_with_fixings(const QpProblem& problem, const Fixings& fixings,
                                        std::span<const int> relaxed_box) {
  validate(problem);
  VectorXd lower, upper;
  apply_fixings(problem, fixings, relaxed_box, lower, upper);
  return solve_unchecked(problem, lower, upper);
}

QpSolution QpSolver::solve_unchecked(const QpProblem& P, const VectorXd& lower,
                                     const VectorXd& upper) {
  const int n = P.num_variables();
  QpSolution out;
  out.z = VectorXd::Zero(n);
  out.eq_duals = VectorXd::Zero(P.Aeq.rows());
  out.ineq_duals = VectorXd::Zero(P.A.rows());
  out.lower_duals = VectorXd::Zero(n);
  out.upper_duals = VectorXd::Zero(n);

  Presolve pre(P, lower, upper);
  if (pre.infeasible) {
    out.status = QpStatus::Infeasible;
    out.infeasibility = pre.infeasibility;
    out.objective = kInf;
    return out;
  }

  InteriorPoint ipm(pre.reduced, settings_);
  const IpmResult r = ipm.run();
  out.iterations = r.iterations;

  for (int j : pre.fix_order) out.z[j] = pre.value[j];
  for (std::size_t k = 0; k < pre.free_vars.size(); ++k) {
    out.z[pre.free_vars[k]] = r.x[static_cast<Index>(k)];
  }

  if (r.outcome == IpmOutcome::Converged) {
    out.status = QpStatus::Optimal;
  } else {
    const double t = phase_one(pre.reduced, settings_);
    out.infeasibility = t;
    if (t > settings_.infeasibility_threshold) {
      out.status = QpStatus::Infeasible;
    } else if (r.outcome == IpmOutcome::Diverged) {
      out.status = QpStatus::Unbounded;
    } else {
      out.status = QpStatus::MaxIterations;
    }
  }

  // Multipliers back on the original rows and bounds.
  for (std::size_t i = 0; i < pre.kept_ineq.size(); ++i) {
    const auto k = static_cast<Index>(i);
    out.ineq_duals[pre.kept_ineq[i]] = r.lam[k] / pre.ineq_scale[k];
  }
  for (std::size_t i = 0; i < pre.kept_eq.size(); ++i) {
    const auto k = static_cast<Index>(i);
    out.eq_duals[pre.kept_eq[i]] = r.y[k] / pre.eq_scale[k];
  }
  for (std::size_t k = 0; k < pre.free_vars.size(); ++k) {
    const int j = pre.free_vars[k];
    const auto js = static_cast<std::size_t>(j);
    const double ll = r.lam_l[static_cast<Index>(k)];
    const double lu = r.lam_u[static_cast<Index>(k)];
    if (pre.lo_row[js] >= 0) out.ineq_duals[pre.lo_row[js]] += ll / std::abs(pre.lo_coef[js]);
    else out.lower_duals[j] = ll;
    if (pre.hi_row[js] >= 0) out.ineq_duals[pre.hi_row[js]] += lu / std::abs(pre.hi_coef[js]);
    else out.upper_duals[j] = lu;
  }
  if (!pre.fix_order.empty()) {
    const VectorXd base = P.H * out.z + P.f;
    for (auto it = pre.fix_order.rbegin(); it != pre.fix_order.rend(); ++it) {
      const int j = *it;
      double g = base[j];
      for (SparseMatrix::InnerIterator c(P.Aeq, j); c; ++c) g += c.value() * out.eq_duals[c.row()];
      for (SparseMatrix::InnerIterator c(P.A, j); c; ++c) g += c.value() * out.ineq_duals[c.row()];
      const int row = pre.fix_eq_row[static_cast<std::size_t>(j)];
      if (row >= 0) {
        out.eq_duals[row] -= g / pre.fix_eq_coef[static_cast<std::size_t>(j)];
      } else if (g >= 0.0) {
        out.lower_duals[j] = g;
      } else {
        out.upper_duals[j] = -g;
      }
    }
  }

  out.objective = P.objective(out.z);
  const KktResiduals kkt = kkt_residuals(P, out);
  out.primal_residual = kkt.primal;
  out.dual_residual = kkt.stationarity;
  return out;
}

QpSolution solve_qp(const QpProblem& problem, const QpSettings& settings) {
  QpSolver solver(settings);
  return solver.solve(problem);
}

QpSolution solve_qp_with_fixings(const QpProblem& problem, const Fixings& fixings,
                                 std::span<const int> relaxed_box, const QpSettings& settings) {
  QpSolver solver(settings);
  return solver.solve_with_fixings(problem, fixings, relaxed_box);
}

}  // namespace modplan
