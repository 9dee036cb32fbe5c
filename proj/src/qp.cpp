#include "sfield/solvers.hpp"

#include <cmath>
#include <limits>

namespace sfield {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// One constraint in the internal "n'x >= d" form used by the active-set
// iteration. kind: 0 = a_in row, 1 = lower bound, 2 = upper bound, 3 = equality.
struct Constraint {
  VectorXd n;
  double d;
  int kind;
  int index;
  double sign = 1.0;  // for equalities: orientation chosen when activated
};

struct ActiveSet {
  std::vector<int> ids;  // indices into the constraint list
  VectorXd u;            // multipliers, aligned with ids
};

SolveReport report_from(const std::vector<Constraint>& cons, const ActiveSet& act,
                        const QpProblem& p, const VectorXd& x, int iters,
                        SolveStatus status) {
  SolveReport rep;
  rep.x = x;
  rep.iterations = iters;
  rep.status = status;
  const int n = static_cast<int>(p.H.rows());
  rep.eq_mult = VectorXd::Zero(p.a_eq.rows());
  rep.ineq_mult = VectorXd::Zero(p.a_in.rows());
  rep.lower_mult = VectorXd::Zero(p.lower.size() ? n : 0);
  rep.upper_mult = VectorXd::Zero(p.upper.size() ? n : 0);
  for (std::size_t a = 0; a < act.ids.size(); ++a) {
    const Constraint& c = cons[act.ids[a]];
    const double u = act.u[static_cast<int>(a)];
    switch (c.kind) {
      case 0: rep.ineq_mult[c.index] = u; rep.active_ineq.push_back(c.index); break;
      case 1: rep.lower_mult[c.index] = u; rep.active_lower.push_back(c.index); break;
      case 2: rep.upper_mult[c.index] = u; rep.active_upper.push_back(c.index); break;
      case 3: rep.eq_mult[c.index] = -c.sign * u; break;
    }
  }
  rep.kkt_residual = qp_kkt_residual(p, rep);
  return rep;
}

// Equality-only problems: one symmetric indefinite KKT solve.
SolveReport solve_kkt(const QpProblem& p, double tol) {
  const int n = static_cast<int>(p.H.rows());
  const int m = static_cast<int>(p.a_eq.rows());
  MatrixXd kkt = MatrixXd::Zero(n + m, n + m);
  kkt.topLeftCorner(n, n) = p.H;
  if (m) {
    kkt.topRightCorner(n, m) = p.a_eq.transpose();
    kkt.bottomLeftCorner(m, n) = p.a_eq;
  }
  VectorXd rhs(n + m);
  rhs.head(n) = -p.g;
  if (m) rhs.tail(m) = p.b_eq;

  // Ruiz equilibration: penalty curvature can dwarf the constraint blocks by
  // ten orders of magnitude, which wrecks rank detection without scaling
  VectorXd d = VectorXd::Ones(n + m);
  MatrixXd scaled = kkt;
  for (int pass = 0; pass < 10; ++pass) {
    VectorXd rn(n + m);
    bool balanced = true;
    for (int i = 0; i < n + m; ++i) {
      rn[i] = scaled.row(i).lpNorm<Eigen::Infinity>();
      if (rn[i] > 0.0 && (rn[i] > 2.0 || rn[i] < 0.5)) balanced = false;
    }
    if (balanced) break;
    for (int i = 0; i < n + m; ++i)
      if (rn[i] > 0.0) d[i] /= std::sqrt(rn[i]);
    scaled = d.asDiagonal() * kkt * d.asDiagonal();
  }
  const VectorXd rhs_s = d.cwiseProduct(rhs);

  Eigen::FullPivLU<MatrixXd> lu(scaled);
  SolveReport rep;
  rep.iterations = 1;
  if (lu.rank() < n + m) {
    // singular KKT: accept a consistent least-squares solution, otherwise
    // classify by which block fails
    Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(scaled);
    const VectorXd z = d.cwiseProduct(cod.solve(rhs_s));
    const double res = (scaled * z.cwiseQuotient(d) - rhs_s).norm();
    if (res > std::max(tol, 1e-9) * (1.0 + rhs_s.norm())) {
      const VectorXd x = z.head(n);
      const double eq_res = m ? (p.a_eq * x - p.b_eq).norm() : 0.0;
      rep.status = eq_res > tol * (1.0 + p.b_eq.norm()) ? SolveStatus::infeasible
                                                        : SolveStatus::unbounded;
      rep.x = x;
      return rep;
    }
    rep.x = z.head(n);
    rep.eq_mult = z.tail(m);
  } else {
    const VectorXd z = d.cwiseProduct(lu.solve(rhs_s));
    rep.x = z.head(n);
    rep.eq_mult = z.tail(m);
  }
  rep.ineq_mult = VectorXd::Zero(p.a_in.rows());
  rep.lower_mult = VectorXd::Zero(p.lower.size() ? n : 0);
  rep.upper_mult = VectorXd::Zero(p.upper.size() ? n : 0);
  rep.status = SolveStatus::success;
  rep.kkt_residual = qp_kkt_residual(p, rep);
  return rep;
}

}  // namespace

std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::success: return "success";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::unbounded: return "unbounded";
    case SolveStatus::max_iter: return "max_iter";
    case SolveStatus::degenerate: return "degenerate";
  }
  return "?";
}

SolveReport solve_qp(const QpProblem& p, double tol) {
  const int n = static_cast<int>(p.H.rows());
  std::vector<Constraint> cons;
  for (int i = 0; i < p.a_eq.rows(); ++i)
    cons.push_back({p.a_eq.row(i).transpose(), p.b_eq[i], 3, i, 1.0});
  const int n_eq = static_cast<int>(cons.size());
  for (int i = 0; i < p.a_in.rows(); ++i)
    cons.push_back({-p.a_in.row(i).transpose(), -p.b_in[i], 0, i, 1.0});
  if (p.lower.size())
    for (int j = 0; j < n; ++j)
      if (std::isfinite(p.lower[j]))
        cons.push_back({VectorXd::Unit(n, j), p.lower[j], 1, j, 1.0});
  if (p.upper.size())
    for (int j = 0; j < n; ++j)
      if (std::isfinite(p.upper[j]))
        cons.push_back({-VectorXd::Unit(n, j), -p.upper[j], 2, j, 1.0});

  if (static_cast<int>(cons.size()) == n_eq) return solve_kkt(p, tol);

  Eigen::LLT<MatrixXd> llt(p.H);
  if (llt.info() != Eigen::Success) {
    SolveReport rep;
    rep.status = SolveStatus::degenerate;
    rep.x = VectorXd::Zero(n);
    return rep;
  }

  VectorXd x = -llt.solve(p.g);
  ActiveSet act;
  int iters = 0;
  const int max_iters = 50 * (static_cast<int>(cons.size()) + 1);
  const double h_norm = p.H.lpNorm<Eigen::Infinity>();

  // Brings constraint `target` into the active set, dropping blocking
  // inequalities along the way. Returns false when no feasible step exists.
  auto activate = [&](int target) -> bool {
    double u_new = 0.0;
    while (true) {
      if (++iters > max_iters) return false;
      const Constraint& cp = cons[target];
      const VectorXd hi_np = llt.solve(cp.sign * cp.n);
      VectorXd z, r;
      if (act.ids.empty()) {
        z = hi_np;
      } else {
        const int m = static_cast<int>(act.ids.size());
        MatrixXd nmat(n, m);
        for (int a = 0; a < m; ++a)
          nmat.col(a) = cons[act.ids[a]].sign * cons[act.ids[a]].n;
        const MatrixXd hi_nmat = llt.solve(nmat);
        const MatrixXd gram = nmat.transpose() * hi_nmat;
        r = gram.fullPivLu().solve(nmat.transpose() * hi_np);
        z = hi_np - hi_nmat * r;
      }
      // max step before an active inequality multiplier reaches zero
      double t1 = kInf;
      int drop = -1;
      for (std::size_t a = 0; a < act.ids.size(); ++a) {
        if (cons[act.ids[a]].kind == 3) continue;
        if (r.size() && r[static_cast<int>(a)] > 1e-12) {
          const double t = act.u[static_cast<int>(a)] / r[static_cast<int>(a)];
          if (t < t1) { t1 = t; drop = static_cast<int>(a); }
        }
      }
      const double denom = z.dot(cp.sign * cp.n);
      const double gap = cp.sign * (cp.d - cp.n.dot(x));
      // dependence threshold relative to the curvature scale: with stiff
      // penalty Hessians a genuinely independent row gives denom ~ |n|^2/|H|
      const double dep_tol = 1e-13 * cp.n.squaredNorm() / (1.0 + h_norm);
      const double t2 = denom > dep_tol ? gap / denom : kInf;
      const double t = std::min(t1, t2);
      if (!std::isfinite(t)) {
        // dependent but already satisfied: leave it inactive (zero multiplier)
        if (std::abs(gap) <= tol * (1.0 + std::abs(cp.d))) return true;
        return false;
      }
      x += t * z;
      for (std::size_t a = 0; a < act.ids.size(); ++a)
        if (r.size()) act.u[static_cast<int>(a)] -= t * r[static_cast<int>(a)];
      u_new += t;
      if (t2 <= t1) {
        act.ids.push_back(target);
        VectorXd u2(act.u.size() + 1);
        u2.head(act.u.size()) = act.u;
        u2[act.u.size()] = u_new;
        act.u = u2;
        return true;
      }
      // drop the blocking constraint and retry
      act.ids.erase(act.ids.begin() + drop);
      VectorXd u2(act.u.size() - 1);
      int w = 0;
      for (int a = 0; a < act.u.size(); ++a)
        if (a != drop) u2[w++] = act.u[a];
      act.u = u2;
    }
  };

  // equalities first; orientation follows the violation side
  for (int e = 0; e < n_eq; ++e) {
    const double res = cons[e].n.dot(x) - cons[e].d;
    if (std::abs(res) <= tol * (1.0 + std::abs(cons[e].d))) {
      // satisfied already but must still join the active set to stay pinned
      cons[e].sign = 1.0;
      if (!activate(e))
        return report_from(cons, act, p, x, iters, SolveStatus::infeasible);
      continue;
    }
    cons[e].sign = res < 0 ? 1.0 : -1.0;
    if (!activate(e))
      return report_from(cons, act, p, x, iters, SolveStatus::infeasible);
  }

  while (true) {
    if (++iters > max_iters)
      return report_from(cons, act, p, x, iters, SolveStatus::max_iter);
    int worst = -1;
    double worst_gap = tol;
    for (int c = n_eq; c < static_cast<int>(cons.size()); ++c) {
      bool active = false;
      for (int id : act.ids) if (id == c) { active = true; break; }
      if (active) continue;
      const double gap = cons[c].d - cons[c].n.dot(x);
      const double scaled = gap / (1.0 + std::abs(cons[c].d));
      if (scaled > worst_gap) { worst_gap = scaled; worst = c; }
    }
    if (worst < 0) break;
    if (!activate(worst))
      return report_from(cons, act, p, x, iters, SolveStatus::infeasible);
  }
  return report_from(cons, act, p, x, iters, SolveStatus::success);
}

VectorXd fd_gradient(const std::function<double(const VectorXd&)>& f,
                     const VectorXd& x, double h) {
  VectorXd g(x.size());
  VectorXd xp = x;
  for (int i = 0; i < x.size(); ++i) {
    const double step = h * (1.0 + std::abs(x[i]));
    xp[i] = x[i] + step;
    const double fp = f(xp);
    xp[i] = x[i] - step;
    const double fm = f(xp);
    xp[i] = x[i];
    g[i] = (fp - fm) / (2.0 * step);
  }
  return g;
}

double qp_kkt_residual(const QpProblem& p, const SolveReport& rep) {
  const int n = static_cast<int>(p.H.rows());
  VectorXd stat = p.H * rep.x + p.g;
  if (p.a_eq.rows()) stat += p.a_eq.transpose() * rep.eq_mult;
  if (p.a_in.rows()) stat += p.a_in.transpose() * rep.ineq_mult;
  if (rep.lower_mult.size()) stat -= rep.lower_mult;
  if (rep.upper_mult.size()) stat += rep.upper_mult;
  const double scale = 1.0 + p.g.lpNorm<Eigen::Infinity>();
  double res = stat.lpNorm<Eigen::Infinity>() / scale;

  if (p.a_eq.rows()) {
    const VectorXd r = p.a_eq * rep.x - p.b_eq;
    for (int i = 0; i < r.size(); ++i)
      res = std::max(res, std::abs(r[i]) / (1.0 + std::abs(p.b_eq[i])));
  }
  if (p.a_in.rows()) {
    const VectorXd r = p.a_in * rep.x - p.b_in;
    for (int i = 0; i < r.size(); ++i) {
      const double s = 1.0 + std::abs(p.b_in[i]);
      res = std::max(res, std::max(0.0, r[i]) / s);
      res = std::max(res, std::abs(rep.ineq_mult[i] * r[i]) / s);
      res = std::max(res, -rep.ineq_mult[i]);
    }
  }
  for (int j = 0; j < n; ++j) {
    if (p.lower.size() && std::isfinite(p.lower[j])) {
      const double s = 1.0 + std::abs(p.lower[j]);
      res = std::max(res, (p.lower[j] - rep.x[j]) / s);
      if (rep.lower_mult.size())
        res = std::max(res, std::abs(rep.lower_mult[j] * (rep.x[j] - p.lower[j])) / s);
    }
    if (p.upper.size() && std::isfinite(p.upper[j])) {
      const double s = 1.0 + std::abs(p.upper[j]);
      res = std::max(res, (rep.x[j] - p.upper[j]) / s);
      if (rep.upper_mult.size())
        res = std::max(res, std::abs(rep.upper_mult[j] * (p.upper[j] - rep.x[j])) / s);
    }
  }
  return res;
}

}  // namespace sfield
