#include "sfield/solvers.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>

namespace sfield {

namespace {

VectorXd clamp_box(VectorXd x, const VectorXd& lo, const VectorXd& hi) {
  for (int i = 0; i < x.size(); ++i) {
    if (lo.size()) x[i] = std::max(x[i], lo[i]);
    if (hi.size()) x[i] = std::min(x[i], hi[i]);
  }
  return x;
}

MatrixXd make_positive_definite(const MatrixXd& h, double floor_ev) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (h + h.transpose()));
  if (es.eigenvalues().minCoeff() >= floor_ev) return 0.5 * (h + h.transpose());
  VectorXd ev = es.eigenvalues().cwiseMax(floor_ev);
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

double constraint_violation(const VectorXd& hv) {
  double s = 0.0;
  for (int i = 0; i < hv.size(); ++i) s += std::max(0.0, hv[i]);
  return s;
}

}  // namespace

SolveReport solve_nlp(const NlpProblem& p, const VectorXd& x0, double tol,
                      int max_iter) {
  const int n = p.dim;
  VectorXd x = clamp_box(x0, p.lower, p.upper);
  MatrixXd b = MatrixXd::Identity(n, n);
  double penalty = 1.0;
  int curvature_failures = 0;

  VectorXd g = p.grad(x);
  VectorXd hv = p.h ? p.h(x) : VectorXd();
  MatrixXd jac = p.h ? p.h_jac(x) : MatrixXd(0, n);

  SolveReport best;
  best.x = x;
  best.status = SolveStatus::max_iter;
  double best_res = std::numeric_limits<double>::infinity();

  // active set at the returned point: |h_i| <= 1e-6 * (1 + |bound|)
  auto fill_active = [&p, n](SolveReport& rep) {
    rep.active_ineq.clear();
    rep.active_lower.clear();
    rep.active_upper.clear();
    const VectorXd hv_r = p.h ? p.h(rep.x) : VectorXd();
    for (int i = 0; i < hv_r.size(); ++i)
      if (std::abs(hv_r[i]) <= 1e-6) rep.active_ineq.push_back(i);
    for (int j = 0; j < n; ++j) {
      if (p.lower.size() &&
          std::abs(rep.x[j] - p.lower[j]) <= 1e-6 * (1.0 + std::abs(p.lower[j])))
        rep.active_lower.push_back(j);
      if (p.upper.size() &&
          std::abs(rep.x[j] - p.upper[j]) <= 1e-6 * (1.0 + std::abs(p.upper[j])))
        rep.active_upper.push_back(j);
    }
  };

  for (int iter = 1; iter <= max_iter; ++iter) {
    QpProblem qp;
    qp.H = p.hess ? make_positive_definite(p.hess(x), 1e-8) : b;
    qp.g = g;
    qp.a_eq.resize(0, n);
    qp.b_eq.resize(0);
    qp.a_in = jac;
    qp.b_in = -hv;
    if (p.lower.size()) qp.lower = p.lower - x;
    if (p.upper.size()) qp.upper = p.upper - x;

    SolveReport sub = solve_qp(qp);
    if (sub.status == SolveStatus::infeasible && hv.size()) {
      // linearization infeasible: ask only for no worsening of violated rows
      qp.b_in = (-hv).cwiseMax(0.0);
      sub = solve_qp(qp);
    }
    if (sub.status != SolveStatus::success) {
      best.status = SolveStatus::degenerate;
      best.iterations = iter;
      fill_active(best);
      return best;
    }
    const VectorXd d = sub.x;

    // scaled KKT residual of the NLP at x with the QP multipliers
    VectorXd stat = g;
    if (hv.size()) stat += jac.transpose() * sub.ineq_mult;
    if (sub.lower_mult.size()) stat -= sub.lower_mult;
    if (sub.upper_mult.size()) stat += sub.upper_mult;
    double res = stat.lpNorm<Eigen::Infinity>();
    for (int i = 0; i < hv.size(); ++i) {
      res = std::max(res, hv[i]);
      res = std::max(res, std::abs(sub.ineq_mult[i] * hv[i]));
    }
    const double scale = 1.0 + g.lpNorm<Eigen::Infinity>();
    if (res / scale < best_res) {
      best_res = res / scale;
      best.x = x;
      best.hess_approx = qp.H;
      best.eq_mult = sub.eq_mult;
      best.ineq_mult = sub.ineq_mult;
      best.lower_mult = sub.lower_mult;
      best.upper_mult = sub.upper_mult;
      best.iterations = iter;
      best.kkt_residual = res / scale;
    }
    if (res <= tol * scale) {
      best.status = SolveStatus::success;
      fill_active(best);
      return best;
    }

    // l1 merit line search
    double mult_norm = sub.ineq_mult.size() ? sub.ineq_mult.lpNorm<Eigen::Infinity>() : 0.0;
    penalty = std::max(penalty, 1.1 * mult_norm + 1e-3);
    const double f0 = p.f(x);
    const double viol0 = constraint_violation(hv);
    const double merit0 = f0 + penalty * viol0;
    const double descent = g.dot(d) - penalty * viol0;
    double alpha = 1.0;
    VectorXd x_new;
    while (true) {
      x_new = clamp_box(x + alpha * d, p.lower, p.upper);
      const double merit = p.f(x_new) +
          penalty * (p.h ? constraint_violation(p.h(x_new)) : 0.0);
      if (merit <= merit0 + 1e-4 * alpha * descent || alpha < 1e-12) break;
      alpha *= 0.5;
    }

    const VectorXd g_new = p.grad(x_new);
    const VectorXd hv_new = p.h ? p.h(x_new) : VectorXd();
    const MatrixXd jac_new = p.h ? p.h_jac(x_new) : MatrixXd(0, n);

    if (!p.hess) {
      // damped BFGS (Powell) on the Lagrangian gradient difference
      const VectorXd s = x_new - x;
      if (s.lpNorm<Eigen::Infinity>() > 1e-15 * (1.0 + x.lpNorm<Eigen::Infinity>())) {
        VectorXd y = g_new - g;
        if (hv.size()) y += (jac_new - jac).transpose() * sub.ineq_mult;
        const VectorXd bs = b * s;
        const double sbs = s.dot(bs);
        double sy = s.dot(y);
        if (sy < 0.2 * sbs) {
          const double theta = 0.8 * sbs / (sbs - sy);
          y = theta * y + (1.0 - theta) * bs;
          sy = s.dot(y);
          if (++curvature_failures >= 2) {
            const double sc = std::clamp(y.dot(y) / std::max(sy, 1e-16), 1e-4, 1e8);
            b = sc * MatrixXd::Identity(n, n);
            curvature_failures = 0;
          } else if (sy > 1e-16 && sbs > 1e-16) {
            b += y * y.transpose() / sy - bs * bs.transpose() / sbs;
          }
        } else {
          curvature_failures = 0;
          if (sy > 1e-16 && sbs > 1e-16)
            b += y * y.transpose() / sy - bs * bs.transpose() / sbs;
        }
      }
    }

    x = x_new;
    g = g_new;
    hv = hv_new;
    jac = jac_new;
  }
  fill_active(best);
  return best;
}

double nlp_kkt_residual(const NlpProblem& p, const SolveReport& rep) {
  const VectorXd g = p.grad(rep.x);
  const VectorXd hv = p.h ? p.h(rep.x) : VectorXd();
  VectorXd stat = g;
  if (hv.size()) stat += p.h_jac(rep.x).transpose() * rep.ineq_mult;
  if (rep.lower_mult.size()) stat -= rep.lower_mult;
  if (rep.upper_mult.size()) stat += rep.upper_mult;
  const double scale = 1.0 + g.lpNorm<Eigen::Infinity>();
  double res = stat.lpNorm<Eigen::Infinity>() / scale;
  // complementarity scaled by the multiplier so a penalty-sized multiplier
  // times a tolerance-sized slack does not read as a large violation
  for (int i = 0; i < hv.size(); ++i) {
    res = std::max(res, hv[i]);
    res = std::max(res, std::abs(rep.ineq_mult[i] * hv[i]) /
                            (1.0 + std::abs(rep.ineq_mult[i])));
    res = std::max(res, -rep.ineq_mult[i]);
  }
  for (int j = 0; j < p.dim; ++j) {
    if (p.lower.size()) {
      res = std::max(res, (p.lower[j] - rep.x[j]) / (1.0 + std::abs(p.lower[j])));
      if (rep.lower_mult.size())
        res = std::max(res, std::abs(rep.lower_mult[j] * (rep.x[j] - p.lower[j])) /
                                (1.0 + std::abs(rep.lower_mult[j])));
    }
    if (p.upper.size()) {
      res = std::max(res, (rep.x[j] - p.upper[j]) / (1.0 + std::abs(p.upper[j])));
      if (rep.upper_mult.size())
        res = std::max(res, std::abs(rep.upper_mult[j] * (p.upper[j] - rep.x[j])) /
                                (1.0 + std::abs(rep.upper_mult[j])));
    }
  }
  return res;
}

}  // namespace sfield
