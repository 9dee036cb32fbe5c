#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

// Dense optimization kernels for the small per-agent problems: an active-set
// convex QP solver (equality-only problems go through one symmetric KKT
// factorization), an SQP solver for box/inequality-constrained smooth NLPs,
// and central-difference utilities used as verification oracles.

namespace sfield {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class SolveStatus { success, infeasible, unbounded, max_iter, degenerate };

std::string to_string(SolveStatus s);

struct QpProblem {
  MatrixXd H;       // symmetric
  VectorXd g;
  MatrixXd a_eq;    // a_eq x = b_eq (0 rows when absent)
  VectorXd b_eq;
  MatrixXd a_in;    // a_in x <= b_in (0 rows when absent)
  VectorXd b_in;
  VectorXd lower;   // empty => unbounded below
  VectorXd upper;
};

struct SolveReport {
  VectorXd x;
  VectorXd eq_mult;            // one per a_eq row
  VectorXd ineq_mult;          // one per a_in row / h component, >= 0
  VectorXd lower_mult;         // >= 0
  VectorXd upper_mult;         // >= 0
  std::vector<int> active_ineq;   // indices of active a_in rows / h rows
  std::vector<int> active_lower;  // variable indices at their lower bound
  std::vector<int> active_upper;
  int iterations = 0;
  SolveStatus status = SolveStatus::success;
  double kkt_residual = 0.0;
  MatrixXd hess_approx;  // solve_nlp only: Hessian model at the solution
};

SolveReport solve_qp(const QpProblem& problem, double tol = 1e-10);

struct NlpProblem {
  int dim = 0;
  std::function<double(const VectorXd&)> f;
  std::function<VectorXd(const VectorXd&)> grad;
  // inequality h(x) <= 0; both may be null when unconstrained
  std::function<VectorXd(const VectorXd&)> h;
  std::function<MatrixXd(const VectorXd&)> h_jac;
  // optional analytic/Gauss-Newton Hessian; damped BFGS when absent
  std::function<MatrixXd(const VectorXd&)> hess;
  VectorXd lower;  // empty => unbounded
  VectorXd upper;
};

// SQP with damped-BFGS (Powell) Hessian updates, an l1 merit line search
// and active-set QP subproblems. Convergence when the scaled KKT residual
// drops below tol; the scale is 1 + ||grad f||_inf.
SolveReport solve_nlp(const NlpProblem& problem, const VectorXd& x0,
                      double tol = 1e-8, int max_iter = 200);

VectorXd fd_gradient(const std::function<double(const VectorXd&)>& f,
                     const VectorXd& x, double h = 1e-6);

// Recomputes stationarity / feasibility / complementarity of a report from
// the raw problem data; independent of the solve path. Returns the largest
// scaled violation.
double qp_kkt_residual(const QpProblem& problem, const SolveReport& report);
double nlp_kkt_residual(const NlpProblem& problem, const SolveReport& report);

}  // namespace sfield
