#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sfield/solvers.hpp"

// Distributed coordination of agent subproblems sharing one affine coupling
// constraint: sum over agents of their flow sequences equals the per-stage
// budget. Each iteration alternates parallel regularized local solves with
// an equality-constrained coordination QP built from local gradients,
// Hessian approximations and active-constraint Jacobians, followed by a
// full-step primal/dual update.

namespace sfield {

struct AgentSubproblem {
  int dim = 0;  // horizon length; identical for every agent
  std::function<double(const VectorXd&)> f;
  std::function<VectorXd(const VectorXd&)> grad;
  std::function<MatrixXd(const VectorXd&)> hess;  // optional (Gauss-Newton etc.)
  std::function<VectorXd(const VectorXd&)> h;     // optional, h(q) <= 0
  std::function<MatrixXd(const VectorXd&)> h_jac;
  VectorXd lower;
  VectorXd upper;
};

struct AladinConfig {
  double rho0 = 1e2;
  double mu0 = 1e3;
  double epsilon = 1e-5;
  int max_iter = 50;
  double growth = 10.0;     // rho/mu escalation factor
  double penalty_cap = 1e8;
  double local_tol = 1e-8;  // scaled KKT tolerance of the local SQP solves
  VectorXd sigma;           // diagonal scaling; empty => identity
};

struct AgentSensitivities {
  VectorXd g;   // gradient of the agent objective at its local solution
  MatrixXd h;   // positive definite Hessian approximation
  MatrixXd jac; // rows of constraints active at the local solution
};

struct AladinIterTrace {
  int p = 0;
  double coupling_residual = 0.0;
  double primal_residual = 0.0;
  double lambda_norm = 0.0;
  double t_nlp = 0.0, t_sens = 0.0, t_qp = 0.0;  // [s]
};

struct AladinResult {
  std::vector<VectorXd> q;   // per-agent solutions
  VectorXd lambda;
  int iterations = 0;
  bool converged = false;
  double coupling_residual = 0.0;
  double primal_residual = 0.0;
  double max_local_kkt = 0.0;  // scaled, from the independent certification
  double t_nlp_total = 0.0;    // summed per-agent local-solve seconds
  double t_sens_total = 0.0;
  double t_qp_total = 0.0;
  std::vector<AladinIterTrace> trace;
  std::vector<VectorXd> y;   // final primal guesses (warm start for next call)
};

struct CoordinationStep {
  std::vector<VectorXd> dq;
  VectorXd s;
  VectorXd lambda_qp;
};

// min f(q) + lambda'q + rho/2 ||q - y||^2_Sigma subject to the agent's own
// constraints; solved with the SQP kernel.
SolveReport local_step(const AgentSubproblem& agent, const VectorXd& y,
                       const VectorXd& lambda, double rho,
                       const VectorXd& sigma, double tol);

bool check_termination(const std::vector<VectorXd>& local_solutions,
                       const std::vector<VectorXd>& y, double q_total,
                       double epsilon);

AgentSensitivities sensitivities(const AgentSubproblem& agent,
                                 const SolveReport& local, double rho,
                                 const VectorXd& sigma);

// Equality-constrained coordination QP. Throws std::runtime_error
// ("degenerate coordination") on a rank-deficient KKT system.
CoordinationStep coordination_step(const std::vector<AgentSensitivities>& sens,
                                   const std::vector<VectorXd>& local_solutions,
                                   const VectorXd& lambda, double mu,
                                   double q_total);

void primal_dual_update(std::vector<VectorXd>& y, VectorXd& lambda,
                        const std::vector<VectorXd>& local_solutions,
                        const CoordinationStep& step, double beta1 = 1.0,
                        double beta2 = 1.0, double beta3 = 1.0);

AladinResult aladin_solve(const std::vector<AgentSubproblem>& agents,
                          double q_total, const AladinConfig& config,
                          const std::vector<VectorXd>* warm_y = nullptr,
                          const VectorXd* warm_lambda = nullptr);

// Sink agent absorbing the unused share of the budget: cost eps0*||q||^2,
// box [0, q_total] per stage.
AgentSubproblem make_sink_agent(int dim, double q_total, double eps0 = 1e-6);

}  // namespace sfield
