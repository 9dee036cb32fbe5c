#include "sfield/aladin.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace sfield {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

NlpProblem augmented_problem(const AgentSubproblem& agent, const VectorXd& y,
                             const VectorXd& lambda, double rho,
                             const VectorXd& sigma) {
  NlpProblem p;
  p.dim = agent.dim;
  p.f = [&agent, y, lambda, rho, sigma](const VectorXd& q) {
    const VectorXd d = q - y;
    return agent.f(q) + lambda.dot(q) + 0.5 * rho * d.dot(sigma.cwiseProduct(d));
  };
  p.grad = [&agent, y, lambda, rho, sigma](const VectorXd& q) {
    return (agent.grad(q) + lambda + rho * sigma.cwiseProduct(q - y)).eval();
  };
  if (agent.hess) {
    p.hess = [&agent, rho, sigma](const VectorXd& q) {
      MatrixXd h = agent.hess(q);
      h += rho * MatrixXd(sigma.asDiagonal());
      return h;
    };
  }
  p.h = agent.h;
  p.h_jac = agent.h_jac;
  p.lower = agent.lower;
  p.upper = agent.upper;
  return p;
}

}  // namespace

SolveReport local_step(const AgentSubproblem& agent, const VectorXd& y,
                       const VectorXd& lambda, double rho,
                       const VectorXd& sigma, double tol) {
  const NlpProblem p = augmented_problem(agent, y, lambda, rho, sigma);
  return solve_nlp(p, y, tol);
}

bool check_termination(const std::vector<VectorXd>& local_solutions,
                       const std::vector<VectorXd>& y, double q_total,
                       double epsilon) {
  const int dim = static_cast<int>(local_solutions.front().size());
  VectorXd coupling = VectorXd::Constant(dim, -q_total);
  VectorXd primal = VectorXd::Zero(dim);
  for (std::size_t j = 0; j < local_solutions.size(); ++j) {
    coupling += local_solutions[j];
    primal += local_solutions[j] - y[j];
  }
  return coupling.norm() <= epsilon && primal.norm() <= epsilon;
}

AgentSensitivities sensitivities(const AgentSubproblem& agent,
                                 const SolveReport& local, double rho,
                                 const VectorXd& sigma) {
  AgentSensitivities out;
  out.g = agent.grad(local.x);
  if (agent.hess) {
    out.h = agent.hess(local.x);
  } else {
    // the local SQP approximated the augmented Hessian; strip the proximal
    // term before handing curvature to the coordination QP
    out.h = local.hess_approx - rho * MatrixXd(sigma.asDiagonal());
  }
  // positive definite floor
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (out.h + out.h.transpose()));
  VectorXd ev = es.eigenvalues().cwiseMax(1e-8);
  out.h = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();

  // active-constraint Jacobian: h rows plus unit rows for active bounds
  const int n = agent.dim;
  std::vector<VectorXd> rows;
  if (agent.h) {
    const MatrixXd jac = agent.h_jac(local.x);
    for (int i : local.active_ineq) rows.push_back(jac.row(i).transpose());
  }
  for (int j : local.active_lower) rows.push_back(VectorXd::Unit(n, j));
  for (int j : local.active_upper) rows.push_back(VectorXd::Unit(n, j));
  out.jac.resize(static_cast<int>(rows.size()), n);
  for (std::size_t r = 0; r < rows.size(); ++r)
    out.jac.row(static_cast<int>(r)) = rows[r].transpose();
  return out;
}

CoordinationStep coordination_step(const std::vector<AgentSensitivities>& sens,
                                   const std::vector<VectorXd>& local_solutions,
                                   const VectorXd& lambda, double mu,
                                   double q_total) {
  const int n_agents = static_cast<int>(sens.size());
  const int dim = static_cast<int>(local_solutions.front().size());
  const int n_vars = n_agents * dim + dim;  // [dq_0 .. dq_{M-1}, s]

  QpProblem qp;
  qp.H = MatrixXd::Zero(n_vars, n_vars);
  qp.g = VectorXd::Zero(n_vars);
  int n_active = 0;
  for (const auto& s : sens) n_active += static_cast<int>(s.jac.rows());
  qp.a_eq = MatrixXd::Zero(dim + n_active, n_vars);
  qp.b_eq = VectorXd::Zero(dim + n_active);

  VectorXd residual = VectorXd::Constant(dim, q_total);
  for (const auto& q : local_solutions) residual -= q;

  for (int j = 0; j < n_agents; ++j) {
    qp.H.block(j * dim, j * dim, dim, dim) = sens[j].h;
    qp.g.segment(j * dim, dim) = sens[j].g;
    qp.a_eq.block(0, j * dim, dim, dim) = MatrixXd::Identity(dim, dim);
  }
  const int s_off = n_agents * dim;
  qp.H.block(s_off, s_off, dim, dim) = mu * MatrixXd::Identity(dim, dim);
  qp.g.segment(s_off, dim) = lambda;
  qp.a_eq.block(0, s_off, dim, dim) = -MatrixXd::Identity(dim, dim);
  qp.b_eq.head(dim) = residual;

  int row = dim;
  for (int j = 0; j < n_agents; ++j) {
    const int m = static_cast<int>(sens[j].jac.rows());
    if (m) qp.a_eq.block(row, j * dim, m, dim) = sens[j].jac;
    row += m;
  }

  const SolveReport rep = solve_qp(qp);
  if (rep.status != SolveStatus::success)
    throw std::runtime_error("degenerate coordination");

  CoordinationStep out;
  out.dq.resize(n_agents);
  for (int j = 0; j < n_agents; ++j) out.dq[j] = rep.x.segment(j * dim, dim);
  out.s = rep.x.segment(s_off, dim);
  out.lambda_qp = rep.eq_mult.head(dim);
  return out;
}

void primal_dual_update(std::vector<VectorXd>& y, VectorXd& lambda,
                        const std::vector<VectorXd>& local_solutions,
                        const CoordinationStep& step, double beta1,
                        double beta2, double beta3) {
  for (std::size_t j = 0; j < y.size(); ++j)
    y[j] += beta1 * (local_solutions[j] - y[j]) + beta2 * step.dq[j];
  lambda += beta3 * (step.lambda_qp - lambda);
}

AladinResult aladin_solve(const std::vector<AgentSubproblem>& agents,
                          double q_total, const AladinConfig& config,
                          const std::vector<VectorXd>* warm_y,
                          const VectorXd* warm_lambda) {
  if (agents.empty()) throw std::invalid_argument("no agents");
  if (q_total <= 0.0) throw std::invalid_argument("q_total must be positive");
  const int dim = agents.front().dim;
  const int n_agents = static_cast<int>(agents.size());

  VectorXd sigma = config.sigma.size() ? config.sigma : VectorXd::Ones(dim);
  double rho = config.rho0, mu = config.mu0;

  std::vector<VectorXd> y(n_agents);
  if (warm_y && static_cast<int>(warm_y->size()) == n_agents) {
    y = *warm_y;
  } else {
    // spread the budget evenly, clipped into each agent's box
    for (int j = 0; j < n_agents; ++j) {
      VectorXd v = VectorXd::Constant(dim, q_total / n_agents);
      if (agents[j].lower.size()) v = v.cwiseMax(agents[j].lower);
      if (agents[j].upper.size()) v = v.cwiseMin(agents[j].upper);
      y[j] = v;
    }
  }
  VectorXd lambda = warm_lambda && warm_lambda->size() == dim
                        ? *warm_lambda
                        : VectorXd::Zero(dim);

  AladinResult out;
  std::vector<SolveReport> reports(n_agents);
  std::vector<VectorXd> q(n_agents);
  std::vector<VectorXd> y_cert = y;
  VectorXd lambda_cert = lambda;
  double prev_coupling = std::numeric_limits<double>::infinity();
  int worse_streak = 0;
  double rho_used = rho;

  for (int p = 0; p < config.max_iter; ++p) {
    AladinIterTrace tr;
    tr.p = p;
    rho_used = rho;

    // step 1: parallelizable local solves (pure per-agent functions)
    for (int j = 0; j < n_agents; ++j) {
      const auto t0 = std::chrono::steady_clock::now();
      reports[j] = local_step(agents[j], y[j], lambda, rho, sigma, config.local_tol);
      q[j] = reports[j].x;
      tr.t_nlp += seconds_since(t0);
    }
    // the reports are certified later against the inputs they were solved with
    y_cert = y;
    lambda_cert = lambda;

    // step 2: termination test on the fresh local solutions
    VectorXd coupling = VectorXd::Constant(dim, -q_total);
    VectorXd primal = VectorXd::Zero(dim);
    for (int j = 0; j < n_agents; ++j) {
      coupling += q[j];
      primal += q[j] - y[j];
    }
    tr.coupling_residual = coupling.norm();
    tr.primal_residual = primal.norm();
    tr.lambda_norm = lambda.norm();
    out.t_nlp_total += tr.t_nlp;
    out.iterations = p + 1;

    if (tr.coupling_residual <= config.epsilon &&
        tr.primal_residual <= config.epsilon) {
      out.converged = true;
      out.trace.push_back(tr);
      break;
    }

    // step 3: sensitivity evaluations
    std::vector<AgentSensitivities> sens(n_agents);
    {
      const auto t0 = std::chrono::steady_clock::now();
      for (int j = 0; j < n_agents; ++j)
        sens[j] = sensitivities(agents[j], reports[j], rho, sigma);
      tr.t_sens = seconds_since(t0);
      out.t_sens_total += tr.t_sens;
    }

    // step 4: coordination QP
    CoordinationStep step;
    {
      const auto t0 = std::chrono::steady_clock::now();
      step = coordination_step(sens, q, lambda, mu, q_total);
      tr.t_qp = seconds_since(t0);
      out.t_qp_total += tr.t_qp;
    }

    // step 5: full-step primal/dual update
    primal_dual_update(y, lambda, q, step);

    // escape hatch when the coupling residual keeps growing
    if (tr.coupling_residual > prev_coupling) {
      if (++worse_streak >= 3) {
        rho = std::min(rho * config.growth, config.penalty_cap);
        mu = std::min(mu * config.growth, config.penalty_cap);
        worse_streak = 0;
      }
    } else {
      worse_streak = 0;
    }
    prev_coupling = tr.coupling_residual;
    out.trace.push_back(tr);
  }

  out.q = q;
  out.y = y;
  out.lambda = lambda;
  if (!out.trace.empty()) {
    out.coupling_residual = out.trace.back().coupling_residual;
    out.primal_residual = out.trace.back().primal_residual;
  }

  // independent certification of the local KKT systems at the returned point
  for (int j = 0; j < n_agents; ++j) {
    const NlpProblem p =
        augmented_problem(agents[j], y_cert[j], lambda_cert, rho_used, sigma);
    out.max_local_kkt = std::max(out.max_local_kkt, nlp_kkt_residual(p, reports[j]));
  }
  return out;
}

AgentSubproblem make_sink_agent(int dim, double q_total, double eps0) {
  AgentSubproblem sink;
  sink.dim = dim;
  sink.f = [eps0](const VectorXd& q) { return eps0 * q.squaredNorm(); };
  sink.grad = [eps0](const VectorXd& q) { return (2.0 * eps0 * q).eval(); };
  sink.hess = [eps0, dim](const VectorXd&) {
    return (2.0 * eps0 * MatrixXd::Identity(dim, dim)).eval();
  };
  sink.lower = VectorXd::Zero(dim);
  sink.upper = VectorXd::Constant(dim, q_total);
  return sink;
}

}  // namespace sfield
