#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "sfield/aladin.hpp"

using namespace sfield;

namespace {

AgentSubproblem scalar_quadratic(double target) {
  AgentSubproblem a;
  a.dim = 1;
  a.f = [target](const VectorXd& q) {
    return (q[0] - target) * (q[0] - target);
  };
  a.grad = [target](const VectorXd& q) {
    return VectorXd::Constant(1, 2.0 * (q[0] - target));
  };
  a.hess = [](const VectorXd&) { return 2.0 * MatrixXd::Identity(1, 1); };
  return a;
}

}  // namespace

TEST_CASE("local step behaviors") {
  const VectorXd sigma = VectorXd::Ones(1);
  SUBCASE("vanishing regularization recovers the local optimum") {
    const AgentSubproblem a = scalar_quadratic(1.0);
    const SolveReport r =
        local_step(a, VectorXd::Zero(1), VectorXd::Zero(1), 1e-8, sigma, 1e-10);
    CHECK(r.x[0] == doctest::Approx(1.0).epsilon(1e-6));
  }
  SUBCASE("pure proximal point inside the box") {
    AgentSubproblem a;
    a.dim = 1;
    a.f = [](const VectorXd&) { return 0.0; };
    a.grad = [](const VectorXd&) { return VectorXd::Zero(1); };
    a.lower = VectorXd::Zero(1);
    a.upper = VectorXd::Ones(1);
    const SolveReport r = local_step(a, VectorXd::Constant(1, 0.7),
                                     VectorXd::Zero(1), 1.0, sigma, 1e-10);
    CHECK(r.x[0] == doctest::Approx(0.7).epsilon(1e-8));
  }
  SUBCASE("price shifts the optimum") {
    const AgentSubproblem a = scalar_quadratic(1.0);
    const SolveReport r = local_step(a, VectorXd::Zero(1),
                                     VectorXd::Ones(1), 1e-8, sigma, 1e-10);
    CHECK(r.x[0] == doctest::Approx(0.5).epsilon(1e-6));
  }
}

TEST_CASE("termination test") {
  const std::vector<VectorXd> q = {VectorXd::Constant(1, 0.5),
                                   VectorXd::Constant(1, 1.5)};
  CHECK(check_termination(q, q, 2.0, 1e-5));
  CHECK_FALSE(check_termination(q, q, 2.0 + 2e-5, 1e-5));
  const std::vector<VectorXd> y = {VectorXd::Constant(1, 0.5 + 0.25e-5),
                                   VectorXd::Constant(1, 1.5 + 0.25e-5)};
  CHECK(check_termination(q, y, 2.0, 1e-5));
}

TEST_CASE("sensitivities") {
  const AgentSubproblem a = scalar_quadratic(1.0);
  SolveReport rep;
  rep.x = VectorXd::Constant(1, 0.5);
  const AgentSensitivities s = sensitivities(a, rep, 1.0, VectorXd::Ones(1));
  CHECK(s.g[0] == doctest::Approx(-1.0));
  CHECK(s.h(0, 0) == doctest::Approx(2.0));
  CHECK(s.jac.rows() == 0);

  SUBCASE("active bound contributes a unit row") {
    AgentSubproblem boxed = scalar_quadratic(1.0);
    boxed.lower = VectorXd::Zero(1);
    boxed.upper = VectorXd::Constant(1, 0.3);
    SolveReport at_bound;
    at_bound.x = VectorXd::Constant(1, 0.3);
    at_bound.active_upper = {0};
    const AgentSensitivities sb =
        sensitivities(boxed, at_bound, 1.0, VectorXd::Ones(1));
    REQUIRE(sb.jac.rows() == 1);
    CHECK(sb.jac(0, 0) == doctest::Approx(1.0));
  }
}

TEST_CASE("coordination step on the two-agent toy") {
  // f1 = (q-1)^2, f2 = (q-2)^2, budget 2; at the coupled optimum the step
  // vanishes and the QP multiplier equals the hand value 1
  std::vector<AgentSensitivities> sens(2);
  sens[0].g = VectorXd::Constant(1, 2.0 * (0.5 - 1.0));
  sens[1].g = VectorXd::Constant(1, 2.0 * (1.5 - 2.0));
  sens[0].h = sens[1].h = 2.0 * MatrixXd::Identity(1, 1);
  sens[0].jac = sens[1].jac = MatrixXd(0, 1);
  const std::vector<VectorXd> q = {VectorXd::Constant(1, 0.5),
                                   VectorXd::Constant(1, 1.5)};
  const CoordinationStep step =
      coordination_step(sens, q, VectorXd::Ones(1), 1e6, 2.0);
  CHECK(step.dq[0].lpNorm<Eigen::Infinity>() < 1e-6);
  CHECK(step.dq[1].lpNorm<Eigen::Infinity>() < 1e-6);
  CHECK(step.s.lpNorm<Eigen::Infinity>() < 1e-6);
  CHECK(step.lambda_qp[0] == doctest::Approx(1.0).epsilon(1e-4));

  SUBCASE("zero gradients and satisfied coupling give a zero step") {
    sens[0].g.setZero();
    sens[1].g.setZero();
    const CoordinationStep z =
        coordination_step(sens, q, VectorXd::Zero(1), 1e3, 2.0);
    CHECK(z.dq[0].lpNorm<Eigen::Infinity>() < 1e-9);
    CHECK(z.s.lpNorm<Eigen::Infinity>() < 1e-9);
  }
}

TEST_CASE("primal dual update") {
  std::vector<VectorXd> y = {VectorXd::Zero(1), VectorXd::Zero(1)};
  VectorXd lambda = VectorXd::Zero(1);
  const std::vector<VectorXd> q = {VectorXd::Constant(1, 0.5),
                                   VectorXd::Constant(1, 1.5)};
  CoordinationStep step;
  step.dq = {VectorXd::Zero(1), VectorXd::Zero(1)};
  step.lambda_qp = VectorXd::Ones(1);

  SUBCASE("full step lands on the local solutions") {
    primal_dual_update(y, lambda, q, step);
    CHECK(y[0][0] == doctest::Approx(0.5));
    CHECK(y[1][0] == doctest::Approx(1.5));
    CHECK(lambda[0] == doctest::Approx(1.0));
  }
  SUBCASE("zero step sizes keep the iterate") {
    primal_dual_update(y, lambda, q, step, 0.0, 0.0, 0.0);
    CHECK(y[0][0] == doctest::Approx(0.0));
    CHECK(lambda[0] == doctest::Approx(0.0));
  }
}

TEST_CASE("toy consensus problem converges to the hand solution") {
  const std::vector<AgentSubproblem> agents = {scalar_quadratic(1.0),
                                               scalar_quadratic(2.0)};
  AladinConfig cfg;
  const AladinResult r = aladin_solve(agents, 2.0, cfg);
  REQUIRE(r.converged);
  CHECK(r.q[0][0] == doctest::Approx(0.5).epsilon(1e-4));
  CHECK(r.q[1][0] == doctest::Approx(1.5).epsilon(1e-4));
  CHECK(r.lambda[0] == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(r.coupling_residual <= cfg.epsilon);
  CHECK(r.iterations <= 5);
  CHECK(r.max_local_kkt < 10.0 * cfg.epsilon);

  SUBCASE("warm start at the solution terminates immediately") {
    const AladinResult again = aladin_solve(agents, 2.0, cfg, &r.y, &r.lambda);
    CHECK(again.converged);
    CHECK(again.iterations == 1);
  }
}

TEST_CASE("sink absorbs surplus budget") {
  AgentSubproblem a = scalar_quadratic(0.8);
  a.lower = VectorXd::Zero(1);
  a.upper = VectorXd::Constant(1, 2.0);
  const std::vector<AgentSubproblem> agents = {a, make_sink_agent(1, 5.0)};
  AladinConfig cfg;
  const AladinResult r = aladin_solve(agents, 5.0, cfg);
  REQUIRE(r.converged);
  CHECK(r.q[0][0] == doctest::Approx(0.8).epsilon(1e-3));
  CHECK(r.q[1][0] == doctest::Approx(4.2).epsilon(1e-3));
  CHECK(std::abs(r.lambda[0]) < 1e-4);  // slack budget has a near-zero price
}

TEST_CASE("active boxes at the coupled optimum") {
  AgentSubproblem a1 = scalar_quadratic(5.0);
  a1.lower = VectorXd::Zero(1);
  a1.upper = VectorXd::Ones(1);
  AgentSubproblem a2 = scalar_quadratic(0.0);
  a2.lower = VectorXd::Zero(1);
  a2.upper = VectorXd::Constant(1, 3.0);
  const AladinResult r = aladin_solve({a1, a2}, 2.0, AladinConfig{});
  REQUIRE(r.converged);
  CHECK(r.q[0][0] == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(r.q[1][0] == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("random multi-agent quadratics match the monolithic QP") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(0.5, 2.5);
  std::uniform_int_distribution<int> n_agents_d(2, 4), dim_d(1, 3);
  for (int trial = 0; trial < 20; ++trial) {
    const int m = n_agents_d(rng), dim = dim_d(rng);
    std::vector<AgentSubproblem> agents;
    std::vector<MatrixXd> hs;
    std::vector<VectorXd> gs;
    for (int j = 0; j < m; ++j) {
      MatrixXd h = MatrixXd::Zero(dim, dim);
      for (int i = 0; i < dim; ++i) h(i, i) = u(rng);
      VectorXd g = VectorXd::NullaryExpr(dim, [&](int) { return u(rng) - 1.5; });
      AgentSubproblem a;
      a.dim = dim;
      a.f = [h, g](const VectorXd& q) { return 0.5 * q.dot(h * q) + g.dot(q); };
      a.grad = [h, g](const VectorXd& q) { return (h * q + g).eval(); };
      a.hess = [h](const VectorXd&) { return h; };
      agents.push_back(a);
      hs.push_back(h);
      gs.push_back(g);
    }
    const double budget = u(rng) * m;
    AladinConfig tight;
    tight.epsilon = 1e-8;  // oracle comparison needs 1e-6 primal accuracy
    const AladinResult r = aladin_solve(agents, budget, tight);
    REQUIRE(r.converged);

    QpProblem mono;
    mono.H = MatrixXd::Zero(m * dim, m * dim);
    mono.g = VectorXd::Zero(m * dim);
    mono.a_eq = MatrixXd::Zero(dim, m * dim);
    mono.b_eq = VectorXd::Constant(dim, budget);
    for (int j = 0; j < m; ++j) {
      mono.H.block(j * dim, j * dim, dim, dim) = hs[j];
      mono.g.segment(j * dim, dim) = gs[j];
      mono.a_eq.block(0, j * dim, dim, dim) = MatrixXd::Identity(dim, dim);
    }
    const SolveReport mono_r = solve_qp(mono);
    REQUIRE(mono_r.status == SolveStatus::success);
    for (int j = 0; j < m; ++j)
      CHECK((r.q[j] - mono_r.x.segment(j * dim, dim)).lpNorm<Eigen::Infinity>() <
            1e-6);
  }
}

TEST_CASE("input validation") {
  CHECK_THROWS(aladin_solve({}, 1.0, AladinConfig{}));
  CHECK_THROWS(aladin_solve({scalar_quadratic(1.0)}, -1.0, AladinConfig{}));
}
