#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "sfield/solvers.hpp"

using namespace sfield;

namespace {

// Brute-force oracle for small box QPs: enumerate every active set of bound
// constraints, solve the resulting equality system, keep the best KKT point.
double brute_force_box_qp(const MatrixXd& h, const VectorXd& g,
                          const VectorXd& lo, const VectorXd& hi, VectorXd& xbest) {
  const int n = static_cast<int>(g.size());
  double best = std::numeric_limits<double>::infinity();
  for (int mask = 0; mask < (1 << n); ++mask) {
    for (int signs = 0; signs < (1 << n); ++signs) {
      VectorXd x(n);
      std::vector<int> free_idx;
      for (int i = 0; i < n; ++i) {
        if (mask & (1 << i)) x[i] = (signs & (1 << i)) ? hi[i] : lo[i];
        else free_idx.push_back(i);
      }
      const int m = static_cast<int>(free_idx.size());
      if (m) {
        MatrixXd hf(m, m);
        VectorXd rhs(m);
        for (int a = 0; a < m; ++a) {
          rhs[a] = -g[free_idx[a]];
          for (int i = 0; i < n; ++i)
            if (mask & (1 << i)) rhs[a] -= h(free_idx[a], i) * x[i];
          for (int b = 0; b < m; ++b) hf(a, b) = h(free_idx[a], free_idx[b]);
        }
        const VectorXd xf = hf.fullPivLu().solve(rhs);
        for (int a = 0; a < m; ++a) x[free_idx[a]] = xf[a];
      }
      bool feasible = true;
      for (int i = 0; i < n; ++i)
        if (x[i] < lo[i] - 1e-9 || x[i] > hi[i] + 1e-9) feasible = false;
      if (!feasible) continue;
      const double val = 0.5 * x.dot(h * x) + g.dot(x);
      if (val < best) {
        best = val;
        xbest = x;
      }
    }
  }
  return best;
}

MatrixXd random_spd(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  MatrixXd a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = nd(rng);
  return a * a.transpose() + 0.5 * MatrixXd::Identity(n, n);
}

}  // namespace

TEST_CASE("unconstrained quadratic") {
  QpProblem p;
  p.H = 2.0 * MatrixXd::Identity(1, 1);
  p.g = VectorXd::Constant(1, -6.0);  // min (x-3)^2
  const SolveReport r = solve_qp(p);
  REQUIRE(r.status == SolveStatus::success);
  CHECK(r.x[0] == doctest::Approx(3.0));
}

TEST_CASE("equality-constrained quadratic with hand multiplier") {
  QpProblem p;
  p.H = 2.0 * MatrixXd::Identity(2, 2);
  p.g = VectorXd::Zero(2);
  p.a_eq = MatrixXd::Ones(1, 2);
  p.b_eq = VectorXd::Constant(1, 2.0);
  const SolveReport r = solve_qp(p);
  REQUIRE(r.status == SolveStatus::success);
  CHECK(r.x[0] == doctest::Approx(1.0));
  CHECK(r.x[1] == doctest::Approx(1.0));
  CHECK(r.eq_mult[0] == doctest::Approx(-2.0));
  CHECK(qp_kkt_residual(p, r) < 1e-9);
}

TEST_CASE("single inequality with hand multiplier") {
  // min (x-1)^2 s.t. x <= 0
  QpProblem p;
  p.H = 2.0 * MatrixXd::Identity(1, 1);
  p.g = VectorXd::Constant(1, -2.0);
  p.a_in = MatrixXd::Ones(1, 1);
  p.b_in = VectorXd::Zero(1);
  const SolveReport r = solve_qp(p);
  REQUIRE(r.status == SolveStatus::success);
  CHECK(r.x[0] == doctest::Approx(0.0));
  CHECK(r.ineq_mult[0] == doctest::Approx(2.0));
  CHECK(r.active_ineq == std::vector<int>{0});
}

TEST_CASE("infeasible and unbounded detection") {
  SUBCASE("inconsistent equalities") {
    QpProblem p;
    p.H = MatrixXd::Identity(1, 1);
    p.g = VectorXd::Zero(1);
    p.a_eq = MatrixXd::Ones(2, 1);
    p.b_eq = VectorXd(2);
    p.b_eq << 1.0, 2.0;
    CHECK(solve_qp(p).status == SolveStatus::infeasible);
  }
  SUBCASE("zero curvature along a free direction") {
    QpProblem p;
    p.H = MatrixXd::Zero(1, 1);
    p.g = VectorXd::Constant(1, 1.0);
    CHECK(solve_qp(p).status == SolveStatus::unbounded);
  }
}

TEST_CASE("box QPs against exhaustive active-set enumeration") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = 3;
    QpProblem p;
    p.H = random_spd(n, rng);
    p.g = VectorXd::NullaryExpr(n, [&](int) { return u(rng); });
    p.lower = VectorXd::NullaryExpr(n, [&](int) { return -std::abs(u(rng)); });
    p.upper = VectorXd::NullaryExpr(n, [&](int) { return std::abs(u(rng)) + 0.1; });
    const SolveReport r = solve_qp(p);
    REQUIRE(r.status == SolveStatus::success);
    VectorXd x_oracle;
    const double f_oracle = brute_force_box_qp(p.H, p.g, p.lower, p.upper, x_oracle);
    const double f = 0.5 * r.x.dot(p.H * r.x) + p.g.dot(r.x);
    CHECK(f == doctest::Approx(f_oracle).epsilon(1e-8));
    CHECK((r.x - x_oracle).lpNorm<Eigen::Infinity>() < 1e-6);
    CHECK(qp_kkt_residual(p, r) < 1e-7);
  }
}

TEST_CASE("mixed equality, inequality and bounds") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 25; ++trial) {
    const int n = 4;
    QpProblem p;
    p.H = random_spd(n, rng);
    p.g = VectorXd::NullaryExpr(n, [&](int) { return u(rng); });
    p.a_eq = MatrixXd::Ones(1, n);
    p.b_eq = VectorXd::Constant(1, 1.0);
    p.a_in = MatrixXd::NullaryExpr(2, n, [&](int, int) { return u(rng); });
    p.b_in = VectorXd::Constant(2, 2.0);
    p.lower = VectorXd::Constant(n, -3.0);
    p.upper = VectorXd::Constant(n, 3.0);
    const SolveReport r = solve_qp(p);
    REQUIRE(r.status == SolveStatus::success);
    CHECK((p.a_eq * r.x - p.b_eq).lpNorm<Eigen::Infinity>() < 1e-8);
    CHECK(((p.a_in * r.x - p.b_in).array() < 1e-8).all());
    CHECK(qp_kkt_residual(p, r) < 1e-7);
  }
}

TEST_CASE("finite-difference gradient utility") {
  CHECK(fd_gradient([](const VectorXd& x) { return x[0] * x[0]; },
                    VectorXd::Constant(1, 3.0), 1e-5)[0] ==
        doctest::Approx(6.0).epsilon(1e-7));
  VectorXd xy(2);
  xy << 2.0, 5.0;
  const VectorXd g =
      fd_gradient([](const VectorXd& x) { return x[0] * x[1]; }, xy);
  CHECK(g[0] == doctest::Approx(5.0).epsilon(1e-6));
  CHECK(g[1] == doctest::Approx(2.0).epsilon(1e-6));
  // exact on affine functions regardless of step
  const VectorXd gl = fd_gradient(
      [](const VectorXd& x) { return 3.0 * x[0] - 2.0; }, VectorXd::Zero(1), 0.1);
  CHECK(gl[0] == doctest::Approx(3.0));
}

TEST_CASE("SQP on smooth problems") {
  SUBCASE("quadratic with a curved inequality") {
    // min (x-2)^2 s.t. x^2 <= 1 -> x = 1, multiplier 1
    NlpProblem p;
    p.dim = 1;
    p.f = [](const VectorXd& x) { return (x[0] - 2.0) * (x[0] - 2.0); };
    p.grad = [](const VectorXd& x) {
      return VectorXd::Constant(1, 2.0 * (x[0] - 2.0));
    };
    p.h = [](const VectorXd& x) { return VectorXd::Constant(1, x[0] * x[0] - 1.0); };
    p.h_jac = [](const VectorXd& x) {
      return MatrixXd::Constant(1, 1, 2.0 * x[0]);
    };
    const SolveReport r = solve_nlp(p, VectorXd::Zero(1));
    REQUIRE(r.status == SolveStatus::success);
    CHECK(r.x[0] == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(r.ineq_mult[0] == doctest::Approx(1.0).epsilon(1e-4));
    CHECK(nlp_kkt_residual(p, r) < 1e-6);
  }
  SUBCASE("active lower bound") {
    NlpProblem p;
    p.dim = 1;
    p.f = [](const VectorXd& x) { return x[0]; };
    p.grad = [](const VectorXd&) { return VectorXd::Constant(1, 1.0); };
    p.lower = VectorXd::Zero(1);
    p.upper = VectorXd::Ones(1);
    const SolveReport r = solve_nlp(p, VectorXd::Constant(1, 0.5));
    REQUIRE(r.status == SolveStatus::success);
    CHECK(r.x[0] == doctest::Approx(0.0));
    CHECK(r.active_lower == std::vector<int>{0});
  }
  SUBCASE("Rosenbrock") {
    NlpProblem p;
    p.dim = 2;
    p.f = [](const VectorXd& x) {
      const double a = 1.0 - x[0], b = x[1] - x[0] * x[0];
      return a * a + 100.0 * b * b;
    };
    p.grad = [](const VectorXd& x) {
      VectorXd g(2);
      g[0] = -2.0 * (1.0 - x[0]) - 400.0 * x[0] * (x[1] - x[0] * x[0]);
      g[1] = 200.0 * (x[1] - x[0] * x[0]);
      return g;
    };
    const SolveReport r = solve_nlp(p, VectorXd::Constant(2, -1.0), 1e-8, 500);
    REQUIRE(r.status == SolveStatus::success);
    CHECK(r.x[0] == doctest::Approx(1.0).epsilon(1e-5));
    CHECK(r.x[1] == doctest::Approx(1.0).epsilon(1e-5));
  }
  SUBCASE("analytic Hessian path") {
    NlpProblem p;
    p.dim = 2;
    p.f = [](const VectorXd& x) { return x.squaredNorm() + x[0] * x[1]; };
    p.grad = [](const VectorXd& x) {
      VectorXd g(2);
      g << 2.0 * x[0] + x[1], 2.0 * x[1] + x[0];
      return g;
    };
    p.hess = [](const VectorXd&) {
      MatrixXd h(2, 2);
      h << 2.0, 1.0, 1.0, 2.0;
      return h;
    };
    const SolveReport r = solve_nlp(p, VectorXd::Constant(2, 4.0));
    REQUIRE(r.status == SolveStatus::success);
    CHECK(r.x.lpNorm<Eigen::Infinity>() < 1e-7);
    CHECK(r.iterations <= 3);  // Newton on a quadratic
  }
}
