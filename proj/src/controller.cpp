#include "sfield/controller.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace sfield {

namespace {

constexpr double kBandPenalty = 1e6;

// distance of T to the band [t_min, t_max], signed away from the band
double band_violation(double t, double t_min, double t_max) {
  if (t > t_max) return t - t_max;
  if (t < t_min) return t - t_min;
  return 0.0;
}

std::vector<double> reference_sequence(const ScenarioConfig& cfg, int k) {
  std::vector<double> out(cfg.horizon);
  const int delta_c = cfg.steps_per_control();
  for (int n = 1; n <= cfg.horizon; ++n) {
    const double t = std::min((k + n * delta_c) * cfg.dt_sim, cfg.duration);
    out[n - 1] = cfg.reference_at(t);
  }
  return out;
}

ClusterBoundary make_boundary(const std::vector<int>& members,
                              const std::vector<LoopState>& states,
                              const std::vector<LoopParams>& params,
                              const ExogenousInputs& exo,
                              const std::vector<double>& prev_flows,
                              const ScenarioConfig& cfg, int k) {
  const LumpedCluster lump = lump_cluster(members, states, params, exo,
                                          prev_flows, cfg.q_min, cfg.q_max);
  ClusterBoundary b;
  b.t0 = lump.t0;
  b.eff_power = lump.eff_power;
  b.t_ambient = exo.t_ambient;
  b.size = static_cast<int>(members.size());
  b.params = lump.params;
  b.t_ref = reference_sequence(cfg, k);
  return b;  // t_in filled by the caller
}

}  // namespace

std::vector<double> predict_outlet_sequence(const ClusterBoundary& boundary,
                                            const VectorXd& q_seq,
                                            double dt_control) {
  std::vector<double> t_out;
  MatrixXd jac;
  predict_with_jacobian(boundary, q_seq, dt_control, t_out, jac);
  return t_out;
}

void predict_with_jacobian(const ClusterBoundary& boundary, const VectorXd& q_seq,
                           double dt_control, std::vector<double>& t_out,
                           MatrixXd& jac) {
  const int np = static_cast<int>(q_seq.size());
  const double m = static_cast<double>(boundary.size);
  const double al_m = boundary.params.area * boundary.params.length * m;
  t_out.assign(np, 0.0);
  jac = MatrixXd::Zero(np, np);

  double t = boundary.t0;
  VectorXd dt_dq = VectorXd::Zero(np);  // sensitivity of the current state
  for (int n = 0; n < np; ++n) {
    const double t_mean = 0.5 * (t + boundary.t_in);
    const HtfProperties prop =
        htf_properties(t_mean, boundary.t_ambient, boundary.params);
    const double cap = m * prop.cap;
    const double h_loss = m * prop.h_loss;
    const double q = q_seq[n];

    const double t_next = t + dt_control / cap * (boundary.eff_power - h_loss) -
                          dt_control * q * (t - boundary.t_in) / al_m;

    // d t_next / d t: properties vary with the stage mean temperature
    const double dp_dtm = -0.672 * prop.c + prop.rho * 3.478;
    const double dcap_dt = 0.5 * m * dp_dtm * boundary.params.area * boundary.params.length;
    const double dh_dt =
        0.5 * m * h_loss_derivative(t_mean, boundary.t_ambient, boundary.params);
    const double a = 1.0 +
        dt_control * (-dh_dt * cap - (boundary.eff_power - h_loss) * dcap_dt) / (cap * cap) -
        dt_control * q / al_m;
    const double b = -dt_control * (t - boundary.t_in) / al_m;

    dt_dq = (a * dt_dq).eval();
    dt_dq[n] = b;
    t = t_next;
    t_out[n] = t;
    jac.row(n) = dt_dq.transpose();
  }
}

AgentSubproblem build_cluster_subproblem(const ClusterBoundary& boundary,
                                         const ScenarioConfig& cfg) {
  AgentSubproblem agent;
  agent.dim = cfg.horizon;
  const double m = static_cast<double>(boundary.size);
  const double dt_c = cfg.dt_control;
  const double w_e = cfg.w_e, w_q = cfg.w_q;
  const double t_min = cfg.t_min, t_max = cfg.t_max;

  agent.f = [boundary, dt_c, m, w_e, w_q, t_min, t_max](const VectorXd& q) {
    std::vector<double> t;
    MatrixXd jac;
    predict_with_jacobian(boundary, q, dt_c, t, jac);
    double cost = 0.0;
    for (int n = 0; n < q.size(); ++n) {
      const double e = t[n] - boundary.t_ref[n];
      cost += m * (w_e * e * e + w_q * q[n] * q[n]);
      const double v = band_violation(t[n], t_min, t_max);
      cost += kBandPenalty * v * v;
    }
    return cost;
  };
  agent.grad = [boundary, dt_c, m, w_e, w_q, t_min, t_max](const VectorXd& q) {
    std::vector<double> t;
    MatrixXd jac;
    predict_with_jacobian(boundary, q, dt_c, t, jac);
    VectorXd g = VectorXd::Zero(q.size());
    for (int n = 0; n < q.size(); ++n) {
      const double e = t[n] - boundary.t_ref[n];
      g += 2.0 * m * w_e * e * jac.row(n).transpose();
      g[n] += 2.0 * m * w_q * q[n];
      const double v = band_violation(t[n], t_min, t_max);
      if (v != 0.0) g += 2.0 * kBandPenalty * v * jac.row(n).transpose();
    }
    return g;
  };
  agent.hess = [boundary, dt_c, m, w_e, w_q, t_min, t_max](const VectorXd& q) {
    std::vector<double> t;
    MatrixXd jac;
    predict_with_jacobian(boundary, q, dt_c, t, jac);
    MatrixXd h = 2.0 * m * w_q * MatrixXd::Identity(q.size(), q.size());
    for (int n = 0; n < q.size(); ++n) {
      h += 2.0 * m * w_e * jac.row(n).transpose() * jac.row(n);
      if (band_violation(t[n], t_min, t_max) != 0.0)
        h += 2.0 * kBandPenalty * jac.row(n).transpose() * jac.row(n);
    }
    return h;
  };
  agent.lower = VectorXd::Constant(cfg.horizon, m * cfg.q_min);
  agent.upper = VectorXd::Constant(cfg.horizon, m * cfg.q_max);
  return agent;
}

FlowPlan allocate_flows(const Partition& partition,
                        const std::vector<VectorXd>& q_star, int n_loops,
                        int /*horizon*/) {
  FlowPlan plan;
  plan.q_cluster = q_star;
  plan.q_loop.assign(n_loops, 0.0);
  for (std::size_t j = 0; j < partition.clusters.size(); ++j) {
    const auto& members = partition.clusters[j];
    const double share = q_star[j][0] / static_cast<double>(members.size());
    for (int i : members) plan.q_loop[i] = share;
  }
  return plan;
}

double cluster_objective(const std::vector<ClusterBoundary>& boundaries,
                         const std::vector<VectorXd>& q,
                         const ScenarioConfig& cfg) {
  double total = 0.0;
  for (std::size_t j = 0; j < boundaries.size(); ++j)
    total += build_cluster_subproblem(boundaries[j], cfg).f(q[j]);
  return total;
}

CentralizedResult centralized_reference_solve(
    const std::vector<ClusterBoundary>& boundaries, const ScenarioConfig& cfg) {
  const int n_agents = static_cast<int>(boundaries.size());
  const int np = cfg.horizon;
  const int dim = n_agents * np;

  std::vector<AgentSubproblem> agents;
  agents.reserve(n_agents);
  for (const auto& b : boundaries) agents.push_back(build_cluster_subproblem(b, cfg));

  NlpProblem p;
  p.dim = dim;
  p.f = [agents, np](const VectorXd& x) {
    double total = 0.0;
    for (std::size_t j = 0; j < agents.size(); ++j)
      total += agents[j].f(x.segment(static_cast<int>(j) * np, np));
    return total;
  };
  p.grad = [agents, np, dim](const VectorXd& x) {
    VectorXd g = VectorXd::Zero(dim);
    for (std::size_t j = 0; j < agents.size(); ++j)
      g.segment(static_cast<int>(j) * np, np) =
          agents[j].grad(x.segment(static_cast<int>(j) * np, np));
    return g;
  };
  p.hess = [agents, np, dim](const VectorXd& x) {
    MatrixXd h = MatrixXd::Zero(dim, dim);
    for (std::size_t j = 0; j < agents.size(); ++j) {
      const int off = static_cast<int>(j) * np;
      h.block(off, off, np, np) = agents[j].hess(x.segment(off, np));
    }
    return h;
  };
  // per-stage budget: sum_j q_j(n) <= Q_T
  const double q_total = cfg.q_total;
  p.h = [n_agents, np, q_total](const VectorXd& x) {
    VectorXd hv = VectorXd::Constant(np, -q_total);
    for (int j = 0; j < n_agents; ++j) hv += x.segment(j * np, np);
    return hv;
  };
  p.h_jac = [n_agents, np, dim](const VectorXd&) {
    MatrixXd jac = MatrixXd::Zero(np, dim);
    for (int j = 0; j < n_agents; ++j)
      jac.block(0, j * np, np, np) = MatrixXd::Identity(np, np);
    return jac;
  };
  p.lower.resize(dim);
  p.upper.resize(dim);
  for (int j = 0; j < n_agents; ++j) {
    p.lower.segment(j * np, np) = agents[j].lower;
    p.upper.segment(j * np, np) = agents[j].upper;
  }

  int total_loops = 0;
  for (const auto& b : boundaries) total_loops += b.size;
  VectorXd x0(dim);
  const double q_start = std::min(cfg.q_max, cfg.q_total / std::max(total_loops, 1));
  for (int j = 0; j < n_agents; ++j)
    x0.segment(j * np, np) = VectorXd::Constant(np, boundaries[j].size * q_start);

  const SolveReport rep = solve_nlp(p, x0, 1e-9, 400);
  CentralizedResult out;
  out.status = rep.status;
  out.objective = p.f(rep.x);
  out.q.resize(n_agents);
  for (int j = 0; j < n_agents; ++j) out.q[j] = rep.x.segment(j * np, np);
  return out;
}

SimulationLog run_closed_loop(const ScenarioConfig& cfg,
                              const ClosedLoopOptions& options) {
  const int n = cfg.n_loops;
  const int total = cfg.total_steps();
  const int delta_c = cfg.steps_per_control();
  const int delta_cl = cfg.steps_per_cluster();
  const int np = cfg.horizon;

  std::vector<LoopState> states(n);
  for (int i = 0; i < n; ++i) {
    states[i].t_out = cfg.t_initial_per_loop.empty() ? cfg.t_initial
                                                     : cfg.t_initial_per_loop[i];
    states[i].q_applied = cfg.q_min;
  }
  std::vector<double> flows_prev(n, cfg.q_min);  // applied during [k-1, k)
  std::vector<double> flows(n, cfg.q_min);       // applied during [k, k+1)
  std::vector<double> t_outs(n);
  for (int i = 0; i < n; ++i) t_outs[i] = states[i].t_out;

  double t_in = cfg.t_in_initial_set
                    ? cfg.t_in_initial
                    : mixed_outlet(t_outs, flows_prev) - 80.0;

  // initial partition by mode
  Partition partition;
  const bool repartition = options.mode == ControllerMode::dynamic &&
                           !options.frozen_partition.has_value();
  if (options.frozen_partition) {
    partition = *options.frozen_partition;
  } else if (options.mode == ControllerMode::fine) {
    for (int i = 0; i < n; ++i) partition.clusters.push_back({i});
  } else if (options.mode == ControllerMode::coarse) {
    partition.clusters.emplace_back();
    for (int i = 0; i < n; ++i) partition.clusters[0].push_back(i);
  }

  SimulationLog log;
  log.n_loops = n;
  log.dt_sim = cfg.dt_sim;
  log.w_e = cfg.w_e;
  log.w_q = cfg.w_q;

  AladinConfig alcfg = options.aladin;
  alcfg.epsilon = cfg.epsilon;

  // warm-start bookkeeping
  Partition prev_partition;
  std::vector<VectorXd> prev_solution;  // per agent incl. sink, length Np
  VectorXd prev_lambda;
  int epoch_counter = 0;

  if (!repartition && !partition.clusters.empty()) {
    partition.epoch = 0;
    log.partitions.push_back(partition);
  }

  for (int k = 0; k < total; ++k) {
    const ExogenousInputs exo = sample_exogenous(cfg, k);
    const double t_ref_k = cfg.reference_at(k * cfg.dt_sim);

    if (k % delta_c == 0) {
      if (repartition && k % delta_cl == 0) {
        FieldState field;
        field.loops = states;
        for (int i = 0; i < n; ++i) field.loops[i].t_out = t_outs[i];
        field.t_in = t_in;
        const auto feats = build_feature_dataset(field, exo, cfg.loop_params);
        Partition fresh = select_partition(feats, cfg.n_cl_max,
                                           cfg.seed + static_cast<std::uint64_t>(epoch_counter));
        fresh.epoch = k;
        ++epoch_counter;
        partition = fresh;
        log.partitions.push_back(partition);
      }

      const int n_cl = static_cast<int>(partition.clusters.size());
      std::vector<LoopState> lump_states = states;
      for (int i = 0; i < n; ++i) {
        lump_states[i].t_out = t_outs[i];
        lump_states[i].q_applied = flows_prev[i];
      }

      std::vector<ClusterBoundary> boundaries;
      std::vector<AgentSubproblem> agents;
      for (const auto& members : partition.clusters) {
        ClusterBoundary b = make_boundary(members, lump_states, cfg.loop_params,
                                          exo, flows_prev, cfg, k);
        b.t_in = t_in;
        boundaries.push_back(b);
        agents.push_back(build_cluster_subproblem(b, cfg));
      }
      agents.push_back(make_sink_agent(np, cfg.q_total));

      // warm start: shift the previous solution when the partition held,
      // otherwise seed from the flows currently applied
      std::vector<VectorXd> y(agents.size());
      const bool same_partition = partition == prev_partition &&
                                  prev_solution.size() == agents.size();
      for (std::size_t j = 0; j < agents.size(); ++j) {
        if (same_partition) {
          VectorXd shifted(np);
          shifted.head(np - 1) = prev_solution[j].tail(np - 1);
          shifted[np - 1] = prev_solution[j][np - 1];
          y[j] = shifted;
        } else if (j < partition.clusters.size()) {
          double sum = 0.0;
          for (int i : partition.clusters[j]) sum += flows_prev[i];
          sum = std::clamp(sum, agents[j].lower[0], agents[j].upper[0]);
          y[j] = VectorXd::Constant(np, sum);
        } else {
          double used = 0.0;
          for (int i = 0; i < n; ++i) used += flows_prev[i];
          y[j] = VectorXd::Constant(np, std::max(0.0, cfg.q_total - used));
        }
      }
      if (prev_lambda.size() != np) prev_lambda = VectorXd::Zero(np);

      ControlStepRecord rec;
      rec.k = k;
      try {
        const AladinResult res = aladin_solve(agents, cfg.q_total, alcfg, &y,
                                              &prev_lambda);
        rec.iterations = res.iterations;
        rec.converged = res.converged;
        rec.coupling_residual = res.coupling_residual;
        rec.max_local_kkt = res.max_local_kkt;
        rec.t_nlp = res.t_nlp_total;
        rec.t_sens = res.t_sens_total;
        rec.t_qp = res.t_qp_total;
        rec.sink_flow = res.q.back()[0];

        std::vector<VectorXd> cluster_q(res.q.begin(), res.q.end() - 1);
        FlowPlan plan = allocate_flows(partition, cluster_q, n, np);

        // enforce the hard budget: shave any coordination slack from loops
        // with room above q_min
        double sum = std::accumulate(plan.q_loop.begin(), plan.q_loop.end(), 0.0);
        rec.budget_gap = std::abs(sum + rec.sink_flow - cfg.q_total);
        double excess = sum - cfg.q_total;
        if (excess > 0.0) {
          double slack = 0.0;
          for (double qi : plan.q_loop) slack += qi - cfg.q_min;
          if (slack > 0.0)
            for (double& qi : plan.q_loop) qi -= excess * (qi - cfg.q_min) / slack;
        }
        for (double& qi : plan.q_loop) qi = std::clamp(qi, cfg.q_min, cfg.q_max);

        flows = plan.q_loop;
        prev_solution = res.q;
        prev_lambda = res.lambda;
        prev_partition = partition;
      } catch (const std::exception&) {
        rec.held = true;  // keep the previous flows
        prev_solution.clear();
        prev_partition = Partition{};
      }
      log.control_steps.push_back(rec);
    }

    const double t_mix = mixed_outlet(t_outs, flows_prev);

    log.time.push_back(k * cfg.dt_sim);
    log.t_out.push_back(t_outs);
    log.q.push_back(flows);
    log.t_in.push_back(t_in);
    log.t_out_mix.push_back(t_mix);
    log.irradiance.push_back(exo.irradiance);
    log.t_ambient.push_back(exo.t_ambient);
    log.t_ref.push_back(t_ref_k);
    double cost = 0.0;
    for (int i = 0; i < n; ++i) {
      const double e = t_outs[i] - t_ref_k;
      cost += cfg.w_e * e * e + cfg.w_q * flows[i] * flows[i];
    }
    log.stage_cost.push_back(cost);
    log.j_cum_running += cost;

    // advance the plant by one Euler step
    std::vector<double> next(n);
    for (int i = 0; i < n; ++i) {
      LoopState s;
      s.t_out = t_outs[i];
      s.q_applied = flows[i];
      next[i] = loop_step(s, cfg.loop_params[i], t_in, exo.irradiance[i],
                          exo.t_ambient, cfg.dt_sim);
    }
    t_in = inlet_step(t_in, t_mix, cfg.dt_sim);
    t_outs = next;
    flows_prev = flows;
    for (int i = 0; i < n; ++i) states[i].t_out = t_outs[i];
  }
  return log;
}

}  // namespace sfield
