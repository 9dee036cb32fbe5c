#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sfield/aladin.hpp"
#include "sfield/log.hpp"
#include "sfield/partitioning.hpp"
#include "sfield/scenario.hpp"
#include "sfield/thermal.hpp"

// Receding-horizon control of the collector field: lumped cluster MPC
// subproblems coordinated through the flow budget, uniform intra-cluster
// flow allocation, and the closed-loop driver. A monolithic NLP over all
// loops is kept as the reference controller.

namespace sfield {

// Everything a cluster agent needs to predict its outlet temperature:
// boundary data frozen at the current control instant plus the reference
// sequence over the horizon.
struct ClusterBoundary {
  double t0 = 0.0;         // flow-weighted cluster outlet [degC]
  double eff_power = 0.0;  // [W]
  double t_in = 0.0;       // [degC], held over the horizon
  double t_ambient = 0.0;  // [degC]
  int size = 1;            // |C|
  std::vector<double> t_ref;  // reference at stages 1..N_p
  LoopParams params;
};

struct FlowPlan {
  std::vector<VectorXd> q_cluster;  // optimal per-cluster sequences
  std::vector<double> q_loop;       // applied per-loop flows for [k, k+delta_c)
};

enum class ControllerMode { dynamic, fine, coarse };

// Iterates the lumped Euler prediction model over the horizon with the
// boundary quantities held at their current values; properties re-evaluated
// at each predicted stage's mean temperature. Returns T(1..N_p).
std::vector<double> predict_outlet_sequence(const ClusterBoundary& boundary,
                                            const VectorXd& q_seq,
                                            double dt_control);

// Same recursion plus the lower-triangular Jacobian dT(n)/dq(m).
void predict_with_jacobian(const ClusterBoundary& boundary, const VectorXd& q_seq,
                           double dt_control, std::vector<double>& t_out,
                           MatrixXd& jac);

// Agent subproblem for one cluster: tracking + flow effort cost scaled by
// the cluster size, the temperature band as a quadratic penalty on the
// band violation (slack eliminated analytically), box bounds |C|*q_min ..
// |C|*q_max, Gauss-Newton Hessian.
AgentSubproblem build_cluster_subproblem(const ClusterBoundary& boundary,
                                         const ScenarioConfig& cfg);

FlowPlan allocate_flows(const Partition& partition,
                        const std::vector<VectorXd>& q_star, int n_loops,
                        int horizon);

// Monolithic NLP over all loops (all-singleton partition) with the flow
// budget as a hard per-stage inequality. Oracle for the coordinated solve.
struct CentralizedResult {
  std::vector<VectorXd> q;  // per-loop sequences
  double objective = 0.0;
  SolveStatus status = SolveStatus::success;
};
CentralizedResult centralized_reference_solve(const std::vector<ClusterBoundary>& boundaries,
                                              const ScenarioConfig& cfg);

double cluster_objective(const std::vector<ClusterBoundary>& boundaries,
                         const std::vector<VectorXd>& q,
                         const ScenarioConfig& cfg);

struct ClosedLoopOptions {
  ControllerMode mode = ControllerMode::dynamic;
  std::optional<Partition> frozen_partition;  // overrides mode bookkeeping
  AladinConfig aladin;
};

SimulationLog run_closed_loop(const ScenarioConfig& cfg,
                              const ClosedLoopOptions& options);

}  // namespace sfield
