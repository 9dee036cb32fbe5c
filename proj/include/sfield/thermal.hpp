#pragma once

#include <vector>

// Thermal model of a parabolic-trough collector field: per-loop outlet
// temperature dynamics, temperature-dependent HTF properties (Therminol 55
// correlations), lumped cluster models, recirculation of the field outlet
// through the steam generator back to the inlet.
//
// Units are SI throughout: temperatures in degC, flows in m^3/s, powers in W.

namespace sfield {

// Temperature-dependent fluid/loop properties evaluated at a mean
// temperature t_mean = (t_out + t_in)/2.
struct HtfProperties {
  double rho;    // density [kg/m^3]
  double c;      // specific heat [J/(kg degC)]
  double p;      // volumetric heat capacity rho*c [J/(m^3 degC)]
  double cap;    // loop thermal capacity rho*c*A*L [J/degC]
  double h_loss; // heat-loss power [W]
};

struct LoopParams {
  double eta = 0.6;        // optical/geometric efficiency [-]
  double area = 5.067e-4;  // tube cross section [m^2]
  double length = 142.0;   // loop length [m]
  double surface = 267.4;  // reflective surface [m^2]
};

struct LoopState {
  double t_out = 0.0;      // outlet temperature [degC]
  double q_applied = 0.0;  // flow currently pumped through the loop [m^3/s]
};

struct FieldState {
  std::vector<LoopState> loops;
  double t_in = 0.0;       // common inlet temperature [degC]
  double t_out_mix = 0.0;  // flow-weighted field outlet [degC]
};

struct ExogenousInputs {
  std::vector<double> irradiance; // per-loop DNI [W/m^2]
  double t_ambient = 25.0;        // [degC]
};

HtfProperties htf_properties(double t_mean, double t_ambient,
                             const LoopParams& params);

// d(h_loss)/d(t_mean) at fixed ambient temperature; used by the analytic
// prediction-model gradients.
double h_loss_derivative(double t_mean, double t_ambient,
                         const LoopParams& params);

// One explicit Euler step of the loop energy balance. Properties are
// evaluated at the current mean temperature (t_out + t_in)/2.
double loop_step(const LoopState& state, const LoopParams& params,
                 double t_in, double irradiance, double t_ambient, double dt);

// First-order lag of the inlet temperature towards (field outlet - 80),
// time constant 600 s, discretized by explicit Euler.
double inlet_step(double t_in, double t_out_mix, double dt);

// Flow-weighted mean of the loop outlet temperatures. Throws
// std::invalid_argument("degenerate mixing") when the total flow is zero.
double mixed_outlet(const std::vector<double>& t_outs,
                    const std::vector<double>& prev_flows);

// Lumped model of a cluster of loops. The effective solar power is the sum
// over members, thermal capacity and losses scale with the member count,
// and the initial temperature is the flow-weighted mean of the members'
// outlets (weights = previously applied flows).
struct LumpedCluster {
  std::vector<int> members;
  double t0 = 0.0;         // initial cluster outlet [degC]
  double eff_power = 0.0;  // sum of eta_i * S * I_i [W]
  double q_lower = 0.0;    // |C| * q_min
  double q_upper = 0.0;    // |C| * q_max
  LoopParams params;       // per-member geometry (loops share A, L, S)
};

LumpedCluster lump_cluster(const std::vector<int>& members,
                           const std::vector<LoopState>& states,
                           const std::vector<LoopParams>& params,
                           const ExogenousInputs& exo,
                           const std::vector<double>& prev_flows,
                           double q_min, double q_max);

// One Euler step of the lumped cluster model (member count scales capacity
// and losses; q is the total flow pumped to the cluster).
double cluster_step(double t_out, const LumpedCluster& cluster, double t_in,
                    double t_ambient, double q_total, double dt);

}  // namespace sfield
