#include "sfield/thermal.hpp"

#include <cmath>
#include <stdexcept>

namespace sfield {

HtfProperties htf_properties(double t_mean, double t_ambient,
                             const LoopParams& params) {
  HtfProperties out;
  out.rho = 903.0 - 0.672 * t_mean;
  out.c = 1820.0 + 3.478 * t_mean;
  out.p = out.rho * out.c;
  out.cap = out.p * params.area * params.length;
  const double dt = t_mean - t_ambient;
  out.h_loss = params.surface * (0.00249 * dt * dt - 0.06133 * dt);
  return out;
}

double h_loss_derivative(double t_mean, double t_ambient,
                         const LoopParams& params) {
  const double dt = t_mean - t_ambient;
  return params.surface * (2.0 * 0.00249 * dt - 0.06133);
}

double loop_step(const LoopState& state, const LoopParams& params,
                 double t_in, double irradiance, double t_ambient, double dt) {
  const double t_mean = 0.5 * (state.t_out + t_in);
  const HtfProperties prop = htf_properties(t_mean, t_ambient, params);
  const double eff_power = params.eta * params.surface * irradiance;
  return state.t_out +
         dt / prop.cap * (eff_power - prop.h_loss) -
         dt / prop.cap * state.q_applied * prop.p * (state.t_out - t_in);
}

double inlet_step(double t_in, double t_out_mix, double dt) {
  return t_in + dt / 600.0 * ((t_out_mix - 80.0) - t_in);
}

double mixed_outlet(const std::vector<double>& t_outs,
                    const std::vector<double>& prev_flows) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < t_outs.size(); ++i) {
    num += prev_flows[i] * t_outs[i];
    den += prev_flows[i];
  }
  if (den <= 0.0) throw std::invalid_argument("degenerate mixing");
  return num / den;
}

LumpedCluster lump_cluster(const std::vector<int>& members,
                           const std::vector<LoopState>& states,
                           const std::vector<LoopParams>& params,
                           const ExogenousInputs& exo,
                           const std::vector<double>& prev_flows,
                           double q_min, double q_max) {
  if (members.empty()) throw std::invalid_argument("empty cluster");
  LumpedCluster out;
  out.members = members;
  double num = 0.0, den = 0.0;
  for (int i : members) {
    const LoopParams& p = params[i];
    out.eff_power += p.eta * p.surface * exo.irradiance[i];
    num += prev_flows[i] * states[i].t_out;
    den += prev_flows[i];
  }
  if (den <= 0.0) throw std::invalid_argument("zero cluster flow");
  out.t0 = num / den;
  out.q_lower = static_cast<double>(members.size()) * q_min;
  out.q_upper = static_cast<double>(members.size()) * q_max;
  out.params = params[members.front()];
  return out;
}

double cluster_step(double t_out, const LumpedCluster& cluster, double t_in,
                    double t_ambient, double q_total, double dt) {
  const double n = static_cast<double>(cluster.members.size());
  const double t_mean = 0.5 * (t_out + t_in);
  const HtfProperties prop = htf_properties(t_mean, t_ambient, cluster.params);
  const double cap = n * prop.cap;
  const double h_loss = n * prop.h_loss;
  return t_out + dt / cap * (cluster.eff_power - h_loss) -
         dt / cap * q_total * prop.p * (t_out - t_in);
}

}  // namespace sfield
