#include "sfield/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace sfield {

double cumulative_cost(const SimulationLog& log, double w_e, double w_q) {
  double total = 0.0;
  for (std::size_t k = 0; k < log.time.size(); ++k) {
    for (int i = 0; i < log.n_loops; ++i) {
      const double e = log.t_out[k][i] - log.t_ref[k];
      total += w_e * e * e + w_q * log.q[k][i] * log.q[k][i];
    }
  }
  return total;
}

double max_tracking_error(const SimulationLog& log, double warmup) {
  double worst = 0.0;
  for (std::size_t k = 0; k < log.time.size(); ++k) {
    if (log.time[k] < warmup) continue;
    for (int i = 0; i < log.n_loops; ++i)
      worst = std::max(worst, std::abs(log.t_out[k][i] - log.t_ref[k]));
  }
  return worst;
}

TimingSummary timing_summary(const SimulationLog& log) {
  TimingSummary s;
  if (log.control_steps.empty()) return s;
  double iters = 0.0;
  for (const auto& r : log.control_steps) {
    s.tau_nlp += r.t_nlp;
    s.tau_qp += r.t_qp;
    s.tau_sum += r.t_nlp + r.t_sens + r.t_qp;
    iters += r.iterations;
    s.max_iterations = std::max(s.max_iterations, r.iterations);
  }
  const double m = static_cast<double>(log.control_steps.size());
  s.tau_nlp /= m;
  s.tau_qp /= m;
  s.tau_sum /= m;
  s.mean_iterations = iters / m;
  return s;
}

double mean_cluster_size(const SimulationLog& log) {
  if (log.control_steps.empty() || log.partitions.empty() || log.n_loops == 0)
    return 0.0;
  double acc = 0.0;
  for (const auto& r : log.control_steps) {
    // partition in effect at control step k: last epoch not after k
    std::size_t active = 0;
    for (std::size_t j = 0; j < log.partitions.size(); ++j)
      if (log.partitions[j].epoch <= r.k) active = j;
    const double n_cl =
        static_cast<double>(log.partitions[active].clusters.size());
    acc += static_cast<double>(log.n_loops) / n_cl;
  }
  return acc / static_cast<double>(log.control_steps.size());
}

PerformanceReport performance_report(const SimulationLog& log, double w_e,
                                     double w_q, double warmup) {
  PerformanceReport rep;
  rep.j_cum = cumulative_cost(log, w_e, w_q);
  rep.e_bar = max_tracking_error(log, warmup);
  rep.mean_cluster_size = mean_cluster_size(log);
  rep.timing = timing_summary(log);
  for (const auto& r : log.control_steps) {
    if (r.held) ++rep.held_steps;
    else if (!r.converged) ++rep.unconverged_steps;
  }
  return rep;
}

}  // namespace sfield
