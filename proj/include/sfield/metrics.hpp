#pragma once

#include <string>

#include "sfield/log.hpp"

// Closed-loop performance figures computed from a simulation log: cumulative
// tracking/effort cost, worst tracking error after warm-up, solver timing
// averages per control instant.

namespace sfield {

struct TimingSummary {
  double tau_nlp = 0.0;   // mean per-instant local solve time [s]
  double tau_qp = 0.0;    // mean per-instant coordination time [s]
  double tau_sum = 0.0;   // mean total (locals + sensitivities + QP) [s]
  double mean_iterations = 0.0;
  int max_iterations = 0;
};

struct PerformanceReport {
  double j_cum = 0.0;
  double e_bar = 0.0;           // max |T_out_i - T_ref| after warm-up [degC]
  double mean_cluster_size = 0.0;
  TimingSummary timing;
  int held_steps = 0;
  int unconverged_steps = 0;
};

// sum over steps and loops of w_e*e^2 + w_q*q^2, recomputed from the series.
double cumulative_cost(const SimulationLog& log, double w_e, double w_q);

// max |T_out_i(k) - T_ref(k)| over all loops, ignoring the first
// `warmup` seconds of the run.
double max_tracking_error(const SimulationLog& log, double warmup = 300.0);

TimingSummary timing_summary(const SimulationLog& log);

// loops-per-active-cluster averaged over control instants.
double mean_cluster_size(const SimulationLog& log);

PerformanceReport performance_report(const SimulationLog& log, double w_e,
                                     double w_q, double warmup = 300.0);

}  // namespace sfield
