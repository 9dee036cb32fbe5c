#pragma once

#include <string>
#include <vector>

#include "sfield/partitioning.hpp"

// Closed-loop time series and per-control-step solver statistics, with CSV
// (one row per simulation step) and JSON summary serialization.

namespace sfield {

struct ControlStepRecord {
  int k = 0;                 // sim step index
  int iterations = 0;
  bool converged = false;
  bool held = false;         // solver failed; previous flows kept
  double coupling_residual = 0.0;
  double max_local_kkt = 0.0;
  double sink_flow = 0.0;    // first-stage sink share [m^3/s]
  double budget_gap = 0.0;   // | sum q + sink - Q_T | at stage 0
  double t_nlp = 0.0, t_sens = 0.0, t_qp = 0.0;  // [s]
};

struct SimulationLog {
  int n_loops = 0;
  double dt_sim = 0.0;
  double w_e = 0.0, w_q = 0.0;

  std::vector<double> time;                    // [s]
  std::vector<std::vector<double>> t_out;      // [step][loop]
  std::vector<std::vector<double>> q;          // [step][loop]
  std::vector<double> t_in;
  std::vector<double> t_out_mix;
  std::vector<std::vector<double>> irradiance; // [step][loop]
  std::vector<double> t_ambient;
  std::vector<double> t_ref;
  std::vector<double> stage_cost;

  std::vector<Partition> partitions;           // one per clustering epoch
  std::vector<ControlStepRecord> control_steps;

  double j_cum_running = 0.0;  // accumulated by the controller as it runs
};

void write_log_csv(const SimulationLog& log, const std::string& path);
SimulationLog read_log_csv(const std::string& path);

void write_summary_json(const SimulationLog& log, const std::string& path);

}  // namespace sfield
