#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sfield/thermal.hpp"

// Scenario definition: plant parameters, controller settings and exogenous
// input sources (synthetic clear-sky generator with cloud events, or CSV
// profiles). The scenario file is a flat "key = value" document; see
// README.md for the schema. Flow values may carry an "l/s" suffix and are
// converted to m^3/s on load.

namespace sfield {

struct CloudEvent {
  std::vector<int> loops;  // affected loop indices (0-based)
  double start = 0.0;      // [s]
  double end = 0.0;        // [s]
  double attenuation = 0.0;  // fraction of irradiance removed, 0..1
  double ramp = 0.0;       // linear ramp in/out duration [s]
};

enum class IrradianceSource { synthetic, file };

struct ScenarioConfig {
  int n_loops = 10;
  double duration = 25200.0;   // [s]
  double dt_sim = 0.5;         // integration step [s]
  double dt_control = 30.0;    // control sampling time [s]
  double dt_cluster = 150.0;   // partition refresh period [s]
  int n_cl_max = 5;
  int horizon = 5;             // prediction horizon N_p

  double q_min = 0.2e-3;       // [m^3/s]
  double q_max = 2.0e-3;       // [m^3/s]
  double q_total = 9.0e-3;     // plant flow budget Q_T [m^3/s]
  double t_min = 220.0;        // [degC]
  double t_max = 305.0;        // [degC]
  double w_e = 1.0e-3;
  double w_q = 1.0;
  double epsilon = 1.0e-5;     // coordination termination tolerance

  std::vector<LoopParams> loop_params;  // size n_loops
  double t_ref = 250.0;                 // constant reference [degC]
  std::vector<double> t_ref_profile;    // optional, one value per sim step
  double t_initial = 240.0;             // initial loop outlet [degC]
  std::vector<double> t_initial_per_loop;  // optional override
  bool t_in_initial_set = false;
  double t_in_initial = 0.0;   // defaults to t_out_mix(0) - 80 when unset

  IrradianceSource source = IrradianceSource::synthetic;
  std::string irradiance_file;
  double peak = 850.0;         // clear-sky apex [W/m^2]
  double day_length = 0.0;     // half-sine period [s]; 0 => duration
  double day_offset = 0.0;     // sim start within the solar day [s]
  std::vector<CloudEvent> events;
  double t_ambient = 25.0;
  std::uint64_t seed = 1;

  // Loaded CSV profile (file source): one row per sample, held
  // piecewise-constant until the next row.
  std::vector<double> file_times;
  std::vector<std::vector<double>> file_irradiance;  // [row][loop]
  std::vector<double> file_ambient;
  std::vector<double> file_t_ref;  // optional T_ref column

  int steps_per_control() const;   // delta^c
  int steps_per_cluster() const;   // delta^cl
  int total_steps() const;
  double reference_at(double t) const;
};

// Parses and validates a scenario file. Omitted numeric fields default to
// the values above. Throws std::runtime_error with a line/field diagnostic
// on parse errors or invariant violations.
ScenarioConfig load_scenario(const std::string& path);

// Writes every field back out in the same key/value format.
void save_scenario(const ScenarioConfig& cfg, const std::string& path);

// Exogenous inputs at simulation step k (t = k * dt_sim). Throws
// std::out_of_range when k is outside the simulated duration.
ExogenousInputs sample_exogenous(const ScenarioConfig& cfg, int k);

// Clear-sky half-sine irradiance table with per-loop cloud attenuation.
// I(t) = peak * sin(pi * t / duration), clipped at zero; events attenuate
// affected loops with linear ramps. One row per dt seconds.
std::vector<std::vector<double>> synth_profile(int n_loops, double duration,
                                               double peak,
                                               const std::vector<CloudEvent>& events,
                                               std::uint64_t seed, double dt);

// Attenuation factor (0..1 multiplier on clear-sky irradiance) for one loop
// at time t given the active cloud events.
double cloud_factor(const std::vector<CloudEvent>& events, int loop, double t);

}  // namespace sfield
