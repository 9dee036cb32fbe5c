#include "sfield/log.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace sfield {

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void write_log_csv(const SimulationLog& log, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  const int n = log.n_loops;
  out << "t";
  for (int i = 1; i <= n; ++i) out << ",T_out_" << i;
  for (int i = 1; i <= n; ++i) out << ",q_" << i;
  out << ",T_in,T_out_mix";
  for (int i = 1; i <= n; ++i) out << ",I_" << i;
  out << ",T_amb,T_ref,stage_cost\n";
  for (std::size_t k = 0; k < log.time.size(); ++k) {
    out << num(log.time[k]);
    for (int i = 0; i < n; ++i) out << ',' << num(log.t_out[k][i]);
    for (int i = 0; i < n; ++i) out << ',' << num(log.q[k][i]);
    out << ',' << num(log.t_in[k]) << ',' << num(log.t_out_mix[k]);
    for (int i = 0; i < n; ++i) out << ',' << num(log.irradiance[k][i]);
    out << ',' << num(log.t_ambient[k]) << ',' << num(log.t_ref[k]) << ','
        << num(log.stage_cost[k]) << '\n';
  }
}

SimulationLog read_log_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string header;
  if (!std::getline(in, header)) throw std::runtime_error("empty log " + path);

  // count q_* columns to recover the loop count
  int n = 0;
  {
    std::stringstream ss(header);
    std::string col;
    while (std::getline(ss, col, ','))
      if (col.rfind("q_", 0) == 0) ++n;
  }
  if (n == 0) throw std::runtime_error("bad log header in " + path);

  SimulationLog log;
  log.n_loops = n;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> row;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    const std::size_t expect = 1 + 3 * static_cast<std::size_t>(n) + 5;
    if (row.size() != expect)
      throw std::runtime_error("bad log row in " + path);
    std::size_t c = 0;
    log.time.push_back(row[c++]);
    log.t_out.emplace_back(row.begin() + c, row.begin() + c + n);
    c += n;
    log.q.emplace_back(row.begin() + c, row.begin() + c + n);
    c += n;
    log.t_in.push_back(row[c++]);
    log.t_out_mix.push_back(row[c++]);
    log.irradiance.emplace_back(row.begin() + c, row.begin() + c + n);
    c += n;
    log.t_ambient.push_back(row[c++]);
    log.t_ref.push_back(row[c++]);
    log.stage_cost.push_back(row[c++]);
  }
  if (log.time.size() >= 2) log.dt_sim = log.time[1] - log.time[0];
  return log;
}

void write_summary_json(const SimulationLog& log, const std::string& path) {
  nlohmann::json j;
  j["n_loops"] = log.n_loops;
  j["dt_sim"] = log.dt_sim;
  j["steps"] = log.time.size();
  j["j_cum"] = log.j_cum_running;

  auto& parts = j["partitions"] = nlohmann::json::array();
  for (const auto& p : log.partitions) {
    nlohmann::json e;
    e["epoch"] = p.epoch;
    e["clusters"] = p.clusters;
    parts.push_back(e);
  }

  int held = 0, unconverged = 0;
  double t_nlp = 0, t_sens = 0, t_qp = 0, iters = 0;
  auto& steps = j["control_steps"] = nlohmann::json::array();
  for (const auto& r : log.control_steps) {
    nlohmann::json e;
    e["k"] = r.k;
    e["iterations"] = r.iterations;
    e["converged"] = r.converged;
    e["held"] = r.held;
    e["coupling_residual"] = r.coupling_residual;
    e["max_local_kkt"] = r.max_local_kkt;
    e["sink_flow"] = r.sink_flow;
    e["t_nlp"] = r.t_nlp;
    e["t_sens"] = r.t_sens;
    e["t_qp"] = r.t_qp;
    steps.push_back(e);
    if (r.held) ++held;
    if (!r.converged && !r.held) ++unconverged;
    t_nlp += r.t_nlp;
    t_sens += r.t_sens;
    t_qp += r.t_qp;
    iters += r.iterations;
  }
  const double m = log.control_steps.empty()
                       ? 1.0
                       : static_cast<double>(log.control_steps.size());
  j["held_steps"] = held;
  j["unconverged_steps"] = unconverged;
  j["mean_iterations"] = iters / m;
  j["mean_t_nlp"] = t_nlp / m;
  j["mean_t_sens"] = t_sens / m;
  j["mean_t_qp"] = t_qp / m;

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << j.dump(2) << '\n';
}

}  // namespace sfield
