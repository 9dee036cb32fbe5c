#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "sfield/controller.hpp"
#include "sfield/metrics.hpp"
#include "sfield/svg.hpp"

namespace fs = std::filesystem;
using namespace sfield;

namespace {

ControllerMode parse_mode(const std::string& s) {
  if (s == "dynamic") return ControllerMode::dynamic;
  if (s == "fine") return ControllerMode::fine;
  if (s == "coarse") return ControllerMode::coarse;
  throw CLI::ValidationError("mode", "expected dynamic, fine or coarse");
}

void write_charts(const SimulationLog& log, const fs::path& dir,
                  const std::string& tag) {
  std::vector<Series> temps, flows;
  for (int i = 0; i < log.n_loops; ++i) {
    Series st, sq;
    st.label = "T_out_" + std::to_string(i + 1);
    sq.label = "q_" + std::to_string(i + 1);
    st.y.reserve(log.time.size());
    sq.y.reserve(log.time.size());
    for (std::size_t k = 0; k < log.time.size(); ++k) {
      st.y.push_back(log.t_out[k][i]);
      sq.y.push_back(log.q[k][i] * 1e3);  // l/s reads better
    }
    temps.push_back(std::move(st));
    flows.push_back(std::move(sq));
  }
  Series ref;
  ref.label = "T_ref";
  ref.y = log.t_ref;
  temps.push_back(std::move(ref));
  write_timeseries_svg((dir / (tag + "_temperatures.svg")).string(),
                       "Loop outlet temperatures [degC]", log.time, temps, "degC");
  write_timeseries_svg((dir / (tag + "_flows.svg")).string(),
                       "Applied loop flows [l/s]", log.time, flows, "l/s");
}

SimulationLog run_mode(const ScenarioConfig& cfg, ControllerMode mode) {
  ClosedLoopOptions opt;
  opt.mode = mode;
  return run_closed_loop(cfg, opt);
}

std::string mode_name(ControllerMode m) {
  switch (m) {
    case ControllerMode::dynamic: return "dynamic";
    case ControllerMode::fine: return "fine";
    default: return "coarse";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributed MPC for a solar collector field"};
  app.require_subcommand(1);

  std::string scenario_path, out_dir = ".", mode_str = "dynamic";
  int ncl_max = -1;
  double dt_cluster = -1.0;
  std::int64_t seed = -1;
  std::vector<std::string> modes = {"dynamic", "fine", "coarse"};

  auto* run = app.add_subcommand("run", "simulate one controller mode");
  run->add_option("--scenario", scenario_path, "scenario file")->required();
  run->add_option("--mode", mode_str, "dynamic | fine | coarse");
  run->add_option("--ncl-max", ncl_max, "override max cluster count");
  run->add_option("--dt-cluster", dt_cluster, "override repartition period [s]");
  run->add_option("--seed", seed, "override partitioning seed");
  run->add_option("--out", out_dir, "output directory");

  auto* cmp = app.add_subcommand("compare", "run several modes and tabulate");
  cmp->add_option("--scenario", scenario_path, "scenario file")->required();
  cmp->add_option("--modes", modes, "modes to compare");
  cmp->add_option("--out", out_dir, "output directory");

  auto* self = app.add_subcommand("selftest", "short built-in sanity run");

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(self)) {
      ScenarioConfig cfg;
      cfg.n_loops = 4;
      cfg.duration = 600.0;
      cfg.day_length = 50400.0;
      cfg.day_offset = 18000.0;
      cfg.q_total = 4e-3;
      cfg.loop_params.assign(4, LoopParams{});
      const SimulationLog log = run_mode(cfg, ControllerMode::dynamic);
      const PerformanceReport rep = performance_report(log, cfg.w_e, cfg.w_q, 0.0);
      const bool ok = rep.held_steps == 0 && rep.unconverged_steps == 0 &&
                      std::isfinite(rep.j_cum);
      std::cout << (ok ? "selftest: ok" : "selftest: FAILED")
                << " (j_cum=" << rep.j_cum << ", e_bar=" << rep.e_bar << ")\n";
      return ok ? 0 : 1;
    }

    ScenarioConfig cfg = load_scenario(scenario_path);
    if (ncl_max > 0) cfg.n_cl_max = ncl_max;
    if (dt_cluster > 0) cfg.dt_cluster = dt_cluster;
    if (seed >= 0) cfg.seed = static_cast<std::uint64_t>(seed);
    fs::create_directories(out_dir);
    const fs::path dir(out_dir);

    if (app.got_subcommand(run)) {
      const ControllerMode mode = parse_mode(mode_str);
      const SimulationLog log = run_mode(cfg, mode);
      write_log_csv(log, (dir / "log.csv").string());
      write_summary_json(log, (dir / "summary.json").string());
      write_charts(log, dir, mode_str);
      const PerformanceReport rep = performance_report(log, cfg.w_e, cfg.w_q);
      std::printf("mode=%s J_cum=%.6g e_bar=%.4f degC mean_cluster=%.2f "
                  "tau_nlp=%.4g s tau_qp=%.4g s held=%d unconverged=%d\n",
                  mode_str.c_str(), rep.j_cum, rep.e_bar, rep.mean_cluster_size,
                  rep.timing.tau_nlp, rep.timing.tau_qp, rep.held_steps,
                  rep.unconverged_steps);
      return rep.held_steps == 0 ? 0 : 2;
    }

    // compare
    std::ofstream report(dir / "report.csv");
    report << "mode,j_cum,e_bar,mean_cluster_size,tau_nlp,tau_qp,tau_sum,"
              "mean_iterations,held,unconverged\n";
    std::vector<std::string> labels;
    std::vector<double> tau_sums;
    bool any_held = false;
    for (const auto& ms : modes) {
      const ControllerMode mode = parse_mode(ms);
      const SimulationLog log = run_mode(cfg, mode);
      write_log_csv(log, (dir / (ms + "_log.csv")).string());
      write_summary_json(log, (dir / (ms + "_summary.json")).string());
      write_charts(log, dir, ms);
      const PerformanceReport rep = performance_report(log, cfg.w_e, cfg.w_q);
      report << mode_name(mode) << ',' << rep.j_cum << ',' << rep.e_bar << ','
             << rep.mean_cluster_size << ',' << rep.timing.tau_nlp << ','
             << rep.timing.tau_qp << ',' << rep.timing.tau_sum << ','
             << rep.timing.mean_iterations << ',' << rep.held_steps << ','
             << rep.unconverged_steps << '\n';
      std::printf("mode=%s J_cum=%.6g e_bar=%.4f degC mean_cluster=%.2f\n",
                  ms.c_str(), rep.j_cum, rep.e_bar, rep.mean_cluster_size);
      labels.push_back(ms);
      tau_sums.push_back(rep.timing.tau_sum);
      any_held |= rep.held_steps > 0;
    }
    write_bars_svg((dir / "timing.svg").string(),
                   "Mean solver time per control instant [s]", labels, tau_sums);
    return any_held ? 2 : 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
