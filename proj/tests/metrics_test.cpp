#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "sfield/metrics.hpp"
#include "sfield/svg.hpp"

using namespace sfield;

namespace {

SimulationLog tiny_log() {
  SimulationLog log;
  log.n_loops = 2;
  log.dt_sim = 0.5;
  log.w_e = 1e-3;
  log.w_q = 1.0;
  for (int k = 0; k < 4; ++k) {
    log.time.push_back(0.5 * k);
    log.t_out.push_back({250.0 + k, 250.0 - 2.0 * k});
    log.q.push_back({1e-3, 1.5e-3});
    log.t_in.push_back(170.0);
    log.t_out_mix.push_back(249.0);
    log.irradiance.push_back({800.0, 750.0});
    log.t_ambient.push_back(25.0);
    log.t_ref.push_back(250.0);
    log.stage_cost.push_back(0.0);
  }
  return log;
}

}  // namespace

TEST_CASE("cumulative cost hand values") {
  SimulationLog log;
  log.n_loops = 1;
  log.time = {0.0};
  log.t_out = {{260.0}};  // error 10
  log.q = {{0.0}};
  log.t_ref = {250.0};
  CHECK(cumulative_cost(log, 1e-3, 1.0) == doctest::Approx(0.1));

  SUBCASE("zero errors and flows cost nothing") {
    log.t_out = {{250.0}};
    CHECK(cumulative_cost(log, 1e-3, 1.0) == doctest::Approx(0.0));
  }
  SUBCASE("flow weight scales linearly") {
    log.q = {{2.0}};
    const double base = cumulative_cost(log, 0.0, 1.0);
    CHECK(cumulative_cost(log, 0.0, 2.0) == doctest::Approx(2.0 * base));
  }
}

TEST_CASE("max tracking error honors the warmup window") {
  SimulationLog log;
  log.n_loops = 1;
  log.time = {0.0, 100.0, 400.0, 800.0};
  log.t_out = {{300.0}, {280.0}, {257.0}, {251.0}};
  log.t_ref = {250.0, 250.0, 250.0, 250.0};
  log.q = {{0}, {0}, {0}, {0}};
  CHECK(max_tracking_error(log, 300.0) == doctest::Approx(7.0));
  CHECK(max_tracking_error(log, 0.0) == doctest::Approx(50.0));
  log.t_out[2][0] = 250.0;
  log.t_out[3][0] = 250.0;
  CHECK(max_tracking_error(log, 300.0) == doctest::Approx(0.0));
}

TEST_CASE("timing summary hand arithmetic") {
  SimulationLog log;
  ControlStepRecord r;
  r.t_nlp = 0.05;   // two agents, 0.02 + 0.03
  r.t_qp = 0.001;
  r.t_sens = 0.005; // 0.004 + 0.001
  r.iterations = 4;
  log.control_steps = {r};
  const TimingSummary s = timing_summary(log);
  CHECK(s.tau_nlp == doctest::Approx(0.05));
  CHECK(s.tau_qp == doctest::Approx(0.001));
  CHECK(s.tau_sum == doctest::Approx(0.056));
  CHECK(s.tau_sum >= s.tau_nlp + s.tau_qp);

  SUBCASE("identical steps leave the means unchanged") {
    log.control_steps.push_back(r);
    const TimingSummary two = timing_summary(log);
    CHECK(two.tau_nlp == doctest::Approx(0.05));
    CHECK(two.tau_sum == doctest::Approx(0.056));
  }
}

TEST_CASE("mean cluster size follows the active partition") {
  SimulationLog log;
  log.n_loops = 10;
  Partition p1, p2;
  p1.epoch = 0;
  p1.clusters = {{0, 1, 2, 3, 4}, {5, 6, 7, 8, 9}};  // 2 clusters -> size 5
  p2.epoch = 100;
  for (int i = 0; i < 10; ++i) p2.clusters.push_back({i});  // singletons
  log.partitions = {p1, p2};
  ControlStepRecord a, b;
  a.k = 0;
  b.k = 150;
  log.control_steps = {a, b};
  CHECK(mean_cluster_size(log) == doctest::Approx((5.0 + 1.0) / 2.0));
}

TEST_CASE("CSV round trip is bit-exact") {
  const SimulationLog log = tiny_log();
  const std::string path = "/tmp/sfield_log_rt.csv";
  write_log_csv(log, path);
  const SimulationLog back = read_log_csv(path);
  std::remove(path.c_str());
  REQUIRE(back.n_loops == log.n_loops);
  REQUIRE(back.time.size() == log.time.size());
  for (std::size_t k = 0; k < log.time.size(); ++k) {
    CHECK(back.time[k] == log.time[k]);
    for (int i = 0; i < log.n_loops; ++i) {
      CHECK(back.t_out[k][i] == log.t_out[k][i]);
      CHECK(back.q[k][i] == log.q[k][i]);
      CHECK(back.irradiance[k][i] == log.irradiance[k][i]);
    }
    CHECK(back.t_in[k] == log.t_in[k]);
    CHECK(back.t_out_mix[k] == log.t_out_mix[k]);
    CHECK(back.t_ref[k] == log.t_ref[k]);
  }
  // derived metrics reproduce bit-exactly from the reloaded series
  CHECK(cumulative_cost(back, 1e-3, 1.0) == cumulative_cost(log, 1e-3, 1.0));
  CHECK(max_tracking_error(back, 0.0) == max_tracking_error(log, 0.0));
}

TEST_CASE("summary json is written and well formed") {
  SimulationLog log = tiny_log();
  Partition p;
  p.epoch = 0;
  p.clusters = {{0, 1}};
  log.partitions = {p};
  ControlStepRecord r;
  r.k = 0;
  r.converged = true;
  r.iterations = 3;
  log.control_steps = {r};
  const std::string path = "/tmp/sfield_summary.json";
  write_summary_json(log, path);
  std::ifstream in(path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  std::remove(path.c_str());
  CHECK(text.find("\"j_cum\"") != std::string::npos);
  CHECK(text.find("\"partitions\"") != std::string::npos);
  CHECK(text.find("\"mean_iterations\"") != std::string::npos);
}

TEST_CASE("performance report aggregates") {
  SimulationLog log = tiny_log();
  log.j_cum_running = cumulative_cost(log, log.w_e, log.w_q);
  Partition p;
  p.epoch = 0;
  p.clusters = {{0}, {1}};
  log.partitions = {p};
  ControlStepRecord r;
  r.k = 0;
  r.converged = true;
  log.control_steps = {r};
  const PerformanceReport rep = performance_report(log, log.w_e, log.w_q, 0.0);
  CHECK(rep.j_cum == doctest::Approx(log.j_cum_running));
  CHECK(rep.e_bar >= 0.0);
  CHECK(rep.mean_cluster_size == doctest::Approx(1.0));
  CHECK(rep.held_steps == 0);
}

TEST_CASE("svg writers produce parseable documents") {
  const std::string ts = "/tmp/sfield_ts.svg", bars = "/tmp/sfield_bars.svg";
  Series s1{"a", {1.0, 2.0, 3.0}}, s2{"b", {3.0, 2.0, 1.0}};
  write_timeseries_svg(ts, "test", {0.0, 1.0, 2.0}, {s1, s2}, "y");
  write_bars_svg(bars, "timings", {"x", "y"}, {0.5, 1.5});
  for (const std::string& path : {ts, bars}) {
    std::ifstream in(path);
    std::string text((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    CHECK(text.rfind("<svg", 0) == 0);
    CHECK(text.find("</svg>") != std::string::npos);
    std::remove(path.c_str());
  }
  CHECK_THROWS(write_timeseries_svg("/tmp/x.svg", "t", {}, {}));
}
