#include "sfield/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace sfield {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

bool is_integer_multiple(double a, double b) {
  // a = m * b for integer m >= 1, up to rounding noise
  if (b <= 0.0 || a < b) return false;
  const double m = a / b;
  return std::abs(m - std::round(m)) < 1e-9;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(item);
  return out;
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

// Numeric value with optional "l/s" suffix (converted to m^3/s).
double parse_flow(const std::string& v, const std::string& key) {
  std::string s = trim(v);
  double scale = 1.0;
  if (s.size() > 3 && s.substr(s.size() - 3) == "l/s") {
    scale = 1e-3;
    s = trim(s.substr(0, s.size() - 3));
  }
  try {
    std::size_t pos = 0;
    const double x = std::stod(s, &pos);
    if (pos != s.size()) fail("trailing characters in value of '" + key + "'");
    return x * scale;
  } catch (const std::invalid_argument&) {
    fail("invalid number for '" + key + "': " + v);
  }
}

double parse_num(const std::string& v, const std::string& key) {
  return parse_flow(v, key);  // plain numbers have no suffix
}

std::vector<double> parse_num_list(const std::string& v, const std::string& key) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string tok;
  while (ss >> tok) out.push_back(parse_num(tok, key));
  return out;
}

// Loop lists: "2-5" (inclusive range) or "0,3,7".
std::vector<int> parse_loop_list(const std::string& v) {
  std::vector<int> out;
  for (const std::string& part : split(v, ',')) {
    const std::string p = trim(part);
    const auto dash = p.find('-');
    if (dash != std::string::npos && dash > 0) {
      const int a = std::stoi(p.substr(0, dash));
      const int b = std::stoi(p.substr(dash + 1));
      for (int i = a; i <= b; ++i) out.push_back(i);
    } else {
      out.push_back(std::stoi(p));
    }
  }
  return out;
}

// Event spec: "loops:start:end:attenuation:ramp"
CloudEvent parse_event(const std::string& spec) {
  const auto parts = split(spec, ':');
  if (parts.size() != 5) fail("cloud event needs loops:start:end:attenuation:ramp, got '" + spec + "'");
  CloudEvent e;
  e.loops = parse_loop_list(trim(parts[0]));
  e.start = parse_num(parts[1], "cloud_events.start");
  e.end = parse_num(parts[2], "cloud_events.end");
  e.attenuation = parse_num(parts[3], "cloud_events.attenuation");
  e.ramp = parse_num(parts[4], "cloud_events.ramp");
  if (e.attenuation < 0.0 || e.attenuation > 1.0)
    fail("cloud event attenuation must be in [0,1]");
  if (!(e.start < e.end)) fail("cloud event start must precede end");
  return e;
}

void load_profile_csv(ScenarioConfig& cfg) {
  std::ifstream in(cfg.irradiance_file);
  if (!in) fail("cannot open irradiance file: " + cfg.irradiance_file);
  std::string line;
  if (!std::getline(in, line)) fail("empty irradiance file");
  auto header = split(line, ',');
  for (auto& h : header) h = trim(h);
  if (header.empty() || header[0] != "t_s")
    fail("irradiance CSV must start with a 't_s' column");
  int t_ref_col = -1, t_amb_col = -1;
  std::vector<int> loop_cols(cfg.n_loops, -1);
  for (std::size_t c = 1; c < header.size(); ++c) {
    if (header[c] == "T_amb") t_amb_col = static_cast<int>(c);
    else if (header[c] == "T_ref") t_ref_col = static_cast<int>(c);
    else if (header[c].rfind("I_", 0) == 0) {
      const int idx = std::stoi(header[c].substr(2)) - 1;
      if (idx < 0 || idx >= cfg.n_loops) fail("irradiance column out of range: " + header[c]);
      loop_cols[idx] = static_cast<int>(c);
    } else {
      fail("unknown irradiance CSV column: " + header[c]);
    }
  }
  if (t_amb_col < 0) fail("irradiance CSV missing T_amb column");
  for (int i = 0; i < cfg.n_loops; ++i)
    if (loop_cols[i] < 0) fail("irradiance CSV missing column I_" + std::to_string(i + 1));

  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto cells = split(line, ',');
    if (cells.size() != header.size())
      fail("irradiance CSV line " + std::to_string(lineno) + ": wrong column count");
    cfg.file_times.push_back(parse_num(cells[0], "t_s"));
    std::vector<double> row(cfg.n_loops);
    for (int i = 0; i < cfg.n_loops; ++i) row[i] = parse_num(cells[loop_cols[i]], "I");
    cfg.file_irradiance.push_back(std::move(row));
    cfg.file_ambient.push_back(parse_num(cells[t_amb_col], "T_amb"));
    if (t_ref_col >= 0) cfg.file_t_ref.push_back(parse_num(cells[t_ref_col], "T_ref"));
  }
  if (cfg.file_times.empty()) fail("irradiance CSV has no data rows");
  if (!std::is_sorted(cfg.file_times.begin(), cfg.file_times.end()))
    fail("irradiance CSV times must be non-decreasing");
}

void validate(const ScenarioConfig& cfg) {
  if (cfg.n_loops < 1) fail("n_loops must be >= 1");
  if (cfg.duration <= 0.0) fail("duration must be positive");
  if (cfg.dt_sim <= 0.0) fail("dt_sim must be positive");
  if (!is_integer_multiple(cfg.dt_control, cfg.dt_sim))
    fail("dt_control must be an integer multiple of dt_sim");
  if (!is_integer_multiple(cfg.dt_cluster, cfg.dt_sim))
    fail("dt_cluster must be an integer multiple of dt_sim");
  if (!is_integer_multiple(cfg.dt_cluster, cfg.dt_control))
    fail("dt_cluster must be an integer multiple of dt_control");
  if (!(cfg.q_min < cfg.q_max)) fail("q_min must be below q_max");
  if (!(cfg.t_min < cfg.t_max)) fail("t_min must be below t_max");
  if (cfg.horizon < 1) fail("horizon must be >= 1");
  if (cfg.n_cl_max < 1) fail("n_cl_max must be >= 1");
  if (cfg.q_min * cfg.n_loops > cfg.q_total)
    fail("n_loops * q_min exceeds the total flow budget q_total");
  for (const auto& p : cfg.loop_params) {
    if (p.eta <= 0.0 || p.eta > 1.0) fail("eta must be in (0,1]");
    if (p.area <= 0.0 || p.length <= 0.0 || p.surface <= 0.0)
      fail("loop geometry must be strictly positive");
  }
  for (const auto& e : cfg.events)
    for (int i : e.loops)
      if (i < 0 || i >= cfg.n_loops) fail("cloud event references loop out of range");
}

}  // namespace

int ScenarioConfig::steps_per_control() const {
  return static_cast<int>(std::lround(dt_control / dt_sim));
}
int ScenarioConfig::steps_per_cluster() const {
  return static_cast<int>(std::lround(dt_cluster / dt_sim));
}
int ScenarioConfig::total_steps() const {
  return static_cast<int>(std::lround(duration / dt_sim));
}

double ScenarioConfig::reference_at(double t) const {
  if (!file_t_ref.empty()) {
    auto it = std::upper_bound(file_times.begin(), file_times.end(), t);
    const std::size_t row = (it == file_times.begin()) ? 0 : (it - file_times.begin() - 1);
    return file_t_ref[row];
  }
  if (!t_ref_profile.empty()) {
    const int k = std::clamp(static_cast<int>(t / dt_sim), 0,
                             static_cast<int>(t_ref_profile.size()) - 1);
    return t_ref_profile[k];
  }
  return t_ref;
}

ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open scenario file: " + path);

  std::map<std::string, std::string> kv;
  std::vector<std::string> event_specs;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      fail(path + ":" + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "cloud_events") {
      for (const std::string& spec : split(value, ';'))
        if (!trim(spec).empty()) event_specs.push_back(trim(spec));
      continue;
    }
    if (kv.count(key))
      fail(path + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
    kv[key] = value;
  }

  ScenarioConfig cfg;
  auto take = [&](const char* key) -> std::string {
    auto it = kv.find(key);
    if (it == kv.end()) return "";
    std::string v = it->second;
    kv.erase(it);
    return v;
  };
  auto num = [&](const char* key, double& target) {
    const std::string v = take(key);
    if (!v.empty()) target = parse_num(v, key);
  };
  auto flow = [&](const char* key, double& target) {
    const std::string v = take(key);
    if (!v.empty()) target = parse_flow(v, key);
  };

  if (const std::string v = take("n_loops"); !v.empty())
    cfg.n_loops = static_cast<int>(parse_num(v, "n_loops"));
  num("duration", cfg.duration);
  num("dt_sim", cfg.dt_sim);
  num("dt_control", cfg.dt_control);
  num("dt_cluster", cfg.dt_cluster);
  if (const std::string v = take("n_cl_max"); !v.empty())
    cfg.n_cl_max = static_cast<int>(parse_num(v, "n_cl_max"));
  if (const std::string v = take("horizon"); !v.empty())
    cfg.horizon = static_cast<int>(parse_num(v, "horizon"));
  flow("q_min", cfg.q_min);
  flow("q_max", cfg.q_max);
  flow("q_total", cfg.q_total);
  num("t_min", cfg.t_min);
  num("t_max", cfg.t_max);
  num("w_e", cfg.w_e);
  num("w_q", cfg.w_q);
  num("epsilon", cfg.epsilon);
  num("t_ref", cfg.t_ref);
  cfg.t_initial = cfg.t_ref - 10.0;
  num("t_initial", cfg.t_initial);
  if (const std::string v = take("t_initial_per_loop"); !v.empty())
    cfg.t_initial_per_loop = parse_num_list(v, "t_initial_per_loop");
  if (const std::string v = take("t_in_initial"); !v.empty()) {
    cfg.t_in_initial = parse_num(v, "t_in_initial");
    cfg.t_in_initial_set = true;
  }
  num("t_ambient", cfg.t_ambient);
  num("peak", cfg.peak);
  num("day_length", cfg.day_length);
  num("day_offset", cfg.day_offset);
  if (const std::string v = take("seed"); !v.empty())
    cfg.seed = static_cast<std::uint64_t>(parse_num(v, "seed"));

  LoopParams base;
  num("area", base.area);
  num("length", base.length);
  num("surface", base.surface);
  std::vector<double> etas(cfg.n_loops, base.eta);
  if (const std::string v = take("eta"); !v.empty()) {
    const auto vals = parse_num_list(v, "eta");
    if (vals.size() == 1) std::fill(etas.begin(), etas.end(), vals[0]);
    else if (static_cast<int>(vals.size()) == cfg.n_loops)
      etas.assign(vals.begin(), vals.end());
    else fail("eta must be one value or one per loop");
  }
  cfg.loop_params.resize(cfg.n_loops, base);
  for (int i = 0; i < cfg.n_loops; ++i) cfg.loop_params[i].eta = etas[i];

  if (const std::string v = take("irradiance"); !v.empty()) {
    if (v == "synthetic") cfg.source = IrradianceSource::synthetic;
    else if (v.rfind("file:", 0) == 0) {
      cfg.source = IrradianceSource::file;
      cfg.irradiance_file = trim(v.substr(5));
    } else fail("irradiance must be 'synthetic' or 'file:<path>'");
  }
  for (const std::string& spec : event_specs) cfg.events.push_back(parse_event(spec));

  if (!kv.empty()) fail("unknown scenario key '" + kv.begin()->first + "'");

  if (cfg.day_length <= 0.0) cfg.day_length = cfg.duration;
  if (cfg.source == IrradianceSource::file) load_profile_csv(cfg);
  validate(cfg);
  return cfg;
}

void save_scenario(const ScenarioConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail("cannot write scenario file: " + path);
  out.precision(17);
  out << "n_loops = " << cfg.n_loops << "\n"
      << "duration = " << cfg.duration << "\n"
      << "dt_sim = " << cfg.dt_sim << "\n"
      << "dt_control = " << cfg.dt_control << "\n"
      << "dt_cluster = " << cfg.dt_cluster << "\n"
      << "n_cl_max = " << cfg.n_cl_max << "\n"
      << "horizon = " << cfg.horizon << "\n"
      << "q_min = " << cfg.q_min << "\n"
      << "q_max = " << cfg.q_max << "\n"
      << "q_total = " << cfg.q_total << "\n"
      << "t_min = " << cfg.t_min << "\n"
      << "t_max = " << cfg.t_max << "\n"
      << "w_e = " << cfg.w_e << "\n"
      << "w_q = " << cfg.w_q << "\n"
      << "epsilon = " << cfg.epsilon << "\n"
      << "t_ref = " << cfg.t_ref << "\n"
      << "t_initial = " << cfg.t_initial << "\n"
      << "t_ambient = " << cfg.t_ambient << "\n"
      << "peak = " << cfg.peak << "\n"
      << "day_length = " << cfg.day_length << "\n"
      << "day_offset = " << cfg.day_offset << "\n"
      << "seed = " << cfg.seed << "\n"
      << "area = " << cfg.loop_params.at(0).area << "\n"
      << "length = " << cfg.loop_params.at(0).length << "\n"
      << "surface = " << cfg.loop_params.at(0).surface << "\n";
  if (cfg.t_in_initial_set) out << "t_in_initial = " << cfg.t_in_initial << "\n";
  out << "eta =";
  for (const auto& p : cfg.loop_params) out << " " << p.eta;
  out << "\n";
  if (cfg.source == IrradianceSource::file)
    out << "irradiance = file:" << cfg.irradiance_file << "\n";
  else
    out << "irradiance = synthetic\n";
  if (!cfg.events.empty()) {
    out << "cloud_events = ";
    for (std::size_t e = 0; e < cfg.events.size(); ++e) {
      const CloudEvent& ev = cfg.events[e];
      if (e) out << "; ";
      for (std::size_t i = 0; i < ev.loops.size(); ++i)
        out << (i ? "," : "") << ev.loops[i];
      out << ":" << ev.start << ":" << ev.end << ":" << ev.attenuation
          << ":" << ev.ramp;
    }
    out << "\n";
  }
}

double cloud_factor(const std::vector<CloudEvent>& events, int loop, double t) {
  double factor = 1.0;
  for (const CloudEvent& e : events) {
    if (std::find(e.loops.begin(), e.loops.end(), loop) == e.loops.end()) continue;
    double r = 0.0;
    if (t > e.start && t < e.end) {
      if (e.ramp <= 0.0) r = 1.0;
      else r = std::clamp(std::min((t - e.start) / e.ramp, (e.end - t) / e.ramp), 0.0, 1.0);
    }
    factor *= 1.0 - e.attenuation * r;
  }
  return factor;
}

ExogenousInputs sample_exogenous(const ScenarioConfig& cfg, int k) {
  if (k < 0 || k > cfg.total_steps())
    throw std::out_of_range("exogenous sample outside scenario duration");
  const double t = k * cfg.dt_sim;
  ExogenousInputs exo;
  exo.irradiance.resize(cfg.n_loops);
  if (cfg.source == IrradianceSource::file) {
    auto it = std::upper_bound(cfg.file_times.begin(), cfg.file_times.end(), t);
    const std::size_t row = (it == cfg.file_times.begin()) ? 0 : (it - cfg.file_times.begin() - 1);
    for (int i = 0; i < cfg.n_loops; ++i) exo.irradiance[i] = cfg.file_irradiance[row][i];
    exo.t_ambient = cfg.file_ambient[row];
  } else {
    const double phase = (t + cfg.day_offset) / cfg.day_length;
    const double clear = cfg.peak * std::max(0.0, std::sin(M_PI * phase));
    for (int i = 0; i < cfg.n_loops; ++i)
      exo.irradiance[i] = clear * cloud_factor(cfg.events, i, t);
    exo.t_ambient = cfg.t_ambient;
  }
  return exo;
}

std::vector<std::vector<double>> synth_profile(int n_loops, double duration,
                                               double peak,
                                               const std::vector<CloudEvent>& events,
                                               std::uint64_t /*seed*/, double dt) {
  if (peak <= 0.0) throw std::invalid_argument("peak must be positive");
  const int rows = static_cast<int>(std::lround(duration / dt)) + 1;
  std::vector<std::vector<double>> table(rows, std::vector<double>(n_loops));
  for (int r = 0; r < rows; ++r) {
    const double t = r * dt;
    const double clear = peak * std::max(0.0, std::sin(M_PI * t / duration));
    for (int i = 0; i < n_loops; ++i)
      table[r][i] = clear * cloud_factor(events, i, t);
  }
  return table;
}

}  // namespace sfield
