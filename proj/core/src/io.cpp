#include "ncsmpc/io.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "ncsmpc/errors.hpp"

namespace ncsmpc {

using json = nlohmann::json;

namespace {

/// Rounds to the 12 significant digits used in every output format.
double rounded(double v)
{
  if (!std::isfinite(v)) { return v; }
  return std::strtod(format_number(v).c_str(), nullptr);
}

json number(double v)
{
  if (std::isnan(v)) { return nullptr; }
  if (std::isinf(v)) { return v > 0 ? "inf" : "-inf"; }
  return rounded(v);
}

json vector_json(const Vector & v)
{
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) { a.push_back(number(v[i])); }
  return a;
}

json optional_number(const std::optional<double> & v) { return v ? number(*v) : json(nullptr); }

std::string trim(const std::string & s)
{
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) { return {}; }
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

void flatten_json(const json & j, const std::string & prefix, ConfigMap & out)
{
  if (j.is_object()) {
    for (auto it = j.begin(); it != j.end(); ++it) {
      flatten_json(it.value(), prefix.empty() ? it.key() : prefix + "." + it.key(), out);
    }
  } else if (j.is_string()) {
    out[prefix] = j.get<std::string>();
  } else if (j.is_number_float()) {
    out[prefix] = format_number(j.get<double>());
  } else {
    out[prefix] = j.dump();
  }
}

}  // namespace

std::string format_number(double v)
{
  if (std::isnan(v)) { return "nan"; }
  if (std::isinf(v)) { return v > 0 ? "inf" : "-inf"; }
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

void write_trajectory_csv(std::ostream & os, const Trajectory & trajectory)
{
  const auto & times = trajectory.sample_times();
  const auto & states = trajectory.states();
  const auto & inputs = trajectory.inputs();
  const Eigen::Index n = states.empty() ? 0 : states.front().size();
  const Eigen::Index m = inputs.empty() ? 0 : inputs.front().size();
  os << "t";
  for (Eigen::Index i = 0; i < n; ++i) { os << ",x" << i + 1; }
  for (Eigen::Index i = 0; i < m; ++i) { os << ",u" << i + 1; }
  os << '\n';
  for (std::size_t k = 0; k < times.size(); ++k) {
    os << format_number(times[k]);
    for (Eigen::Index i = 0; i < n; ++i) { os << ',' << format_number(states[k][i]); }
    for (Eigen::Index i = 0; i < m; ++i) { os << ',' << format_number(inputs[k][i]); }
    os << '\n';
  }
}

void write_step_table_csv(std::ostream & os, const RunRecords & run,
                          const PerformanceReport & report)
{
  os << "n,t,V_T,delta,stage_integral,local_alpha\n";
  for (std::size_t k = 0; k < run.steps.size(); ++k) {
    const StepRecord & s = run.steps[k];
    os << s.index << ',' << format_number(s.time) << ','
       << format_number(s.value.value_or(std::nan(""))) << ',' << format_number(s.delta) << ','
       << format_number(s.stage_integral) << ','
       << format_number(k < report.local_alphas.size() ? report.local_alphas[k] : std::nan(""))
       << '\n';
  }
}

void write_run_records_csv(std::ostream & os, const RunRecords & run)
{
  const Eigen::Index n = run.final_state.size();
  os << "n,t";
  for (Eigen::Index i = 0; i < n; ++i) { os << ",x" << i + 1; }
  os << ",V_T,delta,stage_integral\n";
  for (const StepRecord & s : run.steps) {
    os << s.index << ',' << format_number(s.time);
    for (Eigen::Index i = 0; i < n; ++i) { os << ',' << format_number(s.state[i]); }
    os << ',' << format_number(s.value.value_or(std::nan(""))) << ',' << format_number(s.delta)
       << ',' << format_number(s.stage_integral) << '\n';
  }
}

std::string report_to_json(const PerformanceReport & report)
{
  json j;
  j["global_alpha"] = number(report.global_alpha);
  j["closed_loop_cost"] = number(report.closed_loop_cost);
  j["epsilon_truncation"] = number(report.epsilon_truncation);
  j["unconverged_values"] = report.unconverged_values;
  j["lyapunov_violations"] = report.lyapunov_violations;
  json alphas = json::array();
  for (double a : report.local_alphas) { alphas.push_back(number(a)); }
  j["local_alphas"] = std::move(alphas);
  return j.dump(2);
}

std::string run_records_to_json(const RunRecords & run)
{
  json steps = json::array();
  for (const StepRecord & s : run.steps) {
    json applied = json::array();
    for (const Vector & u : s.applied.values) { applied.push_back(vector_json(u)); }
    steps.push_back({{"n", s.index},
                     {"t", number(s.time)},
                     {"state", vector_json(s.state)},
                     {"V_T", optional_number(s.value)},
                     {"converged", s.converged},
                     {"delta", number(s.delta)},
                     {"stage_integral", number(s.stage_integral)},
                     {"applied", std::move(applied)}});
  }
  json j;
  j["steps"] = std::move(steps);
  j["final_time"] = number(run.final_time);
  j["final_state"] = vector_json(run.final_state);
  j["final_value"] = optional_number(run.final_value);
  j["final_converged"] = run.final_converged;
  return j.dump(2);
}

namespace {

double read_number(const json & j)
{
  if (j.is_null()) { return std::nan(""); }
  if (j.is_string()) {
    const auto & s = j.get_ref<const std::string &>();
    if (s == "inf") { return std::numeric_limits<double>::infinity(); }
    if (s == "-inf") { return -std::numeric_limits<double>::infinity(); }
    throw InvalidArgument("expected a number, got '" + s + "'");
  }
  return j.get<double>();
}

Vector read_vector(const json & j)
{
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) { v[static_cast<Eigen::Index>(i)] = read_number(j[i]); }
  return v;
}

std::optional<double> read_optional(const json & j)
{
  if (j.is_null()) { return std::nullopt; }
  return read_number(j);
}

}  // namespace

RunRecords run_records_from_json(const std::string & text)
{
  RunRecords run;
  try {
    const json j = json::parse(text);
    for (const json & s : j.at("steps")) {
      StepRecord r;
      r.index = s.at("n").get<std::size_t>();
      r.time = read_number(s.at("t"));
      r.state = read_vector(s.at("state"));
      r.value = read_optional(s.at("V_T"));
      r.converged = s.at("converged").get<bool>();
      r.delta = read_number(s.at("delta"));
      r.stage_integral = read_number(s.at("stage_integral"));
      r.applied.start_time = r.time;
      const json & applied = s.at("applied");
      if (!applied.empty()) { r.applied.sampling = r.delta / static_cast<double>(applied.size()); }
      for (const json & u : applied) { r.applied.values.push_back(read_vector(u)); }
      run.steps.push_back(std::move(r));
    }
    run.final_time = read_number(j.at("final_time"));
    run.final_state = read_vector(j.at("final_state"));
    run.final_value = read_optional(j.at("final_value"));
    run.final_converged = j.at("final_converged").get<bool>();
  } catch (const json::exception & e) {
    throw InvalidArgument(std::string("invalid run records: ") + e.what());
  }
  return run;
}

void write_event_log_jsonl(std::ostream & os, const NcsTrace & trace)
{
  for (const NcsEvent & e : trace.events) {
    json j{{"time", number(e.time)},    {"rank", e.rank},       {"kind", to_string(e.kind)},
           {"packet", e.packet},        {"t_s", number(e.t_s)}, {"sigma", number(e.sigma)},
           {"note", e.note}};
    os << j.dump() << '\n';
  }
}

CsvTable read_csv(std::istream & is)
{
  CsvTable table;
  std::string line;
  if (!std::getline(is, line)) { throw InvalidArgument("CSV input is empty"); }
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) { table.header.push_back(trim(cell)); }
  }
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (trim(line).empty()) { continue; }
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      const std::string c = trim(cell);
      char * end = nullptr;
      const double v = std::strtod(c.c_str(), &end);
      if (c.empty() || end != c.c_str() + c.size()) {
        std::ostringstream os;
        os << "non-numeric CSV cell '" << c << "' on line " << lineno;
        throw InvalidArgument(os.str());
      }
      row.push_back(v);
    }
    if (row.size() != table.header.size()) {
      std::ostringstream os;
      os << "CSV line " << lineno << " has " << row.size() << " cells, expected "
         << table.header.size();
      throw InvalidArgument(os.str());
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

ConfigMap parse_key_value_config(std::istream & is)
{
  ConfigMap out;
  std::string line;
  std::string section;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) { line.erase(hash); }
    line = trim(line);
    if (line.empty()) { continue; }
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw InvalidArgument("malformed section header on line " + std::to_string(lineno));
      }
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw InvalidArgument("expected key = value on line " + std::to_string(lineno));
    }
    const std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      value = value.substr(1, value.size() - 2);
    }
    out[section.empty() ? key : section + "." + key] = value;
  }
  return out;
}

ConfigMap parse_json_config(std::istream & is)
{
  json j;
  try {
    is >> j;
  } catch (const json::exception & e) {
    throw InvalidArgument(std::string("invalid JSON config: ") + e.what());
  }
  if (!j.is_object()) { throw InvalidArgument("JSON config must be an object"); }
  ConfigMap out;
  flatten_json(j, "", out);
  return out;
}

ConfigMap load_config(const std::string & path)
{
  std::ifstream in(path);
  if (!in) { throw InvalidArgument("cannot open config file " + path); }
  const bool is_json = path.size() >= 5 && path.compare(path.size() - 5, 5, ".json") == 0;
  return is_json ? parse_json_config(in) : parse_key_value_config(in);
}

double config_number(const ConfigMap & cfg, const std::string & key, double fallback)
{
  const auto it = cfg.find(key);
  if (it == cfg.end()) { return fallback; }
  char * end = nullptr;
  const double v = std::strtod(it->second.c_str(), &end);
  if (it->second.empty() || end != it->second.c_str() + it->second.size()) {
    throw InvalidArgument("config key '" + key + "' is not a number: " + it->second);
  }
  return v;
}

NetworkConfig network_config_from(const ConfigMap & cfg, NetworkConfig d)
{
  const auto get = [&cfg](const std::string & key, double fallback) {
    const std::string prefixed = "network." + key;
    if (cfg.count(prefixed) != 0) { return config_number(cfg, prefixed, fallback); }
    return config_number(cfg, key, fallback);
  };
  d.delay_sc.lo = get("delay_sc.lo", d.delay_sc.lo);
  d.delay_sc.hi = get("delay_sc.hi", d.delay_sc.hi);
  d.delay_c.lo = get("delay_c.lo", d.delay_c.lo);
  d.delay_c.hi = get("delay_c.hi", d.delay_c.hi);
  d.delay_ca.lo = get("delay_ca.lo", d.delay_ca.lo);
  d.delay_ca.hi = get("delay_ca.hi", d.delay_ca.hi);
  d.tau_c_max = get("tau_c_max", d.tau_c_max);
  d.tau_ca_max = get("tau_ca_max", d.tau_ca_max);
  d.dropout_probability = get("dropout_probability", d.dropout_probability);
  d.controller_sampling = get("controller_sampling", d.controller_sampling);
  d.transmitted_length = get("transmitted_length", d.transmitted_length);
  const double seed = get("seed", static_cast<double>(d.rng_seed));
  if (seed < 0.0 || seed != std::floor(seed)) {
    throw InvalidArgument("network seed must be a nonnegative integer");
  }
  d.rng_seed = static_cast<std::uint64_t>(seed);
  return d;
}

}  // namespace ncsmpc
