#pragma once

/**
 * @file
 * @brief CSV/JSON export of runs and reports, and configuration loading.
 *
 * Numbers are written with 12 significant digits.
 */

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "ncsmpc/analysis.hpp"
#include "ncsmpc/dynamics.hpp"
#include "ncsmpc/mpc.hpp"
#include "ncsmpc/network.hpp"

namespace ncsmpc {

/// Columns t, x1..xn, u1..um; one row per integrator sample.
void write_trajectory_csv(std::ostream & os, const Trajectory & trajectory);

/// Columns n, t, V_T, delta, stage_integral, local_alpha.
void write_step_table_csv(std::ostream & os, const RunRecords & run,
                          const PerformanceReport & report);

/// Columns n, t, x1..xn, V_T, delta, stage_integral.
void write_run_records_csv(std::ostream & os, const RunRecords & run);

std::string report_to_json(const PerformanceReport & report);

/// Steps (time, state, value, delta, stage integral, applied input) and the final state.
std::string run_records_to_json(const RunRecords & run);

/// Inverse of run_records_to_json (trajectory not included). Throws InvalidArgument.
RunRecords run_records_from_json(const std::string & text);

/// One JSON object per line: time, rank, kind, packet, t_s, sigma, note.
void write_event_log_jsonl(std::ostream & os, const NcsTrace & trace);

struct CsvTable
{
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

/// Numeric CSV with one header line. Throws InvalidArgument on ragged or non-numeric rows.
CsvTable read_csv(std::istream & is);

/// Flat key/value configuration; nested keys are joined with '.'.
using ConfigMap = std::map<std::string, std::string>;

/**
 * @brief Reads a JSON object, or `key = value` lines with optional `[section]`
 * headers and `#` comments. Files ending in .json are parsed as JSON.
 */
ConfigMap load_config(const std::string & path);
ConfigMap parse_key_value_config(std::istream & is);
ConfigMap parse_json_config(std::istream & is);

/// Looks up `key` as a number; returns `fallback` when absent.
double config_number(const ConfigMap & cfg, const std::string & key, double fallback);

/**
 * @brief Network settings from keys such as delay_sc.lo, delay_sc.hi, tau_c_max,
 * dropout_probability, controller_sampling, transmitted_length and seed, each
 * optionally prefixed with "network.". Missing keys keep the values of `defaults`.
 */
NetworkConfig network_config_from(const ConfigMap & cfg, NetworkConfig defaults = {});

/// Formats a number with 12 significant digits.
std::string format_number(double v);

}  // namespace ncsmpc
