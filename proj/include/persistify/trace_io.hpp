#pragma once

#include "persistify/config.hpp"
#include "persistify/sim.hpp"

#include <map>
#include <string>
#include <vector>

namespace persistify {

struct TraceIoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// CSV layout: t, per-robot blocks
/// x1,x2,E,u1,u2,uhat1,uhat2,delta,h1,h2,qp_status, then the task metric
/// column (ergodic_eps or loc_cost) and C. One header row, '.' decimals,
/// newline-terminated rows.
void write_trace_csv(const SimTrace& trace, const std::string& path);

/// Reads a trace back; events are not part of the file format.
SimTrace read_trace_csv(const std::string& path);

struct RunSummary {
  int n_robots = 0;
  long records = 0;
  double t_final = 0.0;
  std::string metric_name;
  double final_metric = 0.0;
  double final_C = 0.0;
  std::vector<double> min_E;
  std::vector<double> max_E;
  std::map<std::string, long> event_counts;
};

RunSummary summarize(const SimTrace& trace);

/// Summary JSON written next to the trace; embeds the resolved scenario so
/// the plotter can recover the band bounds and the charging field.
void write_summary_json(const SimTrace& trace, const Scenario& scenario,
                        const std::string& path);

std::string summary_json_text(const SimTrace& trace, const Scenario& scenario);

}  // namespace persistify
