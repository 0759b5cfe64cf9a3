#include "persistify/trace_io.hpp"

#include <json.hpp>

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace persistify {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

QpStatus status_from(const std::string& tok, long row) {
  if (tok == "ok") return QpStatus::Optimal;
  if (tok == "infeasible") return QpStatus::Infeasible;
  if (tok == "degenerate") return QpStatus::DegenerateRowDropped;
  throw TraceIoError("trace: bad qp_status at row " + std::to_string(row));
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

void write_trace_csv(const SimTrace& trace, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw TraceIoError("trace: cannot open " + path + " for writing");
  const int n = trace.n_robots();
  out << "t";
  for (int i = 1; i <= n; ++i) {
    const std::string p = "r" + std::to_string(i) + "_";
    out << "," << p << "x1," << p << "x2," << p << "E," << p << "u1," << p << "u2," << p
        << "uhat1," << p << "uhat2," << p << "delta," << p << "h1," << p << "h2," << p
        << "qp_status";
  }
  out << "," << (trace.metric_name.empty() ? "metric" : trace.metric_name) << ",C\n";

  for (const auto& rec : trace.records) {
    out << fmt(rec.t);
    for (const auto& r : rec.robots) {
      out << "," << fmt(r.x.x()) << "," << fmt(r.x.y()) << "," << fmt(r.E) << "," << fmt(r.u.x())
          << "," << fmt(r.u.y()) << "," << fmt(r.u_hat.x()) << "," << fmt(r.u_hat.y()) << ","
          << fmt(r.delta) << "," << fmt(r.h1) << "," << fmt(r.h2) << ","
          << to_string(r.qp_status);
    }
    out << "," << fmt(rec.metric) << "," << fmt(rec.C) << "\n";
  }
}

SimTrace read_trace_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw TraceIoError("trace: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw TraceIoError("trace: empty file " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::vector<std::string> header = split_csv(line);
  if (header.empty() || header.front() != "t") {
    throw TraceIoError("trace: malformed header at row 1");
  }
  int n = 0;
  for (const auto& h : header) {
    if (h.size() > 3 && h.compare(h.size() - 3, 3, "_x1") == 0) ++n;
  }
  const size_t expected = 1 + 11 * static_cast<size_t>(n) + 2;
  if (header.size() != expected) {
    throw TraceIoError("trace: header has " + std::to_string(header.size()) +
                       " columns, expected " + std::to_string(expected));
  }
  SimTrace trace;
  trace.metric_name = header[header.size() - 2];

  long row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> cells = split_csv(line);
    if (cells.size() != expected) {
      throw TraceIoError("trace: row " + std::to_string(row) + " has " +
                         std::to_string(cells.size()) + " columns, expected " +
                         std::to_string(expected));
    }
    const auto num = [&](size_t idx) {
      char* end = nullptr;
      const double v = std::strtod(cells[idx].c_str(), &end);
      if (end == cells[idx].c_str() || *end != '\0') {
        throw TraceIoError("trace: bad number at row " + std::to_string(row));
      }
      return v;
    };
    StepRecord rec;
    rec.t = num(0);
    size_t c = 1;
    rec.robots.resize(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
      RobotRecord& r = rec.robots[static_cast<size_t>(i)];
      r.x.x() = num(c++);
      r.x.y() = num(c++);
      r.E = num(c++);
      r.u.x() = num(c++);
      r.u.y() = num(c++);
      r.u_hat.x() = num(c++);
      r.u_hat.y() = num(c++);
      r.delta = num(c++);
      r.h1 = num(c++);
      r.h2 = num(c++);
      r.qp_status = status_from(cells[c++], row);
    }
    rec.metric = num(c++);
    rec.C = num(c++);
    trace.records.push_back(std::move(rec));
  }
  return trace;
}

RunSummary summarize(const SimTrace& trace) {
  RunSummary s;
  s.n_robots = trace.n_robots();
  s.records = static_cast<long>(trace.records.size());
  s.metric_name = trace.metric_name;
  if (!trace.records.empty()) {
    s.t_final = trace.records.back().t;
    s.final_metric = trace.records.back().metric;
    s.final_C = trace.records.back().C;
  }
  s.min_E.assign(static_cast<size_t>(s.n_robots), 1.0);
  s.max_E.assign(static_cast<size_t>(s.n_robots), 0.0);
  for (const auto& rec : trace.records) {
    for (size_t i = 0; i < rec.robots.size(); ++i) {
      s.min_E[i] = std::min(s.min_E[i], rec.robots[i].E);
      s.max_E[i] = std::max(s.max_E[i], rec.robots[i].E);
    }
  }
  for (const auto& ev : trace.events) {
    ++s.event_counts[to_string(ev.kind)];
  }
  return s;
}

std::string summary_json_text(const SimTrace& trace, const Scenario& scenario) {
  using json = nlohmann::ordered_json;
  const RunSummary s = summarize(trace);
  json doc;
  doc["n_robots"] = s.n_robots;
  doc["records"] = s.records;
  doc["t_final"] = s.t_final;
  doc["metric_name"] = s.metric_name;
  doc["final_metric"] = s.final_metric;
  doc["final_C"] = s.final_C;
  doc["min_E"] = s.min_E;
  doc["max_E"] = s.max_E;
  json events = json::object();
  for (const auto& [k, v] : s.event_counts) events[k] = v;
  doc["events"] = events;
  doc["bounds"] = {{"e_min", scenario.cfg.energy.e_min}, {"e_chg", scenario.cfg.energy.e_chg}};
  doc["config"] = json::parse(emit_scenario(scenario));
  return doc.dump(2) + "\n";
}

void write_summary_json(const SimTrace& trace, const Scenario& scenario,
                        const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw TraceIoError("trace: cannot open " + path + " for writing");
  out << summary_json_text(trace, scenario);
}

}  // namespace persistify
