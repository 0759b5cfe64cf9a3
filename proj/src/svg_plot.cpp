#include "persistify/svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace persistify {

namespace {

constexpr double kW = 640.0, kH = 400.0;
constexpr double kMarginL = 64.0, kMarginR = 20.0, kMarginT = 24.0, kMarginB = 44.0;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b", "#17becf"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

struct Frame {
  double x0 = 0.0, x1 = 1.0, y0 = 0.0, y1 = 1.0;

  void expand_x(double v) { x0 = std::min(x0, v); x1 = std::max(x1, v); }
  void expand_y(double v) { y0 = std::min(y0, v); y1 = std::max(y1, v); }

  void finalize() {
    if (!(x1 > x0)) x1 = x0 + 1.0;
    if (!(y1 > y0)) y1 = y0 + 1.0;
    const double px = 0.04 * (x1 - x0);
    const double py = 0.06 * (y1 - y0);
    x0 -= px; x1 += px; y0 -= py; y1 += py;
  }

  double px(double x) const { return kMarginL + (x - x0) / (x1 - x0) * (kW - kMarginL - kMarginR); }
  double py(double y) const { return kH - kMarginB - (y - y0) / (y1 - y0) * (kH - kMarginT - kMarginB); }
};

void emit_axes(std::ostringstream& svg, const Frame& f, const std::string& xlabel,
               const std::string& ylabel) {
  svg << "<rect x=\"" << num(kMarginL) << "\" y=\"" << num(kMarginT) << "\" width=\""
      << num(kW - kMarginL - kMarginR) << "\" height=\"" << num(kH - kMarginT - kMarginB)
      << "\" fill=\"none\" stroke=\"#333\" stroke-width=\"1\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double xv = f.x0 + (f.x1 - f.x0) * i / 5.0;
    const double yv = f.y0 + (f.y1 - f.y0) * i / 5.0;
    svg << "<line x1=\"" << num(f.px(xv)) << "\" y1=\"" << num(kH - kMarginB) << "\" x2=\""
        << num(f.px(xv)) << "\" y2=\"" << num(kH - kMarginB + 4) << "\" stroke=\"#333\"/>\n";
    svg << "<text x=\"" << num(f.px(xv)) << "\" y=\"" << num(kH - kMarginB + 16)
        << "\" font-size=\"11\" text-anchor=\"middle\">" << num(xv) << "</text>\n";
    svg << "<line x1=\"" << num(kMarginL - 4) << "\" y1=\"" << num(f.py(yv)) << "\" x2=\""
        << num(kMarginL) << "\" y2=\"" << num(f.py(yv)) << "\" stroke=\"#333\"/>\n";
    svg << "<text x=\"" << num(kMarginL - 7) << "\" y=\"" << num(f.py(yv) + 4)
        << "\" font-size=\"11\" text-anchor=\"end\">" << num(yv) << "</text>\n";
  }
  svg << "<text x=\"" << num((kMarginL + kW - kMarginR) / 2) << "\" y=\"" << num(kH - 8)
      << "\" font-size=\"12\" text-anchor=\"middle\">" << xlabel << "</text>\n";
  svg << "<text x=\"14\" y=\"" << num((kMarginT + kH - kMarginB) / 2)
      << "\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 14 "
      << num((kMarginT + kH - kMarginB) / 2) << ")\">" << ylabel << "</text>\n";
}

void emit_polyline(std::ostringstream& svg, const Frame& f,
                   const std::vector<std::pair<double, double>>& pts, const char* color,
                   double width = 1.4, const char* dash = nullptr) {
  if (pts.empty()) return;
  svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"" << num(width)
      << "\"";
  if (dash) svg << " stroke-dasharray=\"" << dash << "\"";
  svg << " points=\"";
  for (const auto& [x, y] : pts) svg << num(f.px(x)) << "," << num(f.py(y)) << " ";
  svg << "\"/>\n";
}

void emit_hline(std::ostringstream& svg, const Frame& f, double y, const char* color) {
  svg << "<line x1=\"" << num(f.px(f.x0)) << "\" y1=\"" << num(f.py(y)) << "\" x2=\""
      << num(f.px(f.x1)) << "\" y2=\"" << num(f.py(y)) << "\" stroke=\"" << color
      << "\" stroke-width=\"2\"/>\n";
}

std::string finish(std::ostringstream& svg) {
  return "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" "
         "width=\"" + num(kW) + "\" height=\"" + num(kH) + "\" viewBox=\"0 0 " + num(kW) + " " +
         num(kH) + "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n" + svg.str() +
         "</svg>\n";
}

// Marching-squares segments of one level set of the field at time t.
std::vector<std::array<double, 4>> contour_segments(const FieldSpec& field, const Workspace& ws,
                                                    double t, double level, int nx, int ny) {
  std::vector<std::array<double, 4>> segs;
  const double dx = ws.extent().x() / nx;
  const double dy = ws.extent().y() / ny;
  std::vector<double> vals(static_cast<size_t>((nx + 1) * (ny + 1)));
  for (int i = 0; i <= nx; ++i) {
    for (int j = 0; j <= ny; ++j) {
      const Vec2 p(ws.lower.x() + i * dx, ws.lower.y() + j * dy);
      vals[static_cast<size_t>(i * (ny + 1) + j)] = eval_field(field, p, t);
    }
  }
  const auto at = [&](int i, int j) { return vals[static_cast<size_t>(i * (ny + 1) + j)]; };
  const auto lerp = [&](double a, double b) { return (level - a) / (b - a); };
  for (int i = 0; i < nx; ++i) {
    for (int j = 0; j < ny; ++j) {
      const double x = ws.lower.x() + i * dx;
      const double y = ws.lower.y() + j * dy;
      const double v00 = at(i, j), v10 = at(i + 1, j), v01 = at(i, j + 1), v11 = at(i + 1, j + 1);
      std::vector<std::pair<double, double>> pts;
      if ((v00 < level) != (v10 < level)) pts.push_back({x + dx * lerp(v00, v10), y});
      if ((v10 < level) != (v11 < level)) pts.push_back({x + dx, y + dy * lerp(v10, v11)});
      if ((v01 < level) != (v11 < level)) pts.push_back({x + dx * lerp(v01, v11), y + dy});
      if ((v00 < level) != (v01 < level)) pts.push_back({x, y + dy * lerp(v00, v01)});
      if (pts.size() == 2) {
        segs.push_back({pts[0].first, pts[0].second, pts[1].first, pts[1].second});
      } else if (pts.size() == 4) {  // saddle: connect pairwise, orientation is cosmetic
        segs.push_back({pts[0].first, pts[0].second, pts[1].first, pts[1].second});
        segs.push_back({pts[2].first, pts[2].second, pts[3].first, pts[3].second});
      }
    }
  }
  return segs;
}

std::string render_series(const SimTrace& trace, PlotKind kind, const PlotOptions& opts) {
  std::ostringstream body;
  Frame f;
  f.x0 = f.x1 = trace.records.empty() ? 0.0 : trace.records.front().t;
  bool first = true;
  const auto value = [&](const StepRecord& rec, int robot) {
    switch (kind) {
      case PlotKind::Energy: return rec.robots[static_cast<size_t>(robot)].E;
      case PlotKind::Cost: return rec.metric;
      case PlotKind::Deviation: return rec.C;
      default: return 0.0;
    }
  };
  const int n_series = kind == PlotKind::Energy ? std::max(1, trace.n_robots()) : 1;
  for (const auto& rec : trace.records) {
    f.expand_x(rec.t);
    for (int s = 0; s < n_series && s < static_cast<int>(rec.robots.size() + 1); ++s) {
      const double v = value(rec, s);
      if (first) { f.y0 = f.y1 = v; first = false; }
      f.expand_y(v);
    }
  }
  if (opts.overlay && kind == PlotKind::Deviation) {
    for (const auto& rec : opts.overlay->records) {
      f.expand_x(rec.t);
      f.expand_y(rec.C);
    }
  }
  if (kind == PlotKind::Energy) {
    if (opts.e_min) f.expand_y(*opts.e_min);
    if (opts.e_chg) f.expand_y(*opts.e_chg);
  }
  if (first) { f.y0 = 0.0; f.y1 = 1.0; }
  f.finalize();

  const char* ylabel = kind == PlotKind::Energy ? "E"
                       : kind == PlotKind::Cost ? trace.metric_name.c_str()
                                                : "C";
  emit_axes(body, f, "t", ylabel);

  for (int s = 0; s < n_series; ++s) {
    std::vector<std::pair<double, double>> pts;
    for (const auto& rec : trace.records) {
      if (kind == PlotKind::Energy && s >= static_cast<int>(rec.robots.size())) continue;
      pts.push_back({rec.t, value(rec, s)});
    }
    emit_polyline(body, f, pts, kPalette[s % 7]);
  }
  if (opts.overlay && kind == PlotKind::Deviation) {
    std::vector<std::pair<double, double>> pts;
    for (const auto& rec : opts.overlay->records) pts.push_back({rec.t, rec.C});
    emit_polyline(body, f, pts, kPalette[1], 1.4, "6,3");
    body << "<text x=\"" << num(kMarginL + 8) << "\" y=\"" << num(kMarginT + 14)
         << "\" font-size=\"11\" fill=\"" << kPalette[0] << "\">primary</text>\n";
    body << "<text x=\"" << num(kMarginL + 8) << "\" y=\"" << num(kMarginT + 28)
         << "\" font-size=\"11\" fill=\"" << kPalette[1] << "\">overlay</text>\n";
  }
  if (kind == PlotKind::Energy) {
    if (opts.e_min) emit_hline(body, f, *opts.e_min, "#000");
    if (opts.e_chg) emit_hline(body, f, *opts.e_chg, "#000");
  }
  return finish(body);
}

std::string render_trajectory(const SimTrace& trace, const PlotOptions& opts) {
  std::ostringstream body;
  Frame f;
  Workspace ws;
  if (opts.workspace) {
    ws = *opts.workspace;
  } else {
    // infer extents from the trajectories
    bool first = true;
    for (const auto& rec : trace.records) {
      for (const auto& r : rec.robots) {
        if (first) {
          ws.lower = ws.upper = r.x;
          first = false;
        }
        ws.lower = ws.lower.cwiseMin(r.x);
        ws.upper = ws.upper.cwiseMax(r.x);
      }
    }
    if (first) { ws.lower = Vec2(0, 0); ws.upper = Vec2(1, 1); }
    ws.upper += Vec2(1e-6, 1e-6);
  }
  f.x0 = ws.lower.x(); f.x1 = ws.upper.x();
  f.y0 = ws.lower.y(); f.y1 = ws.upper.y();
  f.finalize();
  emit_axes(body, f, "x1", "x2");

  if (opts.field) {
    const double t = trace.records.empty() ? 0.0 : trace.records.back().t;
    std::vector<double> levels = {0.25, 0.5, 0.75};
    for (double lv : levels) {
      for (const auto& s : contour_segments(*opts.field, ws, t, lv, 96, 72)) {
        emit_polyline(body, f, {{s[0], s[1]}, {s[2], s[3]}}, "#bba14f", 0.8);
      }
    }
    if (opts.i_c) {
      for (const auto& s : contour_segments(*opts.field, ws, t, *opts.i_c, 96, 72)) {
        emit_polyline(body, f, {{s[0], s[1]}, {s[2], s[3]}}, "#7a6410", 1.8);
      }
    }
  }

  const int n = trace.n_robots();
  for (int i = 0; i < n; ++i) {
    std::vector<std::pair<double, double>> pts;
    for (const auto& rec : trace.records) {
      pts.push_back({rec.robots[static_cast<size_t>(i)].x.x(),
                     rec.robots[static_cast<size_t>(i)].x.y()});
    }
    emit_polyline(body, f, pts, kPalette[i % 7]);
    if (!pts.empty()) {
      body << "<circle cx=\"" << num(f.px(pts.back().first)) << "\" cy=\""
           << num(f.py(pts.back().second)) << "\" r=\"3.5\" fill=\"" << kPalette[i % 7]
           << "\"/>\n";
    }
  }
  return finish(body);
}

}  // namespace

PlotKind plot_kind_from(const std::string& name) {
  if (name == "energy") return PlotKind::Energy;
  if (name == "cost") return PlotKind::Cost;
  if (name == "deviation") return PlotKind::Deviation;
  if (name == "trajectory") return PlotKind::Trajectory;
  throw std::invalid_argument("plot: kind must be energy, cost, deviation or trajectory");
}

std::string render_plot(const SimTrace& trace, PlotKind kind, const PlotOptions& opts) {
  if (kind == PlotKind::Trajectory) return render_trajectory(trace, opts);
  return render_series(trace, kind, opts);
}

void write_plot(const SimTrace& trace, PlotKind kind, const std::string& path,
                const PlotOptions& opts) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("plot: cannot open " + path + " for writing");
  out << render_plot(trace, kind, opts);
}

}  // namespace persistify
