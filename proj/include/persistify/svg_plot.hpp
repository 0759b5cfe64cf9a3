#pragma once

#include "persistify/environment.hpp"
#include "persistify/sim.hpp"

#include <optional>
#include <string>

namespace persistify {

enum class PlotKind { Energy, Cost, Deviation, Trajectory };

PlotKind plot_kind_from(const std::string& name);

struct PlotOptions {
  std::optional<double> e_min;
  std::optional<double> e_chg;
  const SimTrace* overlay = nullptr;        // second trace for deviation plots
  const FieldSpec* field = nullptr;         // contours for trajectory plots
  std::optional<double> i_c;                // bold contour level
  std::optional<Workspace> workspace;
};

/// Hand-emitted static SVG (axes, polylines, tick labels); no plotting
/// dependency. A one-record trace yields a valid axes-only document.
std::string render_plot(const SimTrace& trace, PlotKind kind, const PlotOptions& opts = {});

void write_plot(const SimTrace& trace, PlotKind kind, const std::string& path,
                const PlotOptions& opts = {});

}  // namespace persistify
