#include "persistify/config.hpp"
#include "persistify/sim.hpp"
#include "persistify/svg_plot.hpp"
#include "persistify/trace_io.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

namespace {

namespace fs = std::filesystem;
using persistify::Scenario;

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

Scenario load_with_overrides(const std::string& path, const std::vector<std::string>& sets) {
  if (!fs::exists(path)) {
    throw persistify::ConfigError("config: no such file: " + path);
  }
  Scenario s = persistify::load_scenario(path);
  if (const char* env = std::getenv("PERSISTIFY_OUT"); env && *env) {
    s.output.dir = env;
  }
  return persistify::apply_overrides(s, sets);
}

fs::path ensure_out_dir(const Scenario& s) {
  fs::path dir(s.output.dir);
  if (!dir.empty()) fs::create_directories(dir);
  return dir;
}

int cmd_run(const std::string& cfg_path, const std::vector<std::string>& sets) {
  const Scenario s = load_with_overrides(cfg_path, sets);
  const persistify::SimTrace trace = persistify::run(s.cfg);
  const fs::path dir = ensure_out_dir(s);
  const fs::path trace_path = dir / (s.output.stem + ".csv");
  const fs::path summary_path = dir / (s.output.stem + ".summary.json");
  persistify::write_trace_csv(trace, trace_path.string());
  persistify::write_summary_json(trace, s, summary_path.string());
  std::cout << persistify::summary_json_text(trace, s);
  std::cerr << "wrote " << trace_path.string() << " and " << summary_path.string() << "\n";
  return 0;
}

int cmd_compare_clf(const std::string& cfg_path, const std::vector<std::string>& sets) {
  const Scenario s = load_with_overrides(cfg_path, sets);
  if (s.cfg.task.kind != persistify::TaskKind::Explore) {
    throw persistify::ConfigError("config: compare-clf expects task.kind=explore");
  }
  const persistify::ClfComparison cmp = persistify::compare_clf(s.cfg);
  const fs::path dir = ensure_out_dir(s);
  const fs::path with_path = dir / (s.output.stem + "_with_clf.csv");
  const fs::path without_path = dir / (s.output.stem + "_without_clf.csv");
  persistify::write_trace_csv(cmp.with_clf, with_path.string());
  persistify::write_trace_csv(cmp.without_clf, without_path.string());
  nlohmann::ordered_json doc;
  doc["c_with"] = cmp.c_with;
  doc["c_without"] = cmp.c_without;
  doc["ratio"] = cmp.ratio;
  doc["trace_with"] = with_path.string();
  doc["trace_without"] = without_path.string();
  std::cout << doc.dump(2) << "\n";
  return 0;
}

int cmd_plot(const std::string& trace_path, const std::string& kind_name,
             const std::string& out_path, const std::string& summary_path,
             const std::string& overlay_path) {
  const persistify::SimTrace trace = persistify::read_trace_csv(trace_path);
  const persistify::PlotKind kind = persistify::plot_kind_from(kind_name);

  persistify::PlotOptions opts;
  persistify::SimTrace overlay;
  if (!overlay_path.empty()) {
    overlay = persistify::read_trace_csv(overlay_path);
    opts.overlay = &overlay;
  }

  // Band bounds and the charging field come from the run summary written next
  // to the trace (or an explicit --summary).
  std::string sidecar = summary_path;
  if (sidecar.empty()) {
    fs::path guess(trace_path);
    guess.replace_extension("");
    guess += ".summary.json";
    if (fs::exists(guess)) sidecar = guess.string();
  }
  std::optional<Scenario> scen;
  if (!sidecar.empty()) {
    std::ifstream in(sidecar);
    if (!in) throw persistify::ConfigError("config: cannot open " + sidecar);
    nlohmann::json doc;
    try {
      in >> doc;
    } catch (const nlohmann::json::exception& e) {
      throw persistify::ConfigError("config: bad summary json: " + std::string(e.what()));
    }
    if (doc.contains("config")) {
      scen = persistify::parse_scenario(doc["config"].dump());
    }
  }
  if (scen) {
    opts.e_min = scen->cfg.energy.e_min;
    opts.e_chg = scen->cfg.energy.e_chg;
    opts.i_c = scen->cfg.energy.i_c;
    opts.field = &scen->cfg.field;
    opts.workspace = scen->cfg.workspace;
  } else if (kind == persistify::PlotKind::Energy || kind == persistify::PlotKind::Trajectory) {
    std::cerr << "note: no run summary found next to the trace; plotting without band lines"
                 " or field contours\n";
  }

  persistify::write_plot(trace, kind, out_path, opts);
  std::cerr << "wrote " << out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"persistify: energy-persistent multi-robot task simulation"};
  app.require_subcommand(1);

  std::string cfg_path, trace_path, kind_name, out_path, summary_path, overlay_path;
  std::vector<std::string> sets;

  auto* run_cmd = app.add_subcommand("run", "run a scenario and write trace + summary");
  run_cmd->add_option("config", cfg_path, "scenario file")->required();
  run_cmd->add_option("--set", sets, "override, e.g. --set sim.T=100")->take_all();

  auto* plot_cmd = app.add_subcommand("plot", "render a trace to a static SVG");
  plot_cmd->add_option("trace", trace_path, "trace CSV")->required();
  plot_cmd->add_option("--kind", kind_name, "energy|cost|deviation|trajectory")->required();
  plot_cmd->add_option("-o,--output", out_path, "output SVG path")->required();
  plot_cmd->add_option("--summary", summary_path, "run summary JSON (default: sibling file)");
  plot_cmd->add_option("--overlay", overlay_path, "second trace for deviation overlays");

  auto* cmp_cmd = app.add_subcommand("compare-clf", "run twice, recharge row on vs. off");
  cmp_cmd->add_option("config", cfg_path, "scenario file")->required();
  cmp_cmd->add_option("--set", sets, "override, e.g. --set sim.T=100")->take_all();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitConfig;
  }

  try {
    if (run_cmd->parsed()) return cmd_run(cfg_path, sets);
    if (cmp_cmd->parsed()) return cmd_compare_clf(cfg_path, sets);
    if (plot_cmd->parsed()) {
      return cmd_plot(trace_path, kind_name, out_path, summary_path, overlay_path);
    }
  } catch (const persistify::ConfigError& e) {
    std::cerr << e.what() << "\n";
    return kExitConfig;
  } catch (const persistify::TraceIoError& e) {
    std::cerr << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "fatal: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitConfig;
}
