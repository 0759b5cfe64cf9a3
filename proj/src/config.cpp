#include "persistify/config.hpp"

#include <json.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace persistify {

using json = nlohmann::ordered_json;

namespace {

struct Ctx {
  const std::string* text = nullptr;  // original source, for line lookup
};

// Best-effort line number of a key's first occurrence in the source text.
std::string locate(const Ctx& ctx, const std::string& key) {
  if (!ctx.text) return "";
  const std::string needle = "\"" + key + "\"";
  const size_t pos = ctx.text->find(needle);
  if (pos == std::string::npos) return "";
  long line = 1;
  for (size_t i = 0; i < pos; ++i) {
    if ((*ctx.text)[i] == '\n') ++line;
  }
  return " (line " + std::to_string(line) + ")";
}

[[noreturn]] void fail(const Ctx& ctx, const std::string& path, const std::string& what,
                       const std::string& key = "") {
  throw ConfigError("config: " + path + ": " + what +
                    locate(ctx, key.empty() ? path.substr(path.rfind('.') + 1) : key));
}

void check_keys(const Ctx& ctx, const json& obj, const std::string& path,
                const std::set<std::string>& allowed) {
  if (!obj.is_object()) fail(ctx, path, "expected an object");
  for (const auto& item : obj.items()) {
    if (!allowed.count(item.key())) {
      fail(ctx, path + "." + item.key(), "unknown key", item.key());
    }
  }
}

double get_num(const Ctx& ctx, const json& obj, const std::string& path, const std::string& key,
               double fallback) {
  if (!obj.contains(key) || obj.at(key).is_null()) return fallback;
  if (!obj.at(key).is_number()) fail(ctx, path + "." + key, "expected a number", key);
  return obj.at(key).get<double>();
}

long get_int(const Ctx& ctx, const json& obj, const std::string& path, const std::string& key,
             long fallback) {
  if (!obj.contains(key) || obj.at(key).is_null()) return fallback;
  if (!obj.at(key).is_number_integer()) fail(ctx, path + "." + key, "expected an integer", key);
  return obj.at(key).get<long>();
}

bool get_bool(const Ctx& ctx, const json& obj, const std::string& path, const std::string& key,
              bool fallback) {
  if (!obj.contains(key) || obj.at(key).is_null()) return fallback;
  if (!obj.at(key).is_boolean()) fail(ctx, path + "." + key, "expected a boolean", key);
  return obj.at(key).get<bool>();
}

std::string get_str(const Ctx& ctx, const json& obj, const std::string& path,
                    const std::string& key, const std::string& fallback) {
  if (!obj.contains(key) || obj.at(key).is_null()) return fallback;
  if (!obj.at(key).is_string()) fail(ctx, path + "." + key, "expected a string", key);
  return obj.at(key).get<std::string>();
}

Vec2 get_vec2(const Ctx& ctx, const json& v, const std::string& path) {
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
    fail(ctx, path, "expected [x, y]");
  }
  return {v[0].get<double>(), v[1].get<double>()};
}

SinusoidEntry parse_entry(const Ctx& ctx, const json& v, const std::string& path) {
  SinusoidEntry e;
  if (v.is_number()) {  // shorthand: a bare constant
    e.offset = v.get<double>();
    return e;
  }
  check_keys(ctx, v, path, {"const", "amp", "omega", "phase"});
  e.offset = get_num(ctx, v, path, "const", 0.0);
  e.amp = get_num(ctx, v, path, "amp", 0.0);
  e.omega = get_num(ctx, v, path, "omega", 0.0);
  e.phase = get_num(ctx, v, path, "phase", 0.0);
  return e;
}

FieldSpec parse_field(const Ctx& ctx, const json& f) {
  FieldSpec spec;
  const std::string kind = get_str(ctx, f, "field", "kind", "constant");
  if (kind == "constant") {
    check_keys(ctx, f, "field", {"kind", "value"});
    spec.kind = FieldKind::Constant;
    spec.constant_value = get_num(ctx, f, "field", "value", 0.5);
  } else if (kind == "gaussian-mixture-time-varying") {
    check_keys(ctx, f, "field", {"kind", "preset", "components"});
    spec.kind = FieldKind::GaussianMixture;
    const std::string preset = get_str(ctx, f, "field", "preset", "");
    if (!preset.empty()) {
      if (f.contains("components")) fail(ctx, "field", "give either preset or components");
      if (preset != "paper-exploration") fail(ctx, "field.preset", "unknown preset", "preset");
      spec = FieldSpec::paper_exploration();
    } else {
      if (!f.contains("components") || !f.at("components").is_array()) {
        fail(ctx, "field.components", "expected an array", "components");
      }
      int ci = 0;
      for (const auto& comp : f.at("components")) {
        const std::string cpath = "field.components[" + std::to_string(ci++) + "]";
        check_keys(ctx, comp, cpath, {"center", "width", "modulation"});
        GaussianComponent g;
        if (!comp.contains("center")) fail(ctx, cpath + ".center", "required", "center");
        g.center = get_vec2(ctx, comp.at("center"), cpath + ".center");
        g.width = get_num(ctx, comp, cpath, "width", 1.0);
        if (comp.contains("modulation") && !comp.at("modulation").is_null()) {
          const json& m = comp.at("modulation");
          if (!m.is_array() || m.size() != 2 || !m[0].is_array() || m[0].size() != 2 ||
              !m[1].is_array() || m[1].size() != 2) {
            fail(ctx, cpath + ".modulation", "expected a 2x2 array", "modulation");
          }
          for (int r = 0; r < 2; ++r) {
            for (int c = 0; c < 2; ++c) {
              g.modulation[static_cast<size_t>(r)][static_cast<size_t>(c)] =
                  parse_entry(ctx, m[static_cast<size_t>(r)][static_cast<size_t>(c)],
                              cpath + ".modulation");
            }
          }
        }
        spec.components.push_back(g);
      }
    }
  } else if (kind == "bump-stations") {
    check_keys(ctx, f, "field", {"kind", "stations", "radius", "plateau", "plateau_fraction"});
    spec.kind = FieldKind::BumpStations;
    if (!f.contains("stations") || !f.at("stations").is_array()) {
      fail(ctx, "field.stations", "expected an array", "stations");
    }
    for (const auto& st : f.at("stations")) {
      spec.stations.push_back(get_vec2(ctx, st, "field.stations"));
    }
    spec.radius = get_num(ctx, f, "field", "radius", 0.25);
    spec.plateau = get_num(ctx, f, "field", "plateau", 1.0);
    spec.plateau_fraction = get_num(ctx, f, "field", "plateau_fraction", 0.6);
  } else {
    fail(ctx, "field.kind", "must be constant, gaussian-mixture-time-varying or bump-stations",
         "kind");
  }
  return spec;
}

InfoDensity parse_density(const Ctx& ctx, const json& d) {
  InfoDensity out;
  const std::string kind = get_str(ctx, d, "density", "kind", "constant");
  if (kind == "constant") {
    check_keys(ctx, d, "density", {"kind", "value"});
    out = InfoDensity::constant(get_num(ctx, d, "density", "value", 1.0));
  } else if (kind == "gaussian") {
    check_keys(ctx, d, "density", {"kind", "center", "sigma2"});
    Vec2 center{0.0, 0.0};
    if (d.contains("center")) center = get_vec2(ctx, d.at("center"), "density.center");
    out = InfoDensity::gaussian(center, get_num(ctx, d, "density", "sigma2", 0.1));
  } else {
    fail(ctx, "density.kind", "must be gaussian or constant", "kind");
  }
  return out;
}

Scenario parse_doc(const json& doc, const Ctx& ctx) {
  check_keys(ctx, doc, "scenario",
             {"workspace", "field", "density", "energy", "persistence", "task", "sim", "output"});
  Scenario s;

  if (doc.contains("workspace")) {
    const json& w = doc.at("workspace");
    check_keys(ctx, w, "workspace", {"lower", "upper"});
    if (w.contains("lower")) s.cfg.workspace.lower = get_vec2(ctx, w.at("lower"), "workspace.lower");
    if (w.contains("upper")) s.cfg.workspace.upper = get_vec2(ctx, w.at("upper"), "workspace.upper");
  }
  if (doc.contains("field")) s.cfg.field = parse_field(ctx, doc.at("field"));
  if (doc.contains("density")) s.cfg.density = parse_density(ctx, doc.at("density"));

  if (doc.contains("energy")) {
    const json& e = doc.at("energy");
    check_keys(ctx, e, "energy", {"k", "lambda", "i_c", "e_min", "e_chg"});
    s.cfg.energy.k = get_num(ctx, e, "energy", "k", s.cfg.energy.k);
    s.cfg.energy.lambda = get_num(ctx, e, "energy", "lambda", s.cfg.energy.lambda);
    s.cfg.energy.i_c = get_num(ctx, e, "energy", "i_c", s.cfg.energy.i_c);
    s.cfg.energy.e_min = get_num(ctx, e, "energy", "e_min", s.cfg.energy.e_min);
    s.cfg.energy.e_chg = get_num(ctx, e, "energy", "e_chg", s.cfg.energy.e_chg);
  }

  if (doc.contains("persistence")) {
    const json& p = doc.at("persistence");
    check_keys(ctx, p, "persistence",
               {"enabled", "gamma1", "gamma2", "clf_gamma", "clf_enabled", "kappa_max",
                "e_activation_fraction", "eps_row", "eps_vacuous", "latch_release_steps"});
    auto& pp = s.cfg.persistence;
    pp.enabled = get_bool(ctx, p, "persistence", "enabled", pp.enabled);
    pp.cbf_gains.gamma1 = get_num(ctx, p, "persistence", "gamma1", pp.cbf_gains.gamma1);
    pp.cbf_gains.gamma2 = get_num(ctx, p, "persistence", "gamma2", pp.cbf_gains.gamma2);
    pp.clf_gamma = get_num(ctx, p, "persistence", "clf_gamma", pp.clf_gamma);
    pp.clf_enabled = get_bool(ctx, p, "persistence", "clf_enabled", pp.clf_enabled);
    pp.kappa_max = get_num(ctx, p, "persistence", "kappa_max", pp.kappa_max);
    pp.e_activation_fraction =
        get_num(ctx, p, "persistence", "e_activation_fraction", pp.e_activation_fraction);
    pp.eps_row = get_num(ctx, p, "persistence", "eps_row", pp.eps_row);
    pp.eps_vacuous = get_num(ctx, p, "persistence", "eps_vacuous", pp.eps_vacuous);
    pp.latch_release_steps = static_cast<int>(
        get_int(ctx, p, "persistence", "latch_release_steps", pp.latch_release_steps));
  }

  if (doc.contains("task")) {
    const json& t = doc.at("task");
    check_keys(ctx, t, "task", {"kind", "K", "u_max", "kp", "grid"});
    const std::string kind = get_str(ctx, t, "task", "kind", "explore");
    if (kind == "explore") {
      s.cfg.task.kind = TaskKind::Explore;
    } else if (kind == "coverage") {
      s.cfg.task.kind = TaskKind::Coverage;
    } else {
      fail(ctx, "task.kind", "must be explore or coverage", "kind");
    }
    s.cfg.task.K = static_cast<int>(get_int(ctx, t, "task", "K", s.cfg.task.K));
    s.cfg.task.u_max = get_num(ctx, t, "task", "u_max", s.cfg.task.u_max);
    s.cfg.task.kp = get_num(ctx, t, "task", "kp", s.cfg.task.kp);
    if (t.contains("grid") && !t.at("grid").is_null()) {
      const Vec2 g = get_vec2(ctx, t.at("grid"), "task.grid");
      s.cfg.task.grid = Eigen::Vector2i(static_cast<int>(g.x()), static_cast<int>(g.y()));
    }
  }

  if (doc.contains("sim")) {
    const json& m = doc.at("sim");
    check_keys(ctx, m, "sim",
               {"n_robots", "dt", "T", "integrator", "seed", "initial", "u_max"});
    s.cfg.sim.n_robots = static_cast<int>(get_int(ctx, m, "sim", "n_robots", s.cfg.sim.n_robots));
    s.cfg.sim.dt = get_num(ctx, m, "sim", "dt", s.cfg.sim.dt);
    s.cfg.sim.T = get_num(ctx, m, "sim", "T", s.cfg.sim.T);
    const std::string integ = get_str(ctx, m, "sim", "integrator", "euler");
    if (integ == "euler") {
      s.cfg.sim.integrator = IntegratorKind::Euler;
    } else if (integ == "rk4") {
      s.cfg.sim.integrator = IntegratorKind::Rk4;
    } else {
      fail(ctx, "sim.integrator", "must be euler or rk4", "integrator");
    }
    s.cfg.sim.seed = static_cast<std::uint64_t>(get_int(ctx, m, "sim", "seed", 1));
    if (m.contains("initial") && !m.at("initial").is_null()) {
      if (!m.at("initial").is_array()) fail(ctx, "sim.initial", "expected an array", "initial");
      int ri = 0;
      for (const auto& st : m.at("initial")) {
        const std::string rpath = "sim.initial[" + std::to_string(ri++) + "]";
        check_keys(ctx, st, rpath, {"x", "e"});
        AugmentedState z;
        if (!st.contains("x")) fail(ctx, rpath + ".x", "required", "x");
        z.x = get_vec2(ctx, st.at("x"), rpath + ".x");
        z.E = get_num(ctx, st, rpath, "e", 0.5);
        s.cfg.sim.initial_states.push_back(z);
      }
    }
    if (m.contains("u_max") && !m.at("u_max").is_null()) {
      s.cfg.sim.u_max = get_num(ctx, m, "sim", "u_max", 0.0);
    }
  }

  if (doc.contains("output")) {
    const json& o = doc.at("output");
    check_keys(ctx, o, "output", {"dir", "stem"});
    s.output.dir = get_str(ctx, o, "output", "dir", s.output.dir);
    s.output.stem = get_str(ctx, o, "output", "stem", s.output.stem);
  }

  try {
    s.cfg.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return s;
}

json entry_to_json(const SinusoidEntry& e) {
  json v;
  v["const"] = e.offset;
  v["amp"] = e.amp;
  v["omega"] = e.omega;
  v["phase"] = e.phase;
  return v;
}

json field_to_json(const FieldSpec& f) {
  json v;
  switch (f.kind) {
    case FieldKind::Constant:
      v["kind"] = "constant";
      v["value"] = f.constant_value;
      break;
    case FieldKind::GaussianMixture: {
      v["kind"] = "gaussian-mixture-time-varying";
      json comps = json::array();
      for (const auto& c : f.components) {
        json cj;
        cj["center"] = {c.center.x(), c.center.y()};
        cj["width"] = c.width;
        cj["modulation"] = {{entry_to_json(c.modulation[0][0]), entry_to_json(c.modulation[0][1])},
                            {entry_to_json(c.modulation[1][0]), entry_to_json(c.modulation[1][1])}};
        comps.push_back(cj);
      }
      v["components"] = comps;
      break;
    }
    case FieldKind::BumpStations: {
      v["kind"] = "bump-stations";
      json st = json::array();
      for (const auto& s : f.stations) st.push_back({s.x(), s.y()});
      v["stations"] = st;
      v["radius"] = f.radius;
      v["plateau"] = f.plateau;
      v["plateau_fraction"] = f.plateau_fraction;
      break;
    }
  }
  return v;
}

}  // namespace

Scenario parse_scenario(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  Ctx ctx{&text};
  return parse_doc(doc, ctx);
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

std::string emit_scenario(const Scenario& s) {
  const SimConfig& c = s.cfg;
  json doc;
  doc["workspace"] = {{"lower", {c.workspace.lower.x(), c.workspace.lower.y()}},
                      {"upper", {c.workspace.upper.x(), c.workspace.upper.y()}}};
  doc["field"] = field_to_json(c.field);
  if (c.density.kind == DensityKind::Constant) {
    doc["density"] = {{"kind", "constant"}, {"value", c.density.value}};
  } else {
    doc["density"] = {{"kind", "gaussian"},
                      {"center", {c.density.center.x(), c.density.center.y()}},
                      {"sigma2", c.density.sigma2}};
  }
  doc["energy"] = {{"k", c.energy.k},
                   {"lambda", c.energy.lambda},
                   {"i_c", c.energy.i_c},
                   {"e_min", c.energy.e_min},
                   {"e_chg", c.energy.e_chg}};
  doc["persistence"] = {{"enabled", c.persistence.enabled},
                        {"gamma1", c.persistence.cbf_gains.gamma1},
                        {"gamma2", c.persistence.cbf_gains.gamma2},
                        {"clf_gamma", c.persistence.clf_gamma},
                        {"clf_enabled", c.persistence.clf_enabled},
                        {"kappa_max", c.persistence.kappa_max},
                        {"e_activation_fraction", c.persistence.e_activation_fraction},
                        {"eps_row", c.persistence.eps_row},
                        {"eps_vacuous", c.persistence.eps_vacuous},
                        {"latch_release_steps", c.persistence.latch_release_steps}};
  const char* task_kind = nullptr;
  switch (c.task.kind) {
    case TaskKind::Explore: task_kind = "explore"; break;
    case TaskKind::Coverage: task_kind = "coverage"; break;
    case TaskKind::None: throw std::logic_error("emit_scenario: task kind none is not a file kind");
  }
  doc["task"] = {{"kind", task_kind},
                 {"K", c.task.K},
                 {"u_max", c.task.u_max},
                 {"kp", c.task.kp},
                 {"grid", {c.task.grid.x(), c.task.grid.y()}}};
  json sim;
  sim["n_robots"] = c.sim.n_robots;
  sim["dt"] = c.sim.dt;
  sim["T"] = c.sim.T;
  sim["integrator"] = c.sim.integrator == IntegratorKind::Euler ? "euler" : "rk4";
  sim["seed"] = c.sim.seed;
  if (c.sim.initial_states.empty()) {
    sim["initial"] = nullptr;
  } else {
    json arr = json::array();
    for (const auto& z : c.sim.initial_states) {
      arr.push_back({{"x", {z.x.x(), z.x.y()}}, {"e", z.E}});
    }
    sim["initial"] = arr;
  }
  sim["u_max"] = c.sim.u_max ? json(*c.sim.u_max) : json(nullptr);
  doc["sim"] = sim;
  doc["output"] = {{"dir", s.output.dir}, {"stem", s.output.stem}};
  return doc.dump(2) + "\n";
}

Scenario apply_overrides(const Scenario& s, const std::vector<std::string>& overrides) {
  if (overrides.empty()) return s;
  json doc = json::parse(emit_scenario(s));
  for (const std::string& ov : overrides) {
    const size_t eq = ov.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ConfigError("config: override must look like section.key=value: " + ov);
    }
    std::string path = "/" + ov.substr(0, eq);
    for (auto& ch : path) {
      if (ch == '.') ch = '/';
    }
    const std::string raw = ov.substr(eq + 1);
    json value = json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;  // unquoted strings
    try {
      doc[json::json_pointer(path)] = value;
    } catch (const json::exception& e) {
      throw ConfigError("config: bad override path " + ov + ": " + e.what());
    }
  }
  const std::string text = doc.dump(2);
  return parse_scenario(text);
}

}  // namespace persistify
