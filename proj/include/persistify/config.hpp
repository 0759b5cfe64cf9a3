#pragma once

#include "persistify/sim.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace persistify {

/// Scenario-file problem: carries the offending key path (and line, when the
/// source text is available).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct OutputConfig {
  std::string dir = "out";
  std::string stem = "run";
};

struct Scenario {
  SimConfig cfg;
  OutputConfig output;
};

/// Parses and validates a scenario document. Unknown keys are errors.
Scenario parse_scenario(const std::string& text);
Scenario load_scenario(const std::string& path);

/// Canonical form: every key present, presets expanded, fixed key order.
/// parse(emit(s)) reproduces the same canonical document.
std::string emit_scenario(const Scenario& s);

/// Applies dotted-path overrides ("sim.T=0", "task.kind=coverage") on top of
/// the parsed document, then revalidates.
Scenario apply_overrides(const Scenario& s, const std::vector<std::string>& overrides);

}  // namespace persistify
