#include "ercmc/model_config.hpp"

#include <sstream>

#include "ercmc/error.hpp"

namespace ercmc {

const char* to_string(PosMode mode) {
  switch (mode) {
    case PosMode::relative: return "relative";
    case PosMode::sinusoidal: return "sinusoidal";
    case PosMode::learned: return "learned";
    case PosMode::none: return "none";
  }
  return "?";
}

PosMode parse_pos_mode(const std::string& text) {
  if (text == "relative" || text == "R") return PosMode::relative;
  if (text == "sinusoidal" || text == "S") return PosMode::sinusoidal;
  if (text == "learned" || text == "L") return PosMode::learned;
  if (text == "none" || text == "N") return PosMode::none;
  throw ConfigError("unknown pos_mode '" + text + "' (relative|sinusoidal|learned|none)");
}

const char* to_string(ContextKind kind) {
  switch (kind) {
    case ContextKind::historical: return "historical";
    case ContextKind::speaker: return "speaker";
    case ContextKind::future: return "future";
  }
  return "?";
}

ContextSet parse_contexts(const std::string& text) {
  if (text == "raw") return ContextSet{false, false, false, true};
  ContextSet set{false, false, false, false};
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item == "c") set.historical = true;
    else if (item == "s") set.speaker = true;
    else if (item == "pf") set.future = true;
    else throw ConfigError("unknown context '" + item + "' in '" + text + "' (use c, s, pf or raw)");
  }
  if (set.count() == 0) throw ConfigError("contexts must name at least one of c, s, pf, or be raw");
  return set;
}

std::string to_string(const ContextSet& set) {
  if (set.raw) return "raw";
  std::string out;
  auto add = [&](bool on, const char* name) {
    if (!on) return;
    if (!out.empty()) out += ',';
    out += name;
  };
  add(set.historical, "c");
  add(set.speaker, "s");
  add(set.future, "pf");
  return out;
}

void ModelConfig::validate() const {
  if (d_m == 0) throw ConfigError("model.d_m must be positive");
  if (num_classes < 1) throw ConfigError("model needs at least one class");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("model.dropout must lie in [0, 1)");
  if (contexts.raw) {
    if (contexts.count() != 0) throw ConfigError("raw mode cannot be combined with contexts");
    return;
  }
  if (contexts.count() == 0) throw ConfigError("no context enabled (set model.contexts or raw)");
  if (n_h == 0 || d_m % n_h != 0) {
    throw ConfigError("model.d_m=" + std::to_string(d_m) + " is not divisible by model.n_h=" +
                      std::to_string(n_h));
  }
  if (composition_count() == 0) {
    throw ConfigError("use_h, use_s and use_t are all off; the classifier would have no input");
  }
  if (contexts.future && futures == 0) throw ConfigError("model.m must be >= 1 with pf enabled");
}

}  // namespace ercmc
