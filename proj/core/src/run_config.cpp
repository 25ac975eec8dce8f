#include "ercmc/run_config.hpp"

#include <charconv>
#include <fstream>
#include <limits>
#include <sstream>

#include "ercmc/error.hpp"

namespace ercmc {
namespace {

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::size_t parse_size(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size()) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double out = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": expected true/false, got '" + v + "'");
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(std::numeric_limits<double>::max_digits10);
  os << v;
  return os.str();
}

const char* bool_text(bool b) { return b ? "true" : "false"; }

}  // namespace

const char* to_string(HeadlineMetric metric) {
  return metric == HeadlineMetric::weighted_f1 ? "weighted_f1" : "micro_f1_excluding";
}

void TrainOptions::validate() const {
  if (epochs < 1) throw ConfigError("train.epochs must be >= 1");
  if (grad_accum < 1) throw ConfigError("train.grad_accum must be >= 1");
  if (batch_conversations < 1) throw ConfigError("train.batch_conversations must be >= 1");
  if (!(lr > 0.0)) throw ConfigError("train.lr must be positive");
  if (precision != 32 && precision != 64) throw ConfigError("train.precision must be 32 or 64");
  if (weight_decay < 0.0) throw ConfigError("train.weight_decay must be >= 0");
  if (clip_norm && !(*clip_norm > 0.0)) throw ConfigError("train.clip_norm must be positive");
}

std::vector<std::string> known_config_keys() {
  RunConfig defaults;
  std::vector<std::string> keys;
  for (auto& [k, v] : defaults.entries()) keys.push_back(k);
  return keys;
}

void RunConfig::set(const std::string& raw_key, const std::string& raw_value) {
  const std::string key = trim(raw_key);
  const std::string v = trim(raw_value);
  static const std::pair<const char*, std::string SplitFiles::*> kFileKinds[] = {
      {"data", &SplitFiles::data}, {"embeddings", &SplitFiles::embeddings},
      {"futures", &SplitFiles::futures}};
  for (const auto& [kind, member] : kFileKinds) {
    const std::string k(kind);
    if (key == k + ".train") { train.*member = v; return; }
    if (key == k + ".dev") { dev.*member = v; return; }
    if (key == k + ".test") { test.*member = v; return; }
  }
  if (key == "data.vocab") { vocab = v; return; }

  if (key == "model.d_m") { model.d_m = parse_size(key, v); return; }
  if (key == "model.n_h") { model.n_h = parse_size(key, v); return; }
  if (key == "model.window") { model.window = parse_size(key, v); return; }
  if (key == "model.m") { model.futures = parse_size(key, v); return; }
  if (key == "model.k") { model.history = parse_size(key, v); return; }
  if (key == "model.dropout") { model.dropout = parse_double(key, v); return; }
  if (key == "model.pos_mode") { model.pos_mode = parse_pos_mode(v); return; }
  if (key == "model.contexts") { model.contexts = parse_contexts(v); return; }
  if (key == "model.use_h") { model.use_h = parse_bool(key, v); return; }
  if (key == "model.use_s") { model.use_s = parse_bool(key, v); return; }
  if (key == "model.use_t") { model.use_t = parse_bool(key, v); return; }
  if (key == "model.share_rp") { model.share_rp = parse_bool(key, v); return; }

  if (key == "train.epochs") { training.epochs = parse_size(key, v); return; }
  if (key == "train.lr") { training.lr = parse_double(key, v); return; }
  if (key == "train.batch_conversations") { training.batch_conversations = parse_size(key, v); return; }
  if (key == "train.grad_accum") { training.grad_accum = parse_size(key, v); return; }
  if (key == "train.seed") { training.seed = parse_size(key, v); return; }
  if (key == "train.precision") {
    training.precision = static_cast<int>(parse_size(key, v));
    if (training.precision != 32 && training.precision != 64) {
      throw ConfigError("train.precision must be 32 or 64");
    }
    return;
  }
  if (key == "train.metric") {
    if (v == "weighted_f1" || v == "weighted") training.metric = HeadlineMetric::weighted_f1;
    else if (v == "micro_f1_excluding" || v == "micro") training.metric = HeadlineMetric::micro_f1_excluding;
    else throw ConfigError("train.metric must be weighted_f1 or micro_f1_excluding");
    return;
  }
  if (key == "train.neutral_label") { training.neutral_label = v; return; }
  if (key == "train.weight_decay") { training.weight_decay = parse_double(key, v); return; }
  if (key == "train.clip_norm") {
    if (v.empty() || v == "none") training.clip_norm.reset();
    else training.clip_norm = parse_double(key, v);
    return;
  }
  throw ConfigError("unknown config key '" + key + "'");
}

void RunConfig::set(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("expected key=value, got '" + assignment + "'");
  set(assignment.substr(0, eq), assignment.substr(eq + 1));
}

RunConfig RunConfig::parse(std::istream& in) {
  RunConfig cfg;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = trim(line);
    if (body.empty() || body[0] == '#') continue;
    if (body.find('=') == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + " is not key=value: '" + body + "'");
    }
    try {
      cfg.set(body);
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  return parse(in);
}

std::vector<std::pair<std::string, std::string>> RunConfig::entries() const {
  std::vector<std::pair<std::string, std::string>> out = {
      {"data.train", train.data},
      {"data.dev", dev.data},
      {"data.test", test.data},
      {"data.vocab", vocab},
      {"embeddings.train", train.embeddings},
      {"embeddings.dev", dev.embeddings},
      {"embeddings.test", test.embeddings},
      {"futures.train", train.futures},
      {"futures.dev", dev.futures},
      {"futures.test", test.futures},
      {"model.d_m", std::to_string(model.d_m)},
      {"model.n_h", std::to_string(model.n_h)},
      {"model.window", std::to_string(model.window)},
      {"model.m", std::to_string(model.futures)},
      {"model.k", std::to_string(model.history)},
      {"model.dropout", format_double(model.dropout)},
      {"model.pos_mode", to_string(model.pos_mode)},
      {"model.contexts", to_string(model.contexts)},
      {"model.use_h", bool_text(model.use_h)},
      {"model.use_s", bool_text(model.use_s)},
      {"model.use_t", bool_text(model.use_t)},
      {"model.share_rp", bool_text(model.share_rp)},
      {"train.epochs", std::to_string(training.epochs)},
      {"train.lr", format_double(training.lr)},
      {"train.batch_conversations", std::to_string(training.batch_conversations)},
      {"train.grad_accum", std::to_string(training.grad_accum)},
      {"train.seed", std::to_string(training.seed)},
      {"train.precision", std::to_string(training.precision)},
      {"train.metric", to_string(training.metric)},
      {"train.neutral_label", training.neutral_label},
      {"train.weight_decay", format_double(training.weight_decay)},
      {"train.clip_norm", training.clip_norm ? format_double(*training.clip_norm) : "none"},
  };
  return out;
}

std::string RunConfig::to_text() const {
  std::string out;
  for (const auto& [k, v] : entries()) out += k + "=" + v + "\n";
  return out;
}

const SplitFiles& RunConfig::split(const std::string& name) const {
  if (name == "train") return train;
  if (name == "dev") return dev;
  if (name == "test") return test;
  throw ConfigError("unknown split '" + name + "' (train|dev|test)");
}

void RunConfig::validate() const {
  training.validate();
  ModelConfig probe = model;
  if (probe.num_classes == 0) probe.num_classes = 1;
  probe.validate();
}

}  // namespace ercmc
