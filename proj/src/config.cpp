#include "pcrnn/config.hpp"

#include <cstdio>
#include <sstream>

#include "pcrnn/enum_names.hpp"

namespace pcrnn {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::size_t parse_size(const std::string& v, const std::string& key) {
  try {
    std::size_t used = 0;
    const auto out = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return static_cast<std::size_t>(out);
  } catch (const std::exception&) {
    throw ConfigError("bad value '" + v + "' for key " + key + " (expected an integer)");
  }
}

double parse_double(const std::string& v, const std::string& key) {
  try {
    std::size_t used = 0;
    const double out = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("bad value '" + v + "' for key " + key + " (expected a number)");
  }
}

bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "1" || v == "true") return true;
  if (v == "0" || v == "false") return false;
  throw ConfigError("bad value '" + v + "' for key " + key + " (expected 0/1/true/false)");
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void set_key(RunConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "train_path") cfg.train_path = value;
  else if (key == "valid_path") cfg.valid_path = value;
  else if (key == "tokenizer") cfg.tokenizer = tokenizer_from(value);
  else if (key == "add_eos") cfg.add_eos = parse_bool(value, key);
  else if (key == "vocab_size") cfg.vocab_size = parse_size(value, key);
  else if (key == "embed_dim") cfg.embed_dim = parse_size(value, key);
  else if (key == "num_layers") cfg.num_layers = parse_size(value, key);
  else if (key == "hidden_size") cfg.hidden_size = parse_size(value, key);
  else if (key == "wide") cfg.wide = parse_size(value, key);
  else if (key == "cell") cfg.cell = cell_type_from(value);
  else if (key == "activation") cfg.activation = activation_from(value);
  else if (key == "naive_literal") cfg.naive_literal = parse_bool(value, key);
  else if (key == "routing") cfg.routing = routing_from(value);
  else if (key == "init_range") cfg.init_range = parse_double(value, key);
  else if (key == "base_lr") cfg.base_lr = parse_double(value, key);
  else if (key == "warm_epochs") cfg.warm_epochs = parse_size(value, key);
  else if (key == "decay_factor") cfg.decay_factor = parse_double(value, key);
  else if (key == "total_epochs") cfg.total_epochs = parse_size(value, key);
  else if (key == "clip_threshold") cfg.clip_threshold = parse_double(value, key);
  else if (key == "dropout_rate") cfg.dropout_rate = parse_double(value, key);
  else if (key == "dropout_target") cfg.dropout_target = dropout_target_from(value);
  else if (key == "batch") cfg.batch = parse_size(value, key);
  else if (key == "unroll") cfg.unroll = parse_size(value, key);
  else if (key == "seed") cfg.seed = parse_size(value, key);
  else if (key == "threads") cfg.threads = static_cast<int>(parse_size(value, key));
  else throw ConfigError("unknown config key '" + key + "'");
}

RunConfig parse_run_config_text(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + " is not key=value: '" + t +
                        "'");
    set_key(cfg, trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  return cfg;
}

std::string serialize(const RunConfig& cfg) {
  std::ostringstream out;
  out << "train_path=" << cfg.train_path << '\n';
  out << "valid_path=" << cfg.valid_path << '\n';
  out << "tokenizer=" << to_string(cfg.tokenizer) << '\n';
  out << "add_eos=" << (cfg.add_eos ? 1 : 0) << '\n';
  out << "vocab_size=" << cfg.vocab_size << '\n';
  out << "embed_dim=" << cfg.embed_dim << '\n';
  out << "num_layers=" << cfg.num_layers << '\n';
  out << "hidden_size=" << cfg.hidden_size << '\n';
  out << "wide=" << cfg.wide << '\n';
  out << "cell=" << to_string(cfg.cell) << '\n';
  out << "activation=" << to_string(cfg.activation) << '\n';
  out << "naive_literal=" << (cfg.naive_literal ? 1 : 0) << '\n';
  out << "routing=" << to_string(cfg.routing) << '\n';
  out << "init_range=" << fmt_double(cfg.init_range) << '\n';
  out << "base_lr=" << fmt_double(cfg.base_lr) << '\n';
  out << "warm_epochs=" << cfg.warm_epochs << '\n';
  out << "decay_factor=" << fmt_double(cfg.decay_factor) << '\n';
  out << "total_epochs=" << cfg.total_epochs << '\n';
  out << "clip_threshold=" << fmt_double(cfg.clip_threshold) << '\n';
  out << "dropout_rate=" << fmt_double(cfg.dropout_rate) << '\n';
  out << "dropout_target=" << to_string(cfg.dropout_target) << '\n';
  out << "batch=" << cfg.batch << '\n';
  out << "unroll=" << cfg.unroll << '\n';
  out << "seed=" << cfg.seed << '\n';
  out << "threads=" << cfg.threads << '\n';
  return out.str();
}

ModelConfig model_config(const RunConfig& cfg, std::size_t vocab_size) {
  ModelConfig mc;
  mc.vocab_size = vocab_size;
  mc.embed_dim = cfg.embed_dim;
  mc.num_layers = cfg.num_layers;
  mc.hidden = cfg.hidden_size;
  mc.wide = cfg.wide;
  mc.kind = CellKind{cfg.cell, cfg.activation, cfg.naive_literal};
  mc.routing = cfg.routing;
  mc.unroll = cfg.unroll;
  mc.batch = cfg.batch;
  return mc;
}

TrainConfig train_config(const RunConfig& cfg) {
  TrainConfig tc;
  tc.init_range = cfg.init_range;
  tc.base_lr = cfg.base_lr;
  tc.warm_epochs = cfg.warm_epochs;
  tc.decay_factor = cfg.decay_factor;
  tc.total_epochs = cfg.total_epochs;
  tc.clip_threshold = cfg.clip_threshold;
  tc.dropout_rate = cfg.dropout_rate;
  tc.dropout_target = cfg.dropout_target;
  tc.batch = cfg.batch;
  tc.unroll = cfg.unroll;
  tc.seed = cfg.seed;
  tc.threads = cfg.threads;
  return tc;
}

}  // namespace pcrnn
