#pragma once

#include <string>

#include "pcrnn/data.hpp"
#include "pcrnn/model.hpp"
#include "pcrnn/training.hpp"

namespace pcrnn {

// Flat key=value experiment configuration. Files use one pair per line;
// blank lines and lines starting with '#' are ignored. Unknown keys are
// rejected so typos fail loudly.
struct RunConfig {
  // data
  std::string train_path;
  std::string valid_path;  // empty: hold out the final 5% of the training stream
  TokenizerKind tokenizer = TokenizerKind::Word;
  bool add_eos = true;          // word mode: append <eos> per line
  std::size_t vocab_size = 10000;  // word mode cap, markers included

  // model
  std::size_t embed_dim = 0;  // 0: same as hidden_size
  std::size_t num_layers = 2;
  std::size_t hidden_size = 256;
  std::size_t wide = 1;
  CellType cell = CellType::Lstm;
  Activation activation = Activation::Tanh;
  bool naive_literal = false;
  Routing routing = Routing::Split;

  // training
  double init_range = 0.04;
  double base_lr = 1.0;
  std::size_t warm_epochs = 14;
  double decay_factor = 1.0 / 1.15;
  std::size_t total_epochs = 55;
  double clip_threshold = 5.0;
  double dropout_rate = 0.65;
  DropoutTarget dropout_target = DropoutTarget::Recurrent;
  std::size_t batch = 20;
  std::size_t unroll = 35;
  uint64_t seed = 1;
  int threads = 1;
};

// Applies one key=value pair; throws ConfigError naming an unknown key or a
// bad value.
void set_key(RunConfig& cfg, const std::string& key, const std::string& value);

RunConfig parse_run_config_text(const std::string& text);

// Every key in a fixed order with fully resolved values; reparses to the
// same configuration.
std::string serialize(const RunConfig& cfg);

ModelConfig model_config(const RunConfig& cfg, std::size_t vocab_size);
TrainConfig train_config(const RunConfig& cfg);

}  // namespace pcrnn
