#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "pcrnn/analysis.hpp"
#include "pcrnn/checkpoint.hpp"
#include "pcrnn/config.hpp"
#include "pcrnn/enum_names.hpp"
#include "pcrnn/training.hpp"

namespace fs = std::filesystem;
using namespace pcrnn;

namespace {

std::string fmt(double v, const char* spec = "%.10g") {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

// "cell=I" or "layer=L,cell=I" (pair order free); no layer = every layer
struct MaskFlag {
  std::optional<std::size_t> layer;
  std::size_t cell = 0;
};

MaskFlag parse_mask_flag(const std::string& text) {
  MaskFlag flag;
  bool have_cell = false;
  std::istringstream in(text);
  std::string part;
  while (std::getline(in, part, ',')) {
    const auto eq = part.find('=');
    if (eq == std::string::npos)
      throw ConfigError("bad --mask component '" + part + "' (expected key=value)");
    const std::string key = part.substr(0, eq);
    const std::string value = part.substr(eq + 1);
    std::size_t n = 0;
    try {
      n = std::stoull(value);
    } catch (const std::exception&) {
      throw ConfigError("bad --mask value '" + value + "'");
    }
    if (key == "cell") {
      flag.cell = n;
      have_cell = true;
    } else if (key == "layer") {
      flag.layer = n;
    } else {
      throw ConfigError("bad --mask key '" + key + "' (expected cell or layer)");
    }
  }
  if (!have_cell) throw ConfigError("--mask needs a cell index, e.g. --mask cell=1");
  return flag;
}

std::vector<MaskSet> build_masks(const LMModel& model, const std::vector<std::string>& flags) {
  if (flags.empty()) return {};
  std::vector<std::vector<std::size_t>> per_layer(model.layers.size());
  for (const auto& text : flags) {
    const MaskFlag flag = parse_mask_flag(text);
    if (flag.layer && *flag.layer >= model.layers.size())
      throw ConfigError("--mask layer " + std::to_string(*flag.layer) + " out of range [0, " +
                        std::to_string(model.layers.size()) + ")");
    if (flag.cell >= model.config.wide)
      throw ConfigError("--mask cell " + std::to_string(flag.cell) + " out of range [0, " +
                        std::to_string(model.config.wide) + ")");
    for (std::size_t l = 0; l < model.layers.size(); ++l)
      if (!flag.layer || *flag.layer == l) per_layer[l].push_back(flag.cell);
  }
  std::vector<MaskSet> masks;
  masks.reserve(per_layer.size());
  for (auto& cells : per_layer) masks.emplace_back(std::move(cells));
  return masks;
}

struct CorpusCodec {
  TokenizerKind tokenizer = TokenizerKind::Word;
  bool add_eos = true;
  const Vocab* vocab = nullptr;  // word mode only
};

std::vector<int32_t> encode_corpus(const std::string& path, const CorpusCodec& codec) {
  const std::string text = read_text_file(path);
  if (codec.tokenizer == TokenizerKind::Byte) return encode_bytes(text);
  return encode(tokenize_words(text, codec.add_eos), *codec.vocab);
}

CorpusCodec codec_from_checkpoint(const Checkpoint& ckpt, const Vocab* vocab,
                                  const std::string& vocab_flag) {
  CorpusCodec codec;
  auto tok = ckpt.extras.find("tokenizer");
  codec.tokenizer = tok == ckpt.extras.end() ? TokenizerKind::Word : tokenizer_from(tok->second);
  auto eos = ckpt.extras.find("add_eos");
  codec.add_eos = eos == ckpt.extras.end() ? true : eos->second == "1";
  if (codec.tokenizer == TokenizerKind::Word) {
    if (vocab_flag.empty())
      throw ConfigError("this checkpoint uses word tokenization; pass --vocab <file>");
    if (vocab->size() != ckpt.model.config.vocab_size)
      throw ConfigError("vocabulary has " + std::to_string(vocab->size()) +
                        " entries but the checkpoint expects " +
                        std::to_string(ckpt.model.config.vocab_size));
    codec.vocab = vocab;
  }
  return codec;
}

std::vector<EvalGroup> load_groups(const std::string& path, const CorpusCodec& codec) {
  std::vector<EvalGroup> groups;
  std::istringstream in(read_text_file(path));
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    const auto colon = line.find(':');
    if (colon == std::string::npos)
      throw DataError("groups line " + std::to_string(lineno) + " is not 'name: tokens...'");
    EvalGroup group;
    group.name = line.substr(0, colon);
    std::istringstream words(line.substr(colon + 1));
    std::string word;
    while (words >> word) {
      if (codec.tokenizer == TokenizerKind::Byte) {
        if (word.size() != 1) {
          std::cerr << "warning: group '" << group.name << "': token '" << word
                    << "' is not a single byte, skipped\n";
          continue;
        }
        group.tokens.insert(static_cast<int32_t>(static_cast<unsigned char>(word[0])));
      } else {
        auto it = codec.vocab->index.find(word);
        if (it == codec.vocab->index.end()) {
          std::cerr << "warning: group '" << group.name << "': token '" << word
                    << "' not in vocabulary, skipped\n";
          continue;
        }
        group.tokens.insert(it->second);
      }
    }
    groups.push_back(std::move(group));
  }
  return groups;
}

int cmd_train(const std::string& config_path, const std::string& out_dir,
              const std::vector<std::string>& sets, int threads_flag) {
  RunConfig cfg = parse_run_config_text(read_text_file(config_path));
  for (const auto& kv : sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw ConfigError("--set expects key=value, got '" + kv + "'");
    set_key(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (threads_flag > 0) cfg.threads = threads_flag;
  if (cfg.train_path.empty()) throw ConfigError("config key train_path is required");

  const std::string text = read_text_file(cfg.train_path);
  std::vector<int32_t> ids;
  Vocab vocab;
  std::size_t vocab_size = 0;
  if (cfg.tokenizer == TokenizerKind::Word) {
    const auto tokens = tokenize_words(text, cfg.add_eos);
    vocab = build_vocab(tokens, cfg.vocab_size, cfg.add_eos);
    ids = encode(tokens, vocab);
    vocab_size = vocab.size();
  } else {
    ids = encode_bytes(text);
    vocab_size = kByteVocabSize;
  }

  std::vector<int32_t> valid_ids;
  if (!cfg.valid_path.empty()) {
    CorpusCodec codec{cfg.tokenizer, cfg.add_eos,
                      cfg.tokenizer == TokenizerKind::Word ? &vocab : nullptr};
    valid_ids = encode_corpus(cfg.valid_path, codec);
  } else {
    // hold out the final 5% of the training stream
    const std::size_t val_len = ids.size() / 20;
    if (val_len >= 2) {
      valid_ids.assign(ids.end() - static_cast<std::ptrdiff_t>(val_len), ids.end());
      ids.resize(ids.size() - val_len);
    }
  }

  const TrainConfig tc = train_config(cfg);
  validate(tc);
  LMModel model = build_model(model_config(cfg, vocab_size));
  Rng rng(tc.seed);
  init_params(model, tc.init_range, rng);

  fs::create_directories(out_dir);
  {
    std::ofstream resolved(fs::path(out_dir) / "resolved-config.txt", std::ios::binary);
    resolved << serialize(cfg);
    if (!resolved) throw DataError("cannot write resolved-config.txt in " + out_dir);
  }
  if (cfg.tokenizer == TokenizerKind::Word)
    save_vocab(vocab, (fs::path(out_dir) / "vocab.txt").string());

  std::ofstream metrics(fs::path(out_dir) / "metrics.csv", std::ios::binary);
  if (!metrics) throw DataError("cannot write metrics.csv in " + out_dir);
  metrics << "epoch,lr,train_ppl,valid_ppl\n";

  const std::map<std::string, std::string> extras = {
      {"tokenizer", to_string(cfg.tokenizer)}, {"add_eos", cfg.add_eos ? "1" : "0"}};
  const std::string best_path = (fs::path(out_dir) / "best.pcrn").string();
  const std::string final_path = (fs::path(out_dir) / "final.pcrn").string();
  bool wrote_best = false;

  BatchStream stream(ids, tc.batch, tc.unroll);
  TrainResult result =
      train(model, stream, valid_ids, tc, rng,
            [&](const EpochMetrics& m, const LMModel& snapshot, bool best) {
              metrics << m.epoch << ',' << fmt(m.lr, "%.12g") << ',' << fmt(m.train_ppl, "%.12g")
                      << ',' << fmt(m.valid_ppl, "%.12g") << '\n';
              metrics.flush();
              std::cout << "epoch " << m.epoch << " lr " << fmt(m.lr) << " train_ppl "
                        << fmt(m.train_ppl) << " valid_ppl " << fmt(m.valid_ppl) << std::endl;
              if (best) {
                save_checkpoint(snapshot, best_path, static_cast<uint32_t>(m.epoch), rng.state(),
                                nullptr, extras);
                wrote_best = true;
              }
            });

  save_checkpoint(model, final_path, static_cast<uint32_t>(tc.total_epochs), rng.state(), nullptr,
                  extras);
  if (!wrote_best) fs::copy_file(final_path, best_path, fs::copy_options::overwrite_existing);
  std::cout << "best epoch " << result.best_epoch << " valid_ppl " << fmt(result.best_valid_ppl)
            << std::endl;
  return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& corpus_path,
             const std::string& vocab_path, const std::vector<std::string>& mask_flags,
             std::size_t unroll, int threads) {
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  Vocab vocab;
  if (!vocab_path.empty()) vocab = load_vocab(vocab_path);
  const CorpusCodec codec = codec_from_checkpoint(ckpt, &vocab, vocab_path);
  const std::vector<int32_t> ids = encode_corpus(corpus_path, codec);
  const std::vector<MaskSet> masks = build_masks(ckpt.model, mask_flags);
  const std::size_t steps = unroll > 0 ? unroll : ckpt.model.config.unroll;
  const EvalResult eval = evaluate_nll(ckpt.model, ids, steps, masks, {}, threads);
  std::cout << "perplexity " << fmt(perplexity(eval.mean_nll)) << std::endl;
  return 0;
}

int cmd_mask(const std::string& ckpt_path, const std::string& corpus_path,
             const std::string& vocab_path, const std::string& groups_path,
             const std::string& out_dir, long layer, std::size_t unroll, int threads) {
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  Vocab vocab;
  if (!vocab_path.empty()) vocab = load_vocab(vocab_path);
  const CorpusCodec codec = codec_from_checkpoint(ckpt, &vocab, vocab_path);
  const std::vector<int32_t> ids = encode_corpus(corpus_path, codec);
  const std::vector<EvalGroup> groups =
      groups_path.empty() ? std::vector<EvalGroup>{} : load_groups(groups_path, codec);
  const std::optional<std::size_t> layer_opt =
      layer < 0 ? std::nullopt : std::optional<std::size_t>(static_cast<std::size_t>(layer));
  const std::size_t steps = unroll > 0 ? unroll : ckpt.model.config.unroll;

  const MaskReport report = mask_sweep(ckpt.model, ids, steps, layer_opt, groups, threads);

  fs::create_directories(out_dir);
  std::ofstream csv(fs::path(out_dir) / "mask_report.csv", std::ios::binary);
  if (!csv) throw DataError("cannot write mask_report.csv in " + out_dir);
  std::ostringstream table;
  table << "mask";
  for (const auto& col : report.col_labels) table << ',' << col;
  table << '\n';
  for (std::size_t r = 0; r < report.row_labels.size(); ++r) {
    table << report.row_labels[r];
    for (std::size_t c = 0; c < report.col_labels.size(); ++c)
      table << ',' << fmt(report.values.at(r, c), "%.12g");
    table << '\n';
  }
  csv << table.str();
  std::cout << table.str();
  return 0;
}

int cmd_ensemble(const std::string& spec_path, const std::string& corpus_path,
                 const std::string& vocab_path, std::size_t unroll, int threads) {
  std::istringstream in(read_text_file(spec_path));
  std::vector<std::string> paths;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    // strip trailing CR from CRLF files
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos)
      throw UsageError("ensemble spec line " + std::to_string(lineno) + " is empty");
    paths.push_back(line);
  }
  if (paths.empty()) throw UsageError("ensemble spec lists no checkpoints");

  std::vector<Checkpoint> checkpoints;
  checkpoints.reserve(paths.size());
  for (const auto& p : paths) checkpoints.push_back(load_checkpoint(p));

  Vocab vocab;
  if (!vocab_path.empty()) vocab = load_vocab(vocab_path);
  const CorpusCodec codec = codec_from_checkpoint(checkpoints[0], &vocab, vocab_path);
  const std::vector<int32_t> ids = encode_corpus(corpus_path, codec);

  std::vector<const LMModel*> members;
  members.reserve(checkpoints.size());
  for (const auto& c : checkpoints) members.push_back(&c.model);
  const std::size_t steps = unroll > 0 ? unroll : checkpoints[0].model.config.unroll;
  std::cout << "ensemble perplexity " << fmt(ensemble_eval(members, ids, steps, threads))
            << std::endl;
  return 0;
}

int cmd_params(std::size_t hidden, const std::string& wide_list, const std::string& cell,
               bool literal, const std::string& routing) {
  const CellKind kind = cell_type_from(cell) == CellType::Lstm
                            ? CellKind::lstm()
                            : CellKind::naive(Activation::Tanh, literal);
  const Routing route = routing_from(routing);

  std::vector<std::tuple<std::size_t, std::size_t, CellKind, Routing>> configs;
  std::istringstream in(wide_list);
  std::string item;
  while (std::getline(in, item, ',')) {
    std::size_t n = 0;
    try {
      n = std::stoull(item);
    } catch (const std::exception&) {
      throw ConfigError("bad wide value '" + item + "'");
    }
    configs.emplace_back(hidden, n, kind, route);
  }
  if (configs.empty()) throw ConfigError("--wide lists no values");

  const auto rows = param_report(configs);
  std::cout << "hidden,wide,cell,routing,exact,closed_form,diff,millions\n";
  for (const auto& row : rows) {
    const unsigned long long shown = row.exact ? *row.exact : *row.closed_form;
    std::cout << row.hidden << ',' << row.wide << ','
              << to_string(row.kind.type) << (row.kind.literal_input ? "-literal" : "") << ','
              << to_string(row.routing) << ',';
    if (row.exact) std::cout << *row.exact;
    else std::cout << "n/a";
    std::cout << ',';
    if (row.closed_form) std::cout << *row.closed_form;
    else std::cout << "n/a";
    std::cout << ',';
    if (row.exact && row.closed_form)
      std::cout << (*row.exact > *row.closed_form ? *row.exact - *row.closed_form
                                                  : *row.closed_form - *row.exact);
    else std::cout << "n/a";
    std::cout << ',' << fmt(static_cast<double>(shown) / 1e6, "%.1f") << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Parallel-cells recurrent language model toolkit"};
  app.require_subcommand(1);

  // train
  auto* train_cmd = app.add_subcommand("train", "Train a model from a config file");
  std::string config_path, out_dir;
  std::vector<std::string> sets;
  int train_threads = 0;
  train_cmd->add_option("--config", config_path, "key=value config file")->required();
  train_cmd->add_option("--out", out_dir, "output directory")->required();
  train_cmd->add_option("--set", sets, "override a config key (key=value), repeatable");
  train_cmd->add_option("--threads", train_threads, "worker threads (overrides config)");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Report perplexity of a checkpoint on a corpus");
  std::string ckpt_path, corpus_path, vocab_path;
  std::vector<std::string> mask_flags;
  std::size_t unroll = 0;
  int threads = 1;
  eval_cmd->add_option("--checkpoint", ckpt_path, "model checkpoint")->required();
  eval_cmd->add_option("--corpus", corpus_path, "text to score")->required();
  eval_cmd->add_option("--vocab", vocab_path, "vocabulary file (word tokenizer)");
  eval_cmd->add_option("--mask", mask_flags, "mask cells, e.g. cell=1 or layer=0,cell=1");
  eval_cmd->add_option("--unroll", unroll, "evaluation window (default: checkpoint unroll)");
  eval_cmd->add_option("--threads", threads, "worker threads");

  // mask
  auto* mask_cmd = app.add_subcommand("mask", "Per-cell masking sweep, writes mask_report.csv");
  std::string mask_ckpt, mask_corpus, mask_vocab, groups_path, mask_out;
  long mask_layer = -1;
  std::size_t mask_unroll = 0;
  int mask_threads = 1;
  mask_cmd->add_option("--checkpoint", mask_ckpt, "model checkpoint")->required();
  mask_cmd->add_option("--corpus", mask_corpus, "text to score")->required();
  mask_cmd->add_option("--vocab", mask_vocab, "vocabulary file (word tokenizer)");
  mask_cmd->add_option("--groups", groups_path, "token groups file: 'name: tok tok ...'");
  mask_cmd->add_option("--out", mask_out, "output directory")->required();
  mask_cmd->add_option("--layer", mask_layer, "mask only this layer (default: all layers)");
  mask_cmd->add_option("--unroll", mask_unroll, "evaluation window (default: checkpoint unroll)");
  mask_cmd->add_option("--threads", mask_threads, "worker threads");

  // ensemble
  auto* ens_cmd = app.add_subcommand("ensemble", "Probability-averaged ensemble perplexity");
  std::string spec_path, ens_corpus, ens_vocab;
  std::size_t ens_unroll = 0;
  int ens_threads = 1;
  ens_cmd->add_option("--spec", spec_path, "file listing one checkpoint per line")->required();
  ens_cmd->add_option("--corpus", ens_corpus, "text to score")->required();
  ens_cmd->add_option("--vocab", ens_vocab, "vocabulary file (word tokenizer)");
  ens_cmd->add_option("--unroll", ens_unroll, "evaluation window (default: first checkpoint)");
  ens_cmd->add_option("--threads", ens_threads, "worker threads");

  // params
  auto* params_cmd = app.add_subcommand("params", "Parameter-count table for layer shapes");
  std::size_t p_hidden = 0;
  std::string wide_list = "1", p_cell = "lstm", p_routing = "split";
  bool p_literal = false;
  params_cmd->add_option("--hidden", p_hidden, "total hidden units per layer (m)")->required();
  params_cmd->add_option("--wide", wide_list, "comma-separated cell counts, e.g. 1,2,3");
  params_cmd->add_option("--cell", p_cell, "lstm or rnn");
  params_cmd->add_flag("--literal", p_literal, "naive rnn adds x raw (needs matching dims)");
  params_cmd->add_option("--routing", p_routing, "split or full");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*train_cmd) return cmd_train(config_path, out_dir, sets, train_threads);
    if (*eval_cmd) return cmd_eval(ckpt_path, corpus_path, vocab_path, mask_flags, unroll, threads);
    if (*mask_cmd)
      return cmd_mask(mask_ckpt, mask_corpus, mask_vocab, groups_path, mask_out, mask_layer,
                      mask_unroll, mask_threads);
    if (*ens_cmd) return cmd_ensemble(spec_path, ens_corpus, ens_vocab, ens_unroll, ens_threads);
    if (*params_cmd) return cmd_params(p_hidden, wide_list, p_cell, p_literal, p_routing);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const CheckpointError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
