#include "pcrnn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "pcrnn/enum_names.hpp"

namespace pcrnn {

namespace {

void put_u32(std::ostream& out, uint32_t v) {
  unsigned char buf[4];
  for (int i = 0; i < 4; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(buf), 4);
}

void put_u64(std::ostream& out, uint64_t v) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(buf), 8);
}

void put_f64(std::ostream& out, double v) { put_u64(out, std::bit_cast<uint64_t>(v)); }

class Reader {
public:
  explicit Reader(std::istream& in) : in_(in) {}

  void bytes(void* dst, std::size_t n) {
    in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n)
      throw CheckpointError(LoadErrorKind::Truncated, "checkpoint ends early (wanted " +
                                                          std::to_string(n) + " more bytes)");
  }

  uint32_t u32() {
    unsigned char buf[4];
    bytes(buf, 4);
    uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | buf[i];
    return v;
  }

  uint64_t u64() {
    unsigned char buf[8];
    bytes(buf, 8);
    uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | buf[i];
    return v;
  }

  double f64() { return std::bit_cast<double>(u64()); }

private:
  std::istream& in_;
};

void write_tensor(std::ostream& out, std::span<const double> values,
                  std::initializer_list<uint64_t> dims) {
  put_u32(out, static_cast<uint32_t>(dims.size()));
  for (uint64_t d : dims) put_u64(out, d);
  for (double v : values) put_f64(out, v);
}

void read_tensor(Reader& r, std::span<double> values, std::initializer_list<uint64_t> dims,
                 const std::string& name) {
  const uint32_t rank = r.u32();
  if (rank != dims.size())
    throw CheckpointError(LoadErrorKind::DimMismatch,
                          "tensor " + name + " has rank " + std::to_string(rank) + ", expected " +
                              std::to_string(dims.size()));
  std::size_t i = 0;
  for (uint64_t expected : dims) {
    const uint64_t got = r.u64();
    if (got != expected)
      throw CheckpointError(LoadErrorKind::DimMismatch,
                            "tensor " + name + " dim " + std::to_string(i) + " is " +
                                std::to_string(got) + ", expected " + std::to_string(expected));
    ++i;
  }
  for (double& v : values) v = r.f64();
}

std::string config_block(const ModelConfig& c, const std::map<std::string, std::string>& extras) {
  std::ostringstream out;
  out << "vocab_size=" << c.vocab_size << '\n';
  out << "embed_dim=" << c.embed_dim << '\n';
  out << "num_layers=" << c.num_layers << '\n';
  out << "hidden_size=" << c.hidden << '\n';
  out << "wide=" << c.wide << '\n';
  out << "cell=" << to_string(c.kind.type) << '\n';
  out << "activation=" << to_string(c.kind.activation) << '\n';
  out << "naive_literal=" << (c.kind.literal_input ? 1 : 0) << '\n';
  out << "routing=" << to_string(c.routing) << '\n';
  out << "unroll=" << c.unroll << '\n';
  out << "batch=" << c.batch << '\n';
  for (const auto& [k, v] : extras) out << k << '=' << v << '\n';
  return out.str();
}

std::size_t parse_size(const std::string& v, const std::string& key) {
  try {
    return static_cast<std::size_t>(std::stoull(v));
  } catch (const std::exception&) {
    throw ConfigError("bad value '" + v + "' for " + key);
  }
}

void parse_config_block(const std::string& block, ModelConfig& config,
                        std::map<std::string, std::string>& extras) {
  std::istringstream in(block);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw CheckpointError(LoadErrorKind::Truncated, "malformed config line '" + line + "'");
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    if (key == "vocab_size") config.vocab_size = parse_size(value, key);
    else if (key == "embed_dim") config.embed_dim = parse_size(value, key);
    else if (key == "num_layers") config.num_layers = parse_size(value, key);
    else if (key == "hidden_size") config.hidden = parse_size(value, key);
    else if (key == "wide") config.wide = parse_size(value, key);
    else if (key == "cell") config.kind.type = cell_type_from(value);
    else if (key == "activation") config.kind.activation = activation_from(value);
    else if (key == "naive_literal") config.kind.literal_input = value == "1";
    else if (key == "routing") config.routing = routing_from(value);
    else if (key == "unroll") config.unroll = parse_size(value, key);
    else if (key == "batch") config.batch = parse_size(value, key);
    else extras[key] = value;
  }
}

std::string tensor_name(std::size_t layer, std::size_t cell, const char* part) {
  return "layer" + std::to_string(layer) + ".cell" + std::to_string(cell) + "." + part;
}

}  // namespace

void save_checkpoint(const LMModel& model, const std::string& path, uint32_t epoch,
                     uint64_t rng_state, const ModelState* state,
                     const std::map<std::string, std::string>& extras) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path);

  out.write(kCheckpointMagic, 4);
  put_u32(out, kCheckpointVersion);
  const std::string block = config_block(model.config, extras);
  put_u32(out, static_cast<uint32_t>(block.size()));
  out.write(block.data(), static_cast<std::streamsize>(block.size()));
  put_u32(out, epoch);
  put_u64(out, rng_state);
  put_u32(out, state ? 1u : 0u);

  write_tensor(out, model.embedding.span(), {model.embedding.rows, model.embedding.cols});
  for (const auto& layer : model.layers)
    for (const auto& cell : layer.cells) {
      write_tensor(out, cell.w.span(), {cell.w.rows, cell.w.cols});
      write_tensor(out, cell.b.span(), {cell.b.len()});
    }
  write_tensor(out, model.out_w.span(), {model.out_w.rows, model.out_w.cols});
  write_tensor(out, model.out_b.span(), {model.out_b.len()});

  if (state) {
    put_u32(out, static_cast<uint32_t>(state->rows.size()));
    for (const auto& row : state->rows)
      for (const auto& layer : row.layers)
        for (const auto& cell : layer.cells) {
          write_tensor(out, cell.h.span(), {cell.h.len()});
          if (cell.c.len() > 0) write_tensor(out, cell.c.span(), {cell.c.len()});
        }
  }

  if (!out) throw DataError("failed writing " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  Reader r(in);

  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kCheckpointMagic, 4) != 0)
    throw CheckpointError(LoadErrorKind::MagicMismatch,
                          path + " is not a PCRN checkpoint (bad magic)");
  const uint32_t version = r.u32();
  if (version != kCheckpointVersion)
    throw CheckpointError(LoadErrorKind::VersionMismatch,
                          path + " has format version " + std::to_string(version) +
                              ", this build reads version " +
                              std::to_string(kCheckpointVersion));

  const uint32_t block_len = r.u32();
  std::string block(block_len, '\0');
  r.bytes(block.data(), block_len);

  Checkpoint ckpt;
  ModelConfig config;
  parse_config_block(block, config, ckpt.extras);
  ckpt.model = build_model(config);
  ckpt.epoch = r.u32();
  ckpt.rng_state = r.u64();
  const uint32_t flags = r.u32();

  LMModel& m = ckpt.model;
  read_tensor(r, m.embedding.span(), {m.embedding.rows, m.embedding.cols}, "embedding");
  for (std::size_t l = 0; l < m.layers.size(); ++l)
    for (std::size_t c = 0; c < m.layers[l].cells.size(); ++c) {
      auto& cell = m.layers[l].cells[c];
      read_tensor(r, cell.w.span(), {cell.w.rows, cell.w.cols}, tensor_name(l, c, "w"));
      read_tensor(r, cell.b.span(), {cell.b.len()}, tensor_name(l, c, "b"));
    }
  read_tensor(r, m.out_w.span(), {m.out_w.rows, m.out_w.cols}, "out_w");
  read_tensor(r, m.out_b.span(), {m.out_b.len()}, "out_b");

  if (flags & 1u) {
    const uint32_t batch = r.u32();
    ModelState state = zero_model_state(m, batch);
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t l = 0; l < m.layers.size(); ++l)
        for (std::size_t c = 0; c < m.layers[l].cells.size(); ++c) {
          auto& cell = state.rows[b].layers[l].cells[c];
          const std::string base =
              "state[" + std::to_string(b) + "]." + tensor_name(l, c, "h");
          read_tensor(r, cell.h.span(), {cell.h.len()}, base);
          if (cell.c.len() > 0)
            read_tensor(r, cell.c.span(), {cell.c.len()},
                        "state[" + std::to_string(b) + "]." + tensor_name(l, c, "c"));
        }
    ckpt.state = std::move(state);
  }
  return ckpt;
}

}  // namespace pcrnn
