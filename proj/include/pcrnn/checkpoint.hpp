#pragma once

#include <map>
#include <optional>
#include <string>

#include "pcrnn/model.hpp"

namespace pcrnn {

// Binary model file. Layout (all integers little-endian):
//   magic "PCRN" | version u32 | config block (u32 byte length + UTF-8
//   key=value lines) | epoch u32 | rng state u64 | flags u32 (bit0: carried
//   state present) | parameter tensors in declaration order | optional state.
// Each tensor is rank u32, dims u64..., then row-major doubles.
inline constexpr char kCheckpointMagic[4] = {'P', 'C', 'R', 'N'};
inline constexpr uint32_t kCheckpointVersion = 1;

enum class LoadErrorKind { MagicMismatch, VersionMismatch, Truncated, DimMismatch };

class CheckpointError : public std::runtime_error {
public:
  CheckpointError(LoadErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  LoadErrorKind kind() const { return kind_; }

private:
  LoadErrorKind kind_;
};

struct Checkpoint {
  LMModel model;
  uint32_t epoch = 0;
  uint64_t rng_state = 0;
  std::optional<ModelState> state;
  // config-block keys beyond the model config (tokenizer, add_eos, ...)
  std::map<std::string, std::string> extras;
};

void save_checkpoint(const LMModel& model, const std::string& path, uint32_t epoch,
                     uint64_t rng_state, const ModelState* state = nullptr,
                     const std::map<std::string, std::string>& extras = {});

Checkpoint load_checkpoint(const std::string& path);

}  // namespace pcrnn
