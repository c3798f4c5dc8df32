#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "pcrnn/errors.hpp"

namespace pcrnn {

enum class TokenizerKind { Word, Byte };

std::string read_text_file(const std::string& path);

// Whitespace tokenization, one line at a time; optionally appends an <eos>
// marker per line.
std::vector<std::string> tokenize_words(const std::string& text, bool add_eos);

struct Vocab {
  std::vector<std::string> tokens;  // id order
  std::unordered_map<std::string, int32_t> index;
  int32_t unk_id = -1;
  int32_t eos_id = -1;  // -1 when eos is not used

  std::size_t size() const { return tokens.size(); }
  int32_t id_of(const std::string& token) const {
    auto it = index.find(token);
    return it == index.end() ? unk_id : it->second;
  }
};

// Keeps the most frequent tokens up to max_size total entries (reserved
// markers included); everything else maps to <unk>. Ties break
// lexicographically so the result is a pure function of the corpus.
Vocab build_vocab(const std::vector<std::string>& tokens, std::size_t max_size, bool with_eos);

std::vector<int32_t> encode(const std::vector<std::string>& tokens, const Vocab& vocab);

// Byte-level ids: every byte value is its own token, vocab size 256.
std::vector<int32_t> encode_bytes(const std::string& text);
constexpr std::size_t kByteVocabSize = 256;

void save_vocab(const Vocab& vocab, const std::string& path);
Vocab load_vocab(const std::string& path);

struct Window {
  std::size_t batch = 0;
  std::size_t steps = 0;
  std::vector<int32_t> inputs;   // row-major [batch x steps]
  std::vector<int32_t> targets;  // same shape, shifted by one
};

// The corpus cut into `batch` contiguous streams; window k of stream b covers
// positions [k*steps, (k+1)*steps) of that stream, so consecutive windows are
// adjacent and carried state is meaningful.
class BatchStream {
public:
  BatchStream(std::vector<int32_t> ids, std::size_t batch, std::size_t steps);

  std::size_t batch() const { return batch_; }
  std::size_t steps() const { return steps_; }
  std::size_t row_len() const { return row_len_; }
  std::size_t windows() const { return (row_len_ - 1) / steps_; }
  Window window(std::size_t k) const;

private:
  std::vector<int32_t> rows_;  // batch x row_len, row-major
  std::size_t batch_ = 0;
  std::size_t steps_ = 0;
  std::size_t row_len_ = 0;
};

}  // namespace pcrnn
