#include "pcrnn/data.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace pcrnn {

namespace {
constexpr const char* kUnkToken = "<unk>";
constexpr const char* kEosToken = "<eos>";
}  // namespace

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::vector<std::string> tokenize_words(const std::string& text, bool add_eos) {
  std::vector<std::string> tokens;
  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    std::istringstream words(line);
    std::string word;
    bool any = false;
    while (words >> word) {
      tokens.push_back(word);
      any = true;
    }
    if (add_eos && any) tokens.push_back(kEosToken);
  }
  return tokens;
}

Vocab build_vocab(const std::vector<std::string>& tokens, std::size_t max_size, bool with_eos) {
  if (tokens.empty()) throw DataError("cannot build a vocabulary from an empty corpus");
  if (max_size < 1) throw ConfigError("vocabulary size must be >= 1");

  std::unordered_map<std::string, std::size_t> freq;
  for (const auto& t : tokens) freq[t] += 1;
  // reserved markers get fixed slots; corpus occurrences of the literal
  // marker strings map onto them instead of competing for vocabulary room
  freq.erase(kUnkToken);
  if (with_eos) freq.erase(kEosToken);

  std::vector<std::pair<std::string, std::size_t>> ranked(freq.begin(), freq.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  Vocab vocab;
  vocab.tokens.push_back(kUnkToken);
  vocab.unk_id = 0;
  if (with_eos) {
    vocab.tokens.push_back(kEosToken);
    vocab.eos_id = 1;
  }
  const std::size_t reserved = vocab.tokens.size();
  const std::size_t keep = max_size > reserved ? max_size - reserved : 0;
  for (std::size_t i = 0; i < std::min(keep, ranked.size()); ++i)
    vocab.tokens.push_back(ranked[i].first);

  for (std::size_t i = 0; i < vocab.tokens.size(); ++i)
    vocab.index[vocab.tokens[i]] = static_cast<int32_t>(i);
  return vocab;
}

std::vector<int32_t> encode(const std::vector<std::string>& tokens, const Vocab& vocab) {
  std::vector<int32_t> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(vocab.id_of(t));
  return ids;
}

std::vector<int32_t> encode_bytes(const std::string& text) {
  std::vector<int32_t> ids;
  ids.reserve(text.size());
  for (unsigned char c : text) ids.push_back(static_cast<int32_t>(c));
  return ids;
}

void save_vocab(const Vocab& vocab, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  for (const auto& t : vocab.tokens) out << t << '\n';
  if (!out) throw DataError("failed writing " + path);
}

Vocab load_vocab(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  Vocab vocab;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    vocab.tokens.push_back(line);
  }
  for (std::size_t i = 0; i < vocab.tokens.size(); ++i) {
    vocab.index[vocab.tokens[i]] = static_cast<int32_t>(i);
    if (vocab.tokens[i] == kUnkToken) vocab.unk_id = static_cast<int32_t>(i);
    if (vocab.tokens[i] == kEosToken) vocab.eos_id = static_cast<int32_t>(i);
  }
  if (vocab.unk_id < 0) throw DataError(path + " has no " + std::string(kUnkToken) + " entry");
  return vocab;
}

BatchStream::BatchStream(std::vector<int32_t> ids, std::size_t batch, std::size_t steps)
    : batch_(batch), steps_(steps) {
  if (batch == 0 || steps == 0) throw ConfigError("batch and unroll must be positive");
  if (ids.size() < batch * (steps + 1))
    throw DataError("corpus has " + std::to_string(ids.size()) + " tokens but batching needs " +
                    "at least " + std::to_string(batch * (steps + 1)) + " (batch " +
                    std::to_string(batch) + " x (unroll " + std::to_string(steps) + " + 1))");
  row_len_ = ids.size() / batch;
  rows_.resize(batch * row_len_);
  // stream b owns the contiguous span [b*row_len, (b+1)*row_len); the tail
  // beyond batch*row_len is dropped
  std::copy_n(ids.begin(), rows_.size(), rows_.begin());
}

Window BatchStream::window(std::size_t k) const {
  if (k >= windows()) throw UsageError("window " + std::to_string(k) + " out of range");
  Window w;
  w.batch = batch_;
  w.steps = steps_;
  w.inputs.resize(batch_ * steps_);
  w.targets.resize(batch_ * steps_);
  for (std::size_t b = 0; b < batch_; ++b) {
    const int32_t* row = rows_.data() + b * row_len_ + k * steps_;
    std::copy_n(row, steps_, w.inputs.begin() + static_cast<std::ptrdiff_t>(b * steps_));
    std::copy_n(row + 1, steps_, w.targets.begin() + static_cast<std::ptrdiff_t>(b * steps_));
  }
  return w;
}

}  // namespace pcrnn
