#include <doctest.h>

#include "pcrnn/data.hpp"
#include "pcrnn/rng.hpp"

using namespace pcrnn;

TEST_CASE("build_vocab keeps the most frequent tokens") {
  const std::vector<std::string> corpus = {"a", "a", "b"};
  const Vocab v = build_vocab(corpus, 2, false);
  CHECK(v.tokens == std::vector<std::string>{"<unk>", "a"});
  CHECK(v.id_of("a") == 1);
  CHECK(v.id_of("b") == v.unk_id);  // squeezed out

  // big enough cap: nothing but unseen tokens map to <unk>
  const Vocab all = build_vocab(corpus, 10, false);
  CHECK(all.id_of("a") != all.unk_id);
  CHECK(all.id_of("b") != all.unk_id);
  CHECK(all.id_of("zzz") == all.unk_id);

  // deterministic: same corpus -> same vocab; frequency then lexicographic
  const Vocab again = build_vocab(corpus, 10, false);
  CHECK(v.tokens == build_vocab(corpus, 2, false).tokens);
  CHECK(all.tokens == again.tokens);
  const Vocab ties = build_vocab({"z", "c", "z", "c", "m"}, 10, false);
  CHECK(ties.tokens == std::vector<std::string>{"<unk>", "c", "z", "m"});

  CHECK_THROWS_AS(build_vocab({}, 5, false), DataError);
}

TEST_CASE("word tokenization and eos insertion") {
  const auto with_eos = tokenize_words("the cat\nsat  down\n", true);
  CHECK(with_eos == std::vector<std::string>{"the", "cat", "<eos>", "sat", "down", "<eos>"});
  const auto no_eos = tokenize_words("the cat\nsat down\n", false);
  CHECK(no_eos == std::vector<std::string>{"the", "cat", "sat", "down"});
}

TEST_CASE("encode maps through the vocabulary and round-trips") {
  const std::vector<std::string> corpus = {"a", "b", "a", "c", "a", "b"};
  const Vocab v = build_vocab(corpus, 10, false);
  const auto ids = encode(corpus, v);
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    CHECK(ids[i] != v.unk_id);
    CHECK(v.tokens[static_cast<std::size_t>(ids[i])] == corpus[i]);  // decode round-trip
  }
  CHECK(encode({"unseen"}, v)[0] == v.unk_id);
}

TEST_CASE("byte encoding covers the full range") {
  std::string text = "Az";
  text.push_back('\0');
  text.push_back(static_cast<char>(0xff));
  const auto ids = encode_bytes(text);
  CHECK(ids == std::vector<int32_t>{65, 122, 0, 255});
}

TEST_CASE("vocab file round-trip") {
  const Vocab v = build_vocab({"b", "a", "b"}, 10, true);
  const std::string path = "vocab_roundtrip_test.txt";
  save_vocab(v, path);
  const Vocab loaded = load_vocab(path);
  CHECK(loaded.tokens == v.tokens);
  CHECK(loaded.unk_id == v.unk_id);
  CHECK(loaded.eos_id == v.eos_id);
  std::remove(path.c_str());
}

TEST_CASE("batch stream lays out contiguous rows") {
  std::vector<int32_t> ids(10);
  for (int i = 0; i < 10; ++i) ids[i] = i;
  const BatchStream stream(ids, 2, 2);
  CHECK(stream.row_len() == 5);
  CHECK(stream.windows() == 2);

  const Window w0 = stream.window(0);
  CHECK(w0.inputs == std::vector<int32_t>{0, 1, 5, 6});
  CHECK(w0.targets == std::vector<int32_t>{1, 2, 6, 7});
  const Window w1 = stream.window(1);
  CHECK(w1.inputs == std::vector<int32_t>{2, 3, 7, 8});
  CHECK(w1.targets == std::vector<int32_t>{3, 4, 8, 9});
  CHECK_THROWS_AS(stream.window(2), UsageError);
}

TEST_CASE("single-stream whole-corpus window") {
  std::vector<int32_t> ids = {4, 2, 7, 1, 9};
  const BatchStream stream(ids, 1, 4);
  CHECK(stream.windows() == 1);
  const Window w = stream.window(0);
  CHECK(w.inputs == std::vector<int32_t>{4, 2, 7, 1});
  CHECK(w.targets == std::vector<int32_t>{2, 7, 1, 9});
}

TEST_CASE("too-short corpus is a data error naming the requirement") {
  std::vector<int32_t> ids(9);
  CHECK_THROWS_WITH_AS(BatchStream(ids, 2, 4), doctest::Contains("10"), DataError);
}

TEST_CASE("windows partition each row and targets follow inputs") {
  Rng rng(303);
  std::vector<int32_t> ids(137);
  for (auto& v : ids) v = static_cast<int32_t>(rng.next_u64() % 50);
  const std::size_t B = 4, T = 5;
  const BatchStream stream(ids, B, T);

  for (std::size_t b = 0; b < B; ++b) {
    std::vector<int32_t> joined;
    for (std::size_t k = 0; k < stream.windows(); ++k) {
      const Window w = stream.window(k);
      for (std::size_t t = 0; t < T; ++t) {
        joined.push_back(w.inputs[b * T + t]);
        // every target is the successor of its input in the original corpus
        CHECK(w.targets[b * T + t] == ids[b * stream.row_len() + k * T + t + 1]);
      }
    }
    const std::vector<int32_t> row_prefix(
        ids.begin() + static_cast<std::ptrdiff_t>(b * stream.row_len()),
        ids.begin() + static_cast<std::ptrdiff_t>(b * stream.row_len() + stream.windows() * T));
    CHECK(joined == row_prefix);
  }
}
