#include <doctest.h>

#include <cmath>

#include "pcrnn/training.hpp"
#include "test_support.hpp"

using namespace pcrnn;
using namespace test_support;

namespace {

std::vector<int32_t> patterned_ids(std::size_t n, std::size_t vocab, Rng& rng) {
  // mostly periodic with occasional noise, so there is something to learn
  std::vector<int32_t> ids(n);
  for (std::size_t i = 0; i < n; ++i)
    ids[i] = static_cast<int32_t>(rng.next_unit() < 0.9 ? i % vocab : rng.next_u64() % vocab);
  return ids;
}

TrainConfig tiny_train_config() {
  TrainConfig cfg;
  cfg.batch = 2;
  cfg.unroll = 4;
  cfg.total_epochs = 3;
  cfg.warm_epochs = 2;
  cfg.dropout_rate = 0.0;
  cfg.clip_threshold = 5.0;
  cfg.base_lr = 0.5;
  return cfg;
}

LMModel tiny_model(std::size_t vocab, std::size_t hidden, std::size_t wide, uint64_t seed) {
  ModelConfig c;
  c.vocab_size = vocab;
  c.hidden = hidden;
  c.wide = wide;
  c.num_layers = 2;
  c.unroll = 4;
  c.batch = 2;
  LMModel model = build_model(c);
  Rng rng(seed);
  init_params(model, 0.1, rng);
  return model;
}

}  // namespace

TEST_CASE("lr schedule follows the two-phase protocol") {
  TrainConfig cfg;  // defaults: base 1.0, 14 warm epochs, decay 1/1.15, 55 total
  CHECK(lr_at(1, cfg) == 1.0);
  CHECK(lr_at(14, cfg) == 1.0);
  CHECK(lr_at(15, cfg) == doctest::Approx(0.86956521739130443).epsilon(1e-15));
  // 1.15^-41, from tests/oracle/scalar_oracle.py
  CHECK(lr_at(55, cfg) == doctest::Approx(0.0032462992057507886).epsilon(1e-12));

  double prev = lr_at(1, cfg);
  for (std::size_t e = 2; e <= 60; ++e) {
    const double cur = lr_at(e, cfg);
    CHECK(cur <= prev);
    prev = cur;
  }
}

TEST_CASE("clip_gradients rescales only above the threshold") {
  LMModel model = tiny_model(4, 2, 1, 5);

  Gradients small = zero_gradients(model);
  small.d_out_b[0] = 3.0;
  const Gradients before = small;
  CHECK(clip_gradients(small, 5.0) == 3.0);
  CHECK(small.d_out_b.data == before.d_out_b.data);  // untouched

  Gradients big = zero_gradients(model);
  big.d_out_b[0] = 6.0;
  big.d_out_b[1] = 8.0;
  CHECK(clip_gradients(big, 5.0) == 10.0);
  CHECK(big.d_out_b[0] == 3.0);
  CHECK(big.d_out_b[1] == 4.0);

  Gradients zeros = zero_gradients(model);
  CHECK(clip_gradients(zeros, 5.0) == 0.0);
  for (auto span : zeros.tensor_spans())
    for (double v : span) CHECK(v == 0.0);

  // post-clip norm = min(pre-norm, threshold)
  Rng rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    Gradients g = zero_gradients(model);
    for (auto span : g.tensor_spans())
      for (double& v : span) v = rng.uniform(-1, 1);
    std::vector<std::span<const double>> views;
    for (auto s : g.tensor_spans()) views.emplace_back(s.data(), s.size());
    const double pre = global_norm(views);
    const double threshold = trial % 2 == 0 ? pre * 0.3 : pre * 2.0;
    clip_gradients(g, threshold);
    views.clear();
    for (auto s : g.tensor_spans()) views.emplace_back(s.data(), s.size());
    CHECK(std::abs(global_norm(views) - std::min(pre, threshold)) <= 1e-12 * pre);
  }
}

TEST_CASE("sgd_step") {
  LMModel model = tiny_model(4, 2, 1, 7);
  const LMModel before = model;
  Gradients g = zero_gradients(model);
  for (auto span : g.tensor_spans())
    for (double& v : span) v = 0.5;

  sgd_step(model, g, 0.0);
  auto now = param_spans(model);
  auto was = param_spans(before);
  for (std::size_t t = 0; t < now.size(); ++t)
    for (std::size_t i = 0; i < now[t].size(); ++i) CHECK(now[t][i] == was[t][i]);

  model.out_b[0] = 1.0;
  sgd_step(model, g, 1.0);
  CHECK(model.out_b[0] == 0.5);

  // two half-steps against constant gradients equal one full step
  LMModel a = before, b = before;
  sgd_step(a, g, 0.25);
  sgd_step(a, g, 0.25);
  sgd_step(b, g, 0.5);
  auto sa = param_spans(a);
  auto sb = param_spans(b);
  for (std::size_t t = 0; t < sa.size(); ++t)
    for (std::size_t i = 0; i < sa[t].size(); ++i)
      CHECK(sa[t][i] == doctest::Approx(sb[t][i]).epsilon(1e-12));
}

TEST_CASE("init_params respects bounds and the seed") {
  CellParams big = make_cell(CellKind::lstm(), 350, 350);  // ~1e6 entries
  Rng rng(404);
  init_cell(big, 0.04, rng);
  double sum = 0.0;
  for (double v : big.w.data) {
    REQUIRE(v >= -0.04);
    REQUIRE(v < 0.04);
    sum += v;
  }
  const auto n = static_cast<double>(big.w.data.size());
  const double sigma = 0.04 / std::sqrt(3.0 * n);
  CHECK(std::abs(sum / n) < 3 * sigma);

  // same seed, same bits
  LMModel m1 = tiny_model(5, 4, 2, 42);
  LMModel m2 = tiny_model(5, 4, 2, 42);
  auto s1 = param_spans(m1);
  auto s2 = param_spans(m2);
  for (std::size_t t = 0; t < s1.size(); ++t)
    for (std::size_t i = 0; i < s1[t].size(); ++i) CHECK(s1[t][i] == s2[t][i]);

  // vanishing range: uniform predictions
  LMModel flat = build_model(m1.config);
  Rng flat_rng(1);
  init_params(flat, 1e-300, flat_rng);
  const std::vector<int32_t> ids = {0, 1, 2, 3, 4, 0, 1, 2};
  const double nll = evaluate_nll(flat, ids, 4).mean_nll;
  CHECK(nll == doctest::Approx(std::log(5.0)).epsilon(1e-12));
}

TEST_CASE("inverted dropout preserves expectations and dies at eval") {
  std::vector<std::size_t> dims = {6};
  DropoutPlan plan;
  Rng rng(91);
  const std::size_t draws = 100000;
  std::vector<double> mean(6, 0.0);
  for (std::size_t d = 0; d < draws; ++d) {
    plan.regenerate(dims, 6, 1, 1, 0.65, DropoutTarget::Input, rng);
    const auto mask = plan.input_mask(0, 0, 0);
    for (std::size_t i = 0; i < 6; ++i) mean[i] += mask[i];
  }
  for (double m : mean) CHECK(std::abs(m / draws - 1.0) < 0.01);

  // rate 0 means no plan at all
  plan.regenerate(dims, 6, 1, 1, 0.0, DropoutTarget::Both, rng);
  CHECK_FALSE(plan.active());

  // masks are fresh per application
  plan.regenerate(dims, 6, 2, 2, 0.65, DropoutTarget::Recurrent, rng);
  const auto a = plan.recur_mask(0, 0, 0);
  const auto b = plan.recur_mask(0, 1, 1);
  bool differ = false;
  for (std::size_t i = 0; i < 6; ++i) differ = differ || a[i] != b[i];
  CHECK(differ);
}

TEST_CASE("training reduces the loss on a learnable stream") {
  Rng data_rng(3);
  const auto ids = patterned_ids(600, 5, data_rng);
  LMModel model = tiny_model(5, 4, 2, 11);
  TrainConfig cfg = tiny_train_config();
  Rng rng(cfg.seed);
  const TrainResult result = train(model, BatchStream(ids, cfg.batch, cfg.unroll), {}, cfg, rng);
  REQUIRE(result.epochs.size() == 3);
  CHECK(result.epochs[2].train_ppl < result.epochs[0].train_ppl);
}

TEST_CASE("lr=0 trains nothing and metrics repeat") {
  Rng data_rng(5);
  const auto ids = patterned_ids(300, 4, data_rng);
  LMModel model = tiny_model(4, 4, 1, 13);
  const LMModel before = model;
  TrainConfig cfg = tiny_train_config();
  cfg.base_lr = 0.0;
  Rng rng(cfg.seed);
  const TrainResult result = train(model, BatchStream(ids, cfg.batch, cfg.unroll), {}, cfg, rng);
  CHECK(result.epochs[0].train_ppl == result.epochs[1].train_ppl);
  CHECK(result.epochs[1].train_ppl == result.epochs[2].train_ppl);
  auto now = param_spans(model);
  auto was = param_spans(before);
  for (std::size_t t = 0; t < now.size(); ++t)
    for (std::size_t i = 0; i < now[t].size(); ++i) CHECK(now[t][i] == was[t][i]);
}

TEST_CASE("training is deterministic and thread-count independent") {
  Rng data_rng(7);
  const auto ids = patterned_ids(400, 6, data_rng);

  const auto run = [&](int threads, double dropout) {
    LMModel model = tiny_model(6, 4, 2, 17);
    TrainConfig cfg = tiny_train_config();
    cfg.dropout_rate = dropout;
    cfg.threads = threads;
    Rng rng(cfg.seed);
    train(model, BatchStream(ids, cfg.batch, cfg.unroll), {}, cfg, rng);
    return model;
  };

  const LMModel a = run(1, 0.3);
  const LMModel b = run(1, 0.3);
  const LMModel c = run(2, 0.3);
  auto sa = param_spans(a);
  auto sb = param_spans(b);
  auto sc = param_spans(c);
  for (std::size_t t = 0; t < sa.size(); ++t)
    for (std::size_t i = 0; i < sa[t].size(); ++i) {
      CHECK(sa[t][i] == sb[t][i]);
      CHECK(sa[t][i] == sc[t][i]);
    }
}

TEST_CASE("validation tracking marks the best epoch") {
  Rng data_rng(9);
  const auto train_ids = patterned_ids(500, 5, data_rng);
  const auto valid_ids = patterned_ids(80, 5, data_rng);
  LMModel model = tiny_model(5, 4, 1, 19);
  TrainConfig cfg = tiny_train_config();
  Rng rng(cfg.seed);

  std::size_t hook_best_count = 0;
  const TrainResult result =
      train(model, BatchStream(train_ids, cfg.batch, cfg.unroll), valid_ids, cfg, rng,
            [&](const EpochMetrics& m, const LMModel&, bool best) {
              CHECK(std::isfinite(m.valid_ppl));
              if (best) ++hook_best_count;
            });
  CHECK(result.best_epoch >= 1);
  CHECK(result.best_epoch <= 3);
  CHECK(hook_best_count >= 1);
  const auto lowest =
      std::min_element(result.epochs.begin(), result.epochs.end(),
                       [](const auto& x, const auto& y) { return x.valid_ppl < y.valid_ppl; });
  CHECK(result.best_valid_ppl == lowest->valid_ppl);
}

TEST_CASE("corpus shorter than batch*(unroll+1) fails loudly") {
  LMModel model = tiny_model(4, 2, 1, 23);
  TrainConfig cfg = tiny_train_config();
  std::vector<int32_t> ids(cfg.batch * (cfg.unroll + 1) - 1, 1);
  CHECK_THROWS_AS(BatchStream(ids, cfg.batch, cfg.unroll), DataError);
}

TEST_CASE("bad configs are rejected") {
  TrainConfig cfg = tiny_train_config();
  cfg.dropout_rate = 1.0;
  CHECK_THROWS_AS(validate(cfg), ConfigError);
  cfg = tiny_train_config();
  cfg.warm_epochs = 10;
  cfg.total_epochs = 5;
  CHECK_THROWS_AS(validate(cfg), ConfigError);
  cfg = tiny_train_config();
  cfg.clip_threshold = 0.0;
  CHECK_THROWS_AS(validate(cfg), ConfigError);
}
