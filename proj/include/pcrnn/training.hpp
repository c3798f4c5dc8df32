#pragma once

#include <functional>

#include "pcrnn/data.hpp"
#include "pcrnn/model.hpp"

namespace pcrnn {

struct TrainConfig {
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

void validate(const TrainConfig& cfg);

// Every parameter entry i.i.d. uniform on [-range, range], drawn in
// declaration order (embedding, per layer per cell W then b, out_w, out_b).
void init_params(LMModel& model, double range, Rng& rng);

// Learning rate for a 1-based epoch: base_lr through warm_epochs, then one
// decay_factor multiplication per later epoch.
double lr_at(std::size_t epoch, const TrainConfig& cfg);

// Scales all gradients by threshold/norm when the global norm exceeds the
// threshold. Returns the pre-clip norm.
double clip_gradients(Gradients& grads, double threshold);

void sgd_step(LMModel& model, const Gradients& grads, double lr);

struct EpochMetrics {
  std::size_t epoch = 0;
  double lr = 0.0;
  double train_ppl = 0.0;
  double valid_ppl = 0.0;
};

struct TrainResult {
  std::vector<EpochMetrics> epochs;
  std::size_t best_epoch = 0;
  double best_valid_ppl = 0.0;
};

// Called after each epoch; `best` marks a new lowest validation perplexity.
using EpochHook = std::function<void(const EpochMetrics&, const LMModel&, bool best)>;

// Full training protocol: epochs of contiguous windows with carried state
// (reset to zero at each epoch start), per-window dropout, gradient clipping,
// and the staged learning-rate schedule. `rng` drives dropout masks only;
// initialize parameters beforehand.
TrainResult train(LMModel& model, const BatchStream& stream,
                  const std::vector<int32_t>& valid_ids, const TrainConfig& cfg, Rng& rng,
                  const EpochHook& on_epoch = {});

}  // namespace pcrnn
