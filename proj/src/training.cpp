#include "pcrnn/training.hpp"

#include <cmath>
#include <limits>

namespace pcrnn {

void validate(const TrainConfig& cfg) {
  if (cfg.init_range <= 0.0) throw ConfigError("init_range must be > 0");
  if (cfg.base_lr < 0.0) throw ConfigError("base_lr must be >= 0");
  if (cfg.decay_factor <= 0.0 || cfg.decay_factor > 1.0)
    throw ConfigError("decay_factor must be in (0, 1]");
  if (cfg.clip_threshold <= 0.0) throw ConfigError("clip_threshold must be > 0");
  if (cfg.dropout_rate < 0.0 || cfg.dropout_rate >= 1.0)
    throw ConfigError("dropout_rate must be in [0, 1)");
  if (cfg.warm_epochs > cfg.total_epochs)
    throw ConfigError("warm_epochs (" + std::to_string(cfg.warm_epochs) +
                      ") exceeds total_epochs (" + std::to_string(cfg.total_epochs) + ")");
  if (cfg.total_epochs == 0) throw ConfigError("total_epochs must be >= 1");
  if (cfg.batch == 0 || cfg.unroll == 0) throw ConfigError("batch and unroll must be positive");
  if (cfg.threads < 1) throw ConfigError("threads must be >= 1");
}

void init_params(LMModel& model, double range, Rng& rng) {
  if (range <= 0.0) throw ConfigError("init range must be > 0");
  for (auto span : param_spans(model))
    for (double& v : span) v = rng.uniform(-range, range);
}

double lr_at(std::size_t epoch, const TrainConfig& cfg) {
  if (epoch < 1) throw UsageError("epochs are 1-based");
  if (epoch <= cfg.warm_epochs) return cfg.base_lr;
  return cfg.base_lr * std::pow(cfg.decay_factor, static_cast<double>(epoch - cfg.warm_epochs));
}

double clip_gradients(Gradients& grads, double threshold) {
  if (threshold <= 0.0) throw ConfigError("clip threshold must be > 0");
  std::vector<std::span<const double>> views;
  for (auto s : grads.tensor_spans()) views.emplace_back(s.data(), s.size());
  const double norm = global_norm(views);
  if (norm > threshold) {
    const double scale = threshold / norm;
    for (auto s : grads.tensor_spans())
      for (double& v : s) v *= scale;
  }
  return norm;
}

void sgd_step(LMModel& model, const Gradients& grads, double lr) {
  auto params = param_spans(model);
  auto gspans = grads.tensor_spans();
  if (params.size() != gspans.size())
    throw UsageError("sgd_step: gradient layout does not match the model");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].size() != gspans[i].size())
      throw ShapeError("sgd_step: tensor " + std::to_string(i) + " has " +
                       std::to_string(params[i].size()) + " entries, gradient has " +
                       std::to_string(gspans[i].size()));
    for (std::size_t k = 0; k < params[i].size(); ++k) params[i][k] -= lr * gspans[i][k];
  }
}

TrainResult train(LMModel& model, const BatchStream& stream,
                  const std::vector<int32_t>& valid_ids, const TrainConfig& cfg, Rng& rng,
                  const EpochHook& on_epoch) {
  validate(cfg);
  if (stream.batch() != cfg.batch || stream.steps() != cfg.unroll)
    throw UsageError("stream was built with batch/unroll different from the train config");

  std::vector<std::size_t> layer_input_dims;
  for (const auto& layer : model.layers) layer_input_dims.push_back(layer.input_dim);

  TrainResult result;
  result.best_valid_ppl = std::numeric_limits<double>::infinity();
  DropoutPlan plan;
  const std::size_t positions_per_window = cfg.batch * cfg.unroll;

  for (std::size_t epoch = 1; epoch <= cfg.total_epochs; ++epoch) {
    const double lr = lr_at(epoch, cfg);
    ModelState state = zero_model_state(model, cfg.batch);
    double epoch_nll = 0.0;
    std::size_t epoch_positions = 0;

    for (std::size_t k = 0; k < stream.windows(); ++k) {
      const Window w = stream.window(k);
      if (cfg.dropout_rate > 0.0)
        plan.regenerate(layer_input_dims, model.config.hidden, cfg.batch, cfg.unroll,
                        cfg.dropout_rate, cfg.dropout_target, rng);
      const DropoutPlan* dropout = cfg.dropout_rate > 0.0 ? &plan : nullptr;

      SequenceTape tape;
      SequenceForward fwd = forward_sequence(model, w.inputs, w.batch, w.steps, state, {},
                                             dropout, &tape, cfg.threads);
      state = std::move(fwd.state);

      const double window_loss = loss(fwd.logits, w.targets);
      if (!std::isfinite(window_loss))
        throw DataError("training diverged: non-finite loss in epoch " + std::to_string(epoch));
      epoch_nll += window_loss * static_cast<double>(positions_per_window);
      epoch_positions += positions_per_window;

      Gradients grads = backward_sequence(model, tape, w.inputs, w.targets, fwd.logits, {},
                                          dropout, cfg.threads);
      clip_gradients(grads, cfg.clip_threshold);
      sgd_step(model, grads, lr);
    }

    EpochMetrics metrics;
    metrics.epoch = epoch;
    metrics.lr = lr;
    metrics.train_ppl = perplexity(epoch_nll / static_cast<double>(epoch_positions));
    metrics.valid_ppl =
        valid_ids.empty()
            ? std::numeric_limits<double>::quiet_NaN()
            : perplexity(evaluate_nll(model, valid_ids, cfg.unroll, {}, {}, cfg.threads).mean_nll);

    const bool best = metrics.valid_ppl < result.best_valid_ppl;
    if (best) {
      result.best_valid_ppl = metrics.valid_ppl;
      result.best_epoch = epoch;
    }
    result.epochs.push_back(metrics);
    if (on_epoch) on_epoch(metrics, model, best);
  }
  return result;
}

}  // namespace pcrnn
