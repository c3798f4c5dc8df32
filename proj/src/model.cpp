#include "pcrnn/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pcrnn/threading.hpp"

namespace pcrnn {

LMModel build_model(const ModelConfig& config) {
  if (config.vocab_size == 0) throw ConfigError("vocab_size must be positive");
  if (config.hidden == 0) throw ConfigError("hidden_size must be positive");
  if (config.num_layers == 0) throw ConfigError("num_layers must be positive");
  if (config.wide == 0) throw ConfigError("wide must be positive");
  if (config.hidden % config.wide != 0)
    throw ConfigError("hidden_size " + std::to_string(config.hidden) +
                      " is not divisible by wide " + std::to_string(config.wide));

  LMModel model;
  model.config = config;
  const std::size_t embed = config.resolved_embed_dim();
  model.embedding = Matrix(config.vocab_size, embed);
  model.layers.reserve(config.num_layers);
  for (std::size_t l = 0; l < config.num_layers; ++l) {
    const std::size_t in = l == 0 ? embed : config.hidden;
    model.layers.push_back(build_layer(config.kind, in, config.hidden, config.wide,
                                       config.routing));
  }
  model.out_w = Matrix(config.vocab_size, config.hidden);
  model.out_b = Vector(config.vocab_size);
  return model;
}

std::vector<std::span<double>> param_spans(LMModel& model) {
  std::vector<std::span<double>> spans;
  spans.push_back(model.embedding.span());
  for (auto& layer : model.layers)
    for (auto& cell : layer.cells) {
      spans.push_back(cell.w.span());
      spans.push_back(cell.b.span());
    }
  spans.push_back(model.out_w.span());
  spans.push_back(model.out_b.span());
  return spans;
}

std::vector<std::span<const double>> param_spans(const LMModel& model) {
  std::vector<std::span<const double>> spans;
  spans.push_back(model.embedding.span());
  for (const auto& layer : model.layers)
    for (const auto& cell : layer.cells) {
      spans.push_back(cell.w.span());
      spans.push_back(cell.b.span());
    }
  spans.push_back(model.out_w.span());
  spans.push_back(model.out_b.span());
  return spans;
}

ModelState zero_model_state(const LMModel& model, std::size_t batch) {
  ModelState state;
  state.rows.resize(batch);
  for (auto& row : state.rows) {
    row.layers.reserve(model.layers.size());
    for (const auto& layer : model.layers) row.layers.push_back(zero_layer_state(layer));
  }
  return state;
}

void Gradients::add(const Gradients& other) {
  auto mine = tensor_spans();
  auto theirs = other.tensor_spans();
  for (std::size_t i = 0; i < mine.size(); ++i)
    for (std::size_t k = 0; k < mine[i].size(); ++k) mine[i][k] += theirs[i][k];
}

std::vector<std::span<double>> Gradients::tensor_spans() {
  std::vector<std::span<double>> spans;
  spans.push_back(d_embedding.span());
  for (auto& layer : layers)
    for (auto& cell : layer.cells) {
      spans.push_back(cell.dw.span());
      spans.push_back(cell.db.span());
    }
  spans.push_back(d_out_w.span());
  spans.push_back(d_out_b.span());
  return spans;
}

std::vector<std::span<const double>> Gradients::tensor_spans() const {
  std::vector<std::span<const double>> spans;
  spans.push_back(d_embedding.span());
  for (const auto& layer : layers)
    for (const auto& cell : layer.cells) {
      spans.push_back(cell.dw.span());
      spans.push_back(cell.db.span());
    }
  spans.push_back(d_out_w.span());
  spans.push_back(d_out_b.span());
  return spans;
}

Gradients zero_gradients(const LMModel& model) {
  Gradients g;
  g.d_embedding = Matrix(model.embedding.rows, model.embedding.cols);
  g.layers.reserve(model.layers.size());
  for (const auto& layer : model.layers) g.layers.push_back(zero_layer_grads(layer));
  g.d_out_w = Matrix(model.out_w.rows, model.out_w.cols);
  g.d_out_b = Vector(model.out_b.len());
  return g;
}

namespace {

void check_layer_masks(const LMModel& model, const std::vector<MaskSet>& masks) {
  if (!masks.empty() && masks.size() != model.layers.size())
    throw UsageError("expected one mask set per layer (" +
                     std::to_string(model.layers.size()) + "), got " +
                     std::to_string(masks.size()));
}

const MaskSet& mask_for(const std::vector<MaskSet>& masks, std::size_t layer) {
  static const MaskSet none;
  return masks.empty() ? none : masks[layer];
}

void apply_mask_inplace(Vector& v, std::span<const double> mask) {
  for (std::size_t i = 0; i < mask.size(); ++i) v[i] *= mask[i];
}

}  // namespace

SequenceForward forward_sequence(const LMModel& model, std::span<const int32_t> tokens,
                                 std::size_t batch, std::size_t steps, const ModelState& state,
                                 const std::vector<MaskSet>& layer_masks,
                                 const DropoutPlan* dropout, SequenceTape* tape, int threads) {
  if (tokens.size() != batch * steps)
    throw ShapeError("forward_sequence: got " + std::to_string(tokens.size()) +
                     " tokens for a " + std::to_string(batch) + "x" + std::to_string(steps) +
                     " window");
  if (state.rows.size() != batch)
    throw UsageError("forward_sequence: state has " + std::to_string(state.rows.size()) +
                     " streams, window has " + std::to_string(batch));
  check_layer_masks(model, layer_masks);

  const std::size_t num_layers = model.layers.size();
  const auto vocab = static_cast<int32_t>(model.config.vocab_size);

  SequenceForward out;
  out.logits = Matrix(batch * steps, model.config.vocab_size);
  out.state.rows.resize(batch);
  if (tape) {
    tape->batch = batch;
    tape->steps = steps;
    tape->rows.assign(batch, RowTape{});
  }

  // streams are independent; cells fan out instead when there is only one
  const int cell_threads = batch == 1 ? threads : 1;

  parallel_for(batch, threads, [&](std::size_t b) {
    RowState row = state.rows[b];
    RowTape* row_tape = tape ? &tape->rows[b] : nullptr;
    if (row_tape) row_tape->steps.resize(steps);

    for (std::size_t t = 0; t < steps; ++t) {
      const int32_t tok = tokens[b * steps + t];
      if (tok < 0 || tok >= vocab)
        throw DataError("token id " + std::to_string(tok) + " out of range [0, " +
                        std::to_string(vocab) + ")");

      Vector x(model.embedding.cols);
      std::copy_n(model.embedding.row(static_cast<std::size_t>(tok)), model.embedding.cols,
                  x.data.begin());

      StepTape* step_tape = row_tape ? &row_tape->steps[t] : nullptr;
      if (step_tape) step_tape->layers.resize(num_layers);

      for (std::size_t l = 0; l < num_layers; ++l) {
        if (dropout && dropout->input_on()) apply_mask_inplace(x, dropout->input_mask(l, b, t));
        LayerForward lf = pc_forward(
            model.layers[l], x, row.layers[l], mask_for(layer_masks, l),
            step_tape ? &step_tape->layers[l] : nullptr,
            dropout ? dropout->recur_mask(l, b, t) : std::span<const double>{}, cell_threads);
        row.layers[l] = std::move(lf.state);
        x = std::move(lf.h);
      }

      if (step_tape) step_tape->top_h = x;
      double* logit_row = out.logits.row(b * steps + t);
      for (std::size_t v = 0; v < model.out_w.rows; ++v)
        logit_row[v] = dot(model.out_w.row(v), x.ptr(), model.out_w.cols) + model.out_b[v];
    }
    out.state.rows[b] = std::move(row);
  });

  return out;
}

void softmax_into(std::span<double> out, std::span<const double> logits) {
  double max = logits[0];
  for (double v : logits) max = std::max(max, v);
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - max);
    sum += out[i];
  }
  const double inv = 1.0 / sum;
  for (double& v : out) v *= inv;
}

namespace {

// -log softmax(logits)[target], computed from the log-sum-exp directly
double nll_at(std::span<const double> logits, int32_t target) {
  double max = logits[0];
  for (double v : logits) max = std::max(max, v);
  double sum = 0.0;
  for (double v : logits) sum += std::exp(v - max);
  return max + std::log(sum) - logits[static_cast<std::size_t>(target)];
}

}  // namespace

double loss(const Matrix& logits, std::span<const int32_t> targets) {
  if (logits.rows != targets.size())
    throw ShapeError("loss: logits have " + std::to_string(logits.rows) + " rows but " +
                     std::to_string(targets.size()) + " targets were given");
  const auto vocab = static_cast<int32_t>(logits.cols);
  double total = 0.0;
  for (std::size_t r = 0; r < logits.rows; ++r) {
    const int32_t target = targets[r];
    if (target < 0 || target >= vocab)
      throw DataError("target id " + std::to_string(target) + " out of range [0, " +
                      std::to_string(vocab) + ")");
    total += nll_at({logits.row(r), logits.cols}, target);
  }
  return total / static_cast<double>(logits.rows);
}

Gradients backward_sequence(const LMModel& model, const SequenceTape& tape,
                            std::span<const int32_t> tokens, std::span<const int32_t> targets,
                            const Matrix& logits, const std::vector<MaskSet>& layer_masks,
                            const DropoutPlan* dropout, int threads) {
  const std::size_t batch = tape.batch, steps = tape.steps;
  if (batch == 0 || tape.rows.size() != batch)
    throw UsageError("backward_sequence: tape does not come from a matching forward call");
  if (tokens.size() != batch * steps || targets.size() != batch * steps)
    throw ShapeError("backward_sequence: tokens/targets do not match the " +
                     std::to_string(batch) + "x" + std::to_string(steps) + " tape");
  if (logits.rows != batch * steps || logits.cols != model.config.vocab_size)
    throw UsageError("backward_sequence: logits do not match the tape window");
  check_layer_masks(model, layer_masks);

  const std::size_t num_layers = model.layers.size();
  const double inv_positions = 1.0 / static_cast<double>(batch * steps);
  const auto vocab = static_cast<int32_t>(model.config.vocab_size);

  // Each stream accumulates into its own buffer; buffers are then reduced in
  // stream order, so the result does not depend on `threads`.
  std::vector<Gradients> partial(batch);
  const int cell_threads = batch == 1 ? threads : 1;

  parallel_for(batch, threads, [&](std::size_t b) {
    Gradients& acc = partial[b];
    acc = zero_gradients(model);
    const RowTape& row_tape = tape.rows[b];

    std::vector<LayerState> carry(num_layers);
    Vector probs(model.config.vocab_size);
    Vector dlogits(model.config.vocab_size);
    Vector grad_x;

    for (std::size_t t = steps; t-- > 0;) {
      const std::size_t r = b * steps + t;
      const int32_t target = targets[r];
      if (target < 0 || target >= vocab)
        throw DataError("target id " + std::to_string(target) + " out of range [0, " +
                        std::to_string(vocab) + ")");

      softmax_into(probs.span(), {logits.row(r), logits.cols});
      for (std::size_t v = 0; v < probs.len(); ++v) dlogits[v] = probs[v] * inv_positions;
      dlogits[static_cast<std::size_t>(target)] -= inv_positions;

      const Vector& top_h = row_tape.steps[t].top_h;
      add_outer(acc.d_out_w, dlogits, top_h);
      for (std::size_t v = 0; v < dlogits.len(); ++v) acc.d_out_b[v] += dlogits[v];

      Vector dh(model.config.hidden);
      matvec_transpose_acc(dh, model.out_w, dlogits);

      for (std::size_t l = num_layers; l-- > 0;) {
        LayerState grad_prev;
        pc_backward(model.layers[l], row_tape.steps[t].layers[l], dh,
                    t + 1 < steps ? &carry[l] : nullptr, mask_for(layer_masks, l), acc.layers[l],
                    grad_x, grad_prev,
                    dropout ? dropout->recur_mask(l, b, t) : std::span<const double>{},
                    cell_threads);
        carry[l] = std::move(grad_prev);
        if (dropout && dropout->input_on())
          apply_mask_inplace(grad_x, dropout->input_mask(l, b, t));
        if (l > 0) {
          dh = std::move(grad_x);
          grad_x = Vector{};
        }
      }

      // grad_x now holds the gradient w.r.t. the embedding row
      const auto tok = static_cast<std::size_t>(tokens[r]);
      axpy(acc.d_embedding.row(tok), 1.0, grad_x.ptr(), acc.d_embedding.cols);
    }
  });

  Gradients total = zero_gradients(model);
  for (std::size_t b = 0; b < batch; ++b) total.add(partial[b]);
  return total;
}

double perplexity(double mean_nll) { return std::exp(mean_nll); }

EvalResult evaluate_nll(const LMModel& model, std::span<const int32_t> ids, std::size_t steps,
                        const std::vector<MaskSet>& layer_masks,
                        const std::vector<EvalGroup>& groups, int threads) {
  if (ids.size() < 2) throw DataError("evaluation needs at least 2 tokens");
  if (steps == 0) throw UsageError("evaluation window must be positive");

  EvalResult result;
  result.group_mean_nll.assign(groups.size(), 0.0);
  result.group_positions.assign(groups.size(), 0);

  ModelState state = zero_model_state(model, 1);
  std::size_t pos = 0;
  const std::size_t total_positions = ids.size() - 1;
  double total_nll = 0.0;
  Vector probs(model.config.vocab_size);

  while (pos < total_positions) {
    const std::size_t t = std::min(steps, total_positions - pos);
    SequenceForward fwd = forward_sequence(model, ids.subspan(pos, t), 1, t, state, layer_masks,
                                           nullptr, nullptr, threads);
    state = std::move(fwd.state);
    for (std::size_t k = 0; k < t; ++k) {
      const int32_t target = ids[pos + k + 1];
      if (target < 0 || target >= static_cast<int32_t>(model.config.vocab_size))
        throw DataError("target id " + std::to_string(target) + " out of range [0, " +
                        std::to_string(model.config.vocab_size) + ")");
      // same arithmetic as the ensemble path, so a one-member ensemble is
      // bit-identical to plain evaluation
      softmax_into(probs.span(), {fwd.logits.row(k), fwd.logits.cols});
      const double nll = -std::log(probs[static_cast<std::size_t>(target)]);
      total_nll += nll;
      for (std::size_t g = 0; g < groups.size(); ++g)
        if (groups[g].tokens.contains(target)) {
          result.group_mean_nll[g] += nll;
          result.group_positions[g] += 1;
        }
    }
    pos += t;
  }

  result.positions = total_positions;
  result.mean_nll = total_nll / static_cast<double>(total_positions);
  for (std::size_t g = 0; g < groups.size(); ++g)
    result.group_mean_nll[g] = result.group_positions[g] == 0
                                   ? std::numeric_limits<double>::quiet_NaN()
                                   : result.group_mean_nll[g] /
                                         static_cast<double>(result.group_positions[g]);
  return result;
}

}  // namespace pcrnn
