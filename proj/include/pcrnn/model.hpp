#pragma once

#include <cstdint>
#include <string>
#include <unordered_set>

#include "pcrnn/dropout.hpp"
#include "pcrnn/pc_layer.hpp"

namespace pcrnn {

struct ModelConfig {
  std::size_t vocab_size = 0;
  std::size_t embed_dim = 0;  // 0 means "same as hidden"
  std::size_t num_layers = 2;
  std::size_t hidden = 0;  // total hidden units per layer (m)
  std::size_t wide = 1;    // parallel cells per layer (n)
  CellKind kind = CellKind::lstm();
  Routing routing = Routing::Split;
  std::size_t unroll = 35;  // T
  std::size_t batch = 20;   // B

  std::size_t resolved_embed_dim() const { return embed_dim == 0 ? hidden : embed_dim; }
};

// embedding -> stacked parallel-cell layers -> vocabulary projection
struct LMModel {
  ModelConfig config;
  Matrix embedding;  // V x embed_dim
  std::vector<ParallelLayer> layers;
  Matrix out_w;  // V x hidden
  Vector out_b;  // V
};

LMModel build_model(const ModelConfig& config);

// Mutable views of every parameter tensor in declaration order:
// embedding, then per layer per cell (W, b), then out_w, out_b.
std::vector<std::span<double>> param_spans(LMModel& model);
std::vector<std::span<const double>> param_spans(const LMModel& model);

// Carried recurrent state, kept per batch stream so streams stay independent.
struct RowState {
  std::vector<LayerState> layers;
};
struct ModelState {
  std::vector<RowState> rows;
};

ModelState zero_model_state(const LMModel& model, std::size_t batch);

struct StepTape {
  std::vector<LayerTape> layers;
  Vector top_h;  // last layer's output, input of the vocabulary projection
};
struct RowTape {
  std::vector<StepTape> steps;
};
struct SequenceTape {
  std::size_t batch = 0;
  std::size_t steps = 0;
  std::vector<RowTape> rows;
};

struct Gradients {
  Matrix d_embedding;
  std::vector<LayerGrads> layers;
  Matrix d_out_w;
  Vector d_out_b;

  void add(const Gradients& other);
  std::vector<std::span<double>> tensor_spans();
  std::vector<std::span<const double>> tensor_spans() const;
};

Gradients zero_gradients(const LMModel& model);

struct SequenceForward {
  Matrix logits;     // (batch*steps) rows, vocab cols; row index = b*steps + t
  ModelState state;  // state after the window
};

// Runs `steps` transitions over `batch` parallel streams. tokens is row-major
// [batch x steps]. layer_masks may be empty (no masking) or one MaskSet per
// layer. Streams are independent, so `threads` fans them out; results are
// bit-identical to sequential execution.
SequenceForward forward_sequence(const LMModel& model, std::span<const int32_t> tokens,
                                 std::size_t batch, std::size_t steps, const ModelState& state,
                                 const std::vector<MaskSet>& layer_masks = {},
                                 const DropoutPlan* dropout = nullptr,
                                 SequenceTape* tape = nullptr, int threads = 1);

// Mean over all positions of -log softmax(logits)[target].
double loss(const Matrix& logits, std::span<const int32_t> targets);

// Exact gradient of `loss` w.r.t. every parameter, truncated at the window
// boundary (nothing flows into the carried-in state). Per-stream partial
// gradients are reduced in stream order, independent of `threads`.
Gradients backward_sequence(const LMModel& model, const SequenceTape& tape,
                            std::span<const int32_t> tokens, std::span<const int32_t> targets,
                            const Matrix& logits, const std::vector<MaskSet>& layer_masks = {},
                            const DropoutPlan* dropout = nullptr, int threads = 1);

double perplexity(double mean_nll);

// exp-normalized probabilities with max subtraction
void softmax_into(std::span<double> out, std::span<const double> logits);

struct EvalGroup {
  std::string name;
  std::unordered_set<int32_t> tokens;
};

struct EvalResult {
  double mean_nll = 0.0;
  std::size_t positions = 0;
  std::vector<double> group_mean_nll;       // one per group; NaN when a group never occurs
  std::vector<std::size_t> group_positions;
};

// Streaming evaluation: the corpus is one contiguous stream walked in windows
// of `steps` with carried state (a final shorter window covers the tail, so
// every position is scored once). Groups restrict NLL aggregation to
// positions whose target token is in the set.
EvalResult evaluate_nll(const LMModel& model, std::span<const int32_t> ids, std::size_t steps,
                        const std::vector<MaskSet>& layer_masks = {},
                        const std::vector<EvalGroup>& groups = {}, int threads = 1);

}  // namespace pcrnn
