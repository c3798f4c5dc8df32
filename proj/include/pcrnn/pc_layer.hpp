#pragma once

#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

#include "pcrnn/cells.hpp"

namespace pcrnn {

enum class Routing {
  Full,   // every cell sees the whole layer input
  Split,  // cell i sees the i-th equal slice of the layer input
};

// Cell indices to silence: a masked cell's output slice and carried state are
// forced to zero, so it contributes nothing at this or any later step.
class MaskSet {
public:
  MaskSet() = default;
  MaskSet(std::initializer_list<std::size_t> indices);
  explicit MaskSet(std::vector<std::size_t> indices);

  bool empty() const { return indices_.empty(); }
  bool contains(std::size_t i) const;
  const std::vector<std::size_t>& indices() const { return indices_; }
  std::size_t max_index() const;  // usage error when empty

private:
  std::vector<std::size_t> indices_;  // sorted, unique
};

// `wide` small independent cells of equal hidden size whose outputs are
// concatenated in cell order.
struct ParallelLayer {
  CellKind kind;
  Routing routing = Routing::Split;
  std::size_t input_dim = 0;
  std::size_t total_hidden = 0;
  std::size_t wide = 1;
  std::vector<CellParams> cells;

  std::size_t cell_hidden() const { return total_hidden / wide; }
  std::size_t cell_input() const { return routing == Routing::Split ? input_dim / wide : input_dim; }
};

ParallelLayer build_layer(CellKind kind, std::size_t input_dim, std::size_t total_hidden,
                          std::size_t wide, Routing routing);

// Exact number of stored weight/bias entries across all cells.
std::size_t count_params(const ParallelLayer& layer);

// Closed forms for Split routing with input_dim = m:
//   LSTM      8m^2/n + 4m
//   naive RNN (literal form)  m^2/n + m
// Defined whenever the division is integral, even if n does not divide m.
unsigned long long closed_form_lstm(unsigned long long m, unsigned long long n);
unsigned long long closed_form_rnn(unsigned long long m, unsigned long long n);

struct LayerState {
  std::vector<CellState> cells;
};

struct LayerTape {
  std::vector<CellTape> cells;
};

struct LayerGrads {
  std::vector<CellGrads> cells;
};

LayerState zero_layer_state(const ParallelLayer& layer);
LayerGrads zero_layer_grads(const ParallelLayer& layer);

struct LayerForward {
  LayerState state;
  Vector h;  // concatenated cell outputs, total_hidden entries
};

// One step of the whole layer. recur_mask, when non-empty, has total_hidden
// entries; cell i consumes its own slice. `threads` may fan the independent
// cells out across workers; results are bit-identical to sequential.
LayerForward pc_forward(const ParallelLayer& layer, const Vector& x, const LayerState& s,
                        const MaskSet& mask = {}, LayerTape* tape = nullptr,
                        std::span<const double> recur_mask = {}, int threads = 1);

// Gradients of the concatenation composition. grad_states_in carries
// dL/d(state at t) arriving from step t+1 (nullptr = zero). Parameter
// gradients accumulate into acc; grad_x and grad_prev are overwritten.
void pc_backward(const ParallelLayer& layer, const LayerTape& tape, const Vector& grad_h,
                 const LayerState* grad_states_in, const MaskSet& mask, LayerGrads& acc,
                 Vector& grad_x, LayerState& grad_prev, std::span<const double> recur_mask = {},
                 int threads = 1);

}  // namespace pcrnn
