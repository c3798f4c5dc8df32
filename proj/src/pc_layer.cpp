#include "pcrnn/pc_layer.hpp"

#include <algorithm>
#include <string>

#include "pcrnn/threading.hpp"

namespace pcrnn {

MaskSet::MaskSet(std::initializer_list<std::size_t> indices)
    : MaskSet(std::vector<std::size_t>(indices)) {}

MaskSet::MaskSet(std::vector<std::size_t> indices) : indices_(std::move(indices)) {
  std::sort(indices_.begin(), indices_.end());
  indices_.erase(std::unique(indices_.begin(), indices_.end()), indices_.end());
}

bool MaskSet::contains(std::size_t i) const {
  return std::binary_search(indices_.begin(), indices_.end(), i);
}

std::size_t MaskSet::max_index() const {
  if (indices_.empty()) throw UsageError("max_index on an empty mask set");
  return indices_.back();
}

ParallelLayer build_layer(CellKind kind, std::size_t input_dim, std::size_t total_hidden,
                          std::size_t wide, Routing routing) {
  if (wide == 0) throw ConfigError("layer wide must be >= 1");
  if (total_hidden == 0 || input_dim == 0)
    throw ConfigError("layer dims must be positive (input_dim=" + std::to_string(input_dim) +
                      ", total_hidden=" + std::to_string(total_hidden) + ")");
  if (total_hidden % wide != 0)
    throw ConfigError("total_hidden " + std::to_string(total_hidden) +
                      " is not divisible by wide " + std::to_string(wide));
  if (routing == Routing::Split && input_dim % wide != 0)
    throw ConfigError("input_dim " + std::to_string(input_dim) + " is not divisible by wide " +
                      std::to_string(wide) + " (required for split routing)");

  ParallelLayer layer;
  layer.kind = kind;
  layer.routing = routing;
  layer.input_dim = input_dim;
  layer.total_hidden = total_hidden;
  layer.wide = wide;
  layer.cells.reserve(wide);
  const std::size_t cell_in = routing == Routing::Split ? input_dim / wide : input_dim;
  for (std::size_t i = 0; i < wide; ++i)
    layer.cells.push_back(make_cell(kind, cell_in, total_hidden / wide));
  return layer;
}

std::size_t count_params(const ParallelLayer& layer) {
  std::size_t total = 0;
  for (const auto& c : layer.cells) total += param_count(c);
  return total;
}

unsigned long long closed_form_lstm(unsigned long long m, unsigned long long n) {
  if (n == 0 || (8 * m * m) % n != 0)
    throw ConfigError("closed form 8m^2/n + 4m is not integral for m=" + std::to_string(m) +
                      ", n=" + std::to_string(n));
  return (8 * m * m) / n + 4 * m;
}

unsigned long long closed_form_rnn(unsigned long long m, unsigned long long n) {
  if (n == 0 || (m * m) % n != 0)
    throw ConfigError("closed form m^2/n + m is not integral for m=" + std::to_string(m) +
                      ", n=" + std::to_string(n));
  return (m * m) / n + m;
}

LayerState zero_layer_state(const ParallelLayer& layer) {
  LayerState s;
  s.cells.reserve(layer.wide);
  for (const auto& c : layer.cells) s.cells.push_back(zero_state(c));
  return s;
}

LayerGrads zero_layer_grads(const ParallelLayer& layer) {
  LayerGrads g;
  g.cells.reserve(layer.wide);
  for (const auto& c : layer.cells) g.cells.push_back(zero_grads(c));
  return g;
}

namespace {

void check_mask(const MaskSet& mask, std::size_t wide) {
  if (!mask.empty() && mask.max_index() >= wide)
    throw UsageError("mask names cell " + std::to_string(mask.max_index()) +
                     " but the layer has only " + std::to_string(wide) + " cells");
}

std::span<const double> cell_mask_slice(std::span<const double> layer_mask, std::size_t cell,
                                        std::size_t hid) {
  if (layer_mask.empty()) return {};
  return layer_mask.subspan(cell * hid, hid);
}

}  // namespace

LayerForward pc_forward(const ParallelLayer& layer, const Vector& x, const LayerState& s,
                        const MaskSet& mask, LayerTape* tape, std::span<const double> recur_mask,
                        int threads) {
  if (x.len() != layer.input_dim)
    throw ShapeError("pc_forward: x has " + std::to_string(x.len()) + " entries, layer expects " +
                     std::to_string(layer.input_dim));
  if (s.cells.size() != layer.wide)
    throw UsageError("pc_forward: state has " + std::to_string(s.cells.size()) +
                     " cells, layer has " + std::to_string(layer.wide));
  if (!recur_mask.empty() && recur_mask.size() != layer.total_hidden)
    throw ShapeError("pc_forward: recurrent mask has " + std::to_string(recur_mask.size()) +
                     " entries, layer expects " + std::to_string(layer.total_hidden));
  check_mask(mask, layer.wide);

  const std::size_t hid = layer.cell_hidden();
  const std::size_t cell_in = layer.cell_input();

  LayerForward out;
  out.state.cells.resize(layer.wide);
  out.h = Vector(layer.total_hidden);
  if (tape) tape->cells.assign(layer.wide, CellTape{});

  parallel_for(layer.wide, threads, [&](std::size_t i) {
    CellTape* cell_tape = tape ? &tape->cells[i] : nullptr;
    if (mask.contains(i)) {
      out.state.cells[i] = zero_state(layer.cells[i]);
      // h slice is already zero
      if (cell_tape) cell_tape->masked = true;
      return;
    }
    const Vector cell_x =
        layer.routing == Routing::Split ? slice(x, i * cell_in, cell_in) : x;
    CellState next = cell_forward(layer.cells[i], cell_x, s.cells[i], cell_tape,
                                  cell_mask_slice(recur_mask, i, hid));
    std::copy(next.h.data.begin(), next.h.data.end(),
              out.h.data.begin() + static_cast<std::ptrdiff_t>(i * hid));
    out.state.cells[i] = std::move(next);
  });
  return out;
}

void pc_backward(const ParallelLayer& layer, const LayerTape& tape, const Vector& grad_h,
                 const LayerState* grad_states_in, const MaskSet& mask, LayerGrads& acc,
                 Vector& grad_x, LayerState& grad_prev, std::span<const double> recur_mask,
                 int threads) {
  if (tape.cells.size() != layer.wide)
    throw UsageError("pc_backward: tape has " + std::to_string(tape.cells.size()) +
                     " cells, layer has " + std::to_string(layer.wide));
  if (grad_h.len() != layer.total_hidden)
    throw ShapeError("pc_backward: grad_h has " + std::to_string(grad_h.len()) +
                     " entries, layer expects " + std::to_string(layer.total_hidden));
  if (acc.cells.size() != layer.wide)
    throw UsageError("pc_backward: gradient accumulator has " +
                     std::to_string(acc.cells.size()) + " cells, layer has " +
                     std::to_string(layer.wide));
  check_mask(mask, layer.wide);

  const std::size_t hid = layer.cell_hidden();
  const std::size_t cell_in = layer.cell_input();

  grad_prev.cells.resize(layer.wide);
  std::vector<Vector> cell_grad_x(layer.wide);

  parallel_for(layer.wide, threads, [&](std::size_t i) {
    if (mask.contains(i) || tape.cells[i].masked) {
      cell_grad_x[i] = Vector(cell_in);
      grad_prev.cells[i] = zero_state(layer.cells[i]);
      grad_prev.cells[i].h.fill(0.0);
      return;
    }
    Vector gh = slice(grad_h, i * hid, hid);
    const Vector* gc = nullptr;
    if (grad_states_in) {
      const CellState& carry = grad_states_in->cells[i];
      for (std::size_t k = 0; k < hid; ++k) gh[k] += carry.h[k];
      if (layer.kind.type == CellType::Lstm) gc = &carry.c;
    }
    cell_backward(layer.cells[i], tape.cells[i], gh, gc, acc.cells[i], cell_grad_x[i],
                  grad_prev.cells[i], cell_mask_slice(recur_mask, i, hid));
  });

  // assemble grad_x: split concatenates, full sums in cell order
  grad_x.data.assign(layer.input_dim, 0.0);
  if (layer.routing == Routing::Split) {
    for (std::size_t i = 0; i < layer.wide; ++i)
      std::copy(cell_grad_x[i].data.begin(), cell_grad_x[i].data.end(),
                grad_x.data.begin() + static_cast<std::ptrdiff_t>(i * cell_in));
  } else {
    for (std::size_t i = 0; i < layer.wide; ++i)
      axpy(grad_x.ptr(), 1.0, cell_grad_x[i].ptr(), layer.input_dim);
  }
}

}  // namespace pcrnn
