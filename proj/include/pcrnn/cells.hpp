#pragma once

#include <span>

#include "pcrnn/numerics.hpp"
#include "pcrnn/rng.hpp"

namespace pcrnn {

enum class CellType { NaiveRnn, Lstm };

struct CellKind {
  CellType type = CellType::Lstm;
  // NaiveRnn only: the nonlinearity applied to the transition.
  Activation activation = Activation::Tanh;
  // NaiveRnn only: h' = f(W h + b + x) with x added raw instead of projected.
  // Requires input_dim == hidden_dim.
  bool literal_input = false;

  static CellKind lstm() { return CellKind{CellType::Lstm, Activation::Tanh, false}; }
  static CellKind naive(Activation act, bool literal = false) {
    return CellKind{CellType::NaiveRnn, act, literal};
  }
  bool operator==(const CellKind&) const = default;
};

// One recurrent cell's weights.
//   NaiveRnn (projected): W is [hidden x (input+hidden)], b is [hidden].
//   NaiveRnn (literal):   W is [hidden x hidden], b is [hidden].
//   Lstm: W is [4*hidden x (input+hidden)], b is [4*hidden];
//         row blocks ordered (i, f, o, g) and serialized in that order.
struct CellParams {
  CellKind kind;
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  Matrix w;
  Vector b;
};

CellParams make_cell(CellKind kind, std::size_t input_dim, std::size_t hidden_dim);
std::size_t param_count(const CellParams& p);
void init_cell(CellParams& p, double range, Rng& rng);

// Hidden state; c is present only for LSTM cells.
struct CellState {
  Vector h;
  Vector c;
};

CellState zero_state(const CellParams& p);

// Everything cached by one forward step that backward needs.
struct CellTape {
  Vector x;        // routed input as seen by the transform
  Vector h_eff;    // previous h after any recurrent-dropout mask
  Vector c_prev;   // Lstm only
  Vector gate_i, gate_f, gate_o, gate_g;  // Lstm only
  Vector c_new, tanh_c;                   // Lstm only
  Vector h_new;    // NaiveRnn only (activation output)
  bool masked = false;  // cell was masked out this step; backward emits zeros
};

// One transition step. Returns the new state; h output equals state.h.
// recur_mask, when non-empty, is multiplied into h_{t-1} before the transform
// (recurrent dropout); it must have hidden_dim entries.
CellState cell_forward(const CellParams& p, const Vector& x, const CellState& s,
                       CellTape* tape = nullptr, std::span<const double> recur_mask = {});

struct CellGrads {
  Matrix dw;
  Vector db;
};

CellGrads zero_grads(const CellParams& p);

// Analytic gradients of one step. grad_h is dL/dh_t (output + recurrence paths
// already summed by the caller); grad_c is dL/dc_t for LSTM (nullptr = zero).
// Parameter gradients accumulate into `acc`; grad_x and grad_prev are
// overwritten. recur_mask must match what forward saw.
void cell_backward(const CellParams& p, const CellTape& tape, const Vector& grad_h,
                   const Vector* grad_c, CellGrads& acc, Vector& grad_x, CellState& grad_prev,
                   std::span<const double> recur_mask = {});

}  // namespace pcrnn
