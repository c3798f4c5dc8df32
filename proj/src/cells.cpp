#include "pcrnn/cells.hpp"

#include <cmath>
#include <string>

namespace pcrnn {

namespace {

std::size_t weight_rows(const CellKind& kind, std::size_t hidden) {
  return kind.type == CellType::Lstm ? 4 * hidden : hidden;
}

std::size_t weight_cols(const CellKind& kind, std::size_t input, std::size_t hidden) {
  if (kind.type == CellType::NaiveRnn && kind.literal_input) return hidden;
  return input + hidden;
}

void check_forward_shapes(const CellParams& p, const Vector& x, const CellState& s) {
  if (x.len() != p.input_dim)
    throw ShapeError("cell_forward: x has " + std::to_string(x.len()) + " entries, cell expects " +
                     std::to_string(p.input_dim));
  if (s.h.len() != p.hidden_dim)
    throw ShapeError("cell_forward: state h has " + std::to_string(s.h.len()) +
                     " entries, cell expects " + std::to_string(p.hidden_dim));
  if (p.kind.type == CellType::Lstm && s.c.len() != p.hidden_dim)
    throw ShapeError("cell_forward: state c has " + std::to_string(s.c.len()) +
                     " entries, cell expects " + std::to_string(p.hidden_dim));
  if (p.w.rows != weight_rows(p.kind, p.hidden_dim) ||
      p.w.cols != weight_cols(p.kind, p.input_dim, p.hidden_dim))
    throw ShapeError("cell_forward: weight is " + std::to_string(p.w.rows) + "x" +
                     std::to_string(p.w.cols) + ", expected " +
                     std::to_string(weight_rows(p.kind, p.hidden_dim)) + "x" +
                     std::to_string(weight_cols(p.kind, p.input_dim, p.hidden_dim)));
}

Vector apply_recur_mask(const Vector& h, std::span<const double> mask) {
  if (mask.empty()) return h;
  if (mask.size() != h.len())
    throw ShapeError("recurrent mask has " + std::to_string(mask.size()) + " entries, h has " +
                     std::to_string(h.len()));
  Vector out(h.len());
  for (std::size_t i = 0; i < h.len(); ++i) out[i] = h[i] * mask[i];
  return out;
}

}  // namespace

CellParams make_cell(CellKind kind, std::size_t input_dim, std::size_t hidden_dim) {
  if (input_dim == 0 || hidden_dim == 0)
    throw ConfigError("cell dims must be positive (input_dim=" + std::to_string(input_dim) +
                      ", hidden_dim=" + std::to_string(hidden_dim) + ")");
  if (kind.type == CellType::NaiveRnn && kind.literal_input && input_dim != hidden_dim)
    throw ConfigError("literal naive cell adds x raw and needs input_dim == hidden_dim, got " +
                      std::to_string(input_dim) + " vs " + std::to_string(hidden_dim));
  CellParams p;
  p.kind = kind;
  p.input_dim = input_dim;
  p.hidden_dim = hidden_dim;
  p.w = Matrix(weight_rows(kind, hidden_dim), weight_cols(kind, input_dim, hidden_dim));
  p.b = Vector(weight_rows(kind, hidden_dim));
  return p;
}

std::size_t param_count(const CellParams& p) { return p.w.rows * p.w.cols + p.b.len(); }

void init_cell(CellParams& p, double range, Rng& rng) {
  for (double& v : p.w.data) v = rng.uniform(-range, range);
  for (double& v : p.b.data) v = rng.uniform(-range, range);
}

CellState zero_state(const CellParams& p) {
  CellState s;
  s.h = Vector(p.hidden_dim);
  if (p.kind.type == CellType::Lstm) s.c = Vector(p.hidden_dim);
  return s;
}

CellGrads zero_grads(const CellParams& p) {
  return CellGrads{Matrix(p.w.rows, p.w.cols), Vector(p.b.len())};
}

CellState cell_forward(const CellParams& p, const Vector& x, const CellState& s, CellTape* tape,
                       std::span<const double> recur_mask) {
  check_forward_shapes(p, x, s);
  const std::size_t hid = p.hidden_dim;
  Vector h_eff = apply_recur_mask(s.h, recur_mask);
  CellState out;

  if (p.kind.type == CellType::Lstm) {
    // z = W [x; h] + b, gate row blocks ordered (i, f, o, g)
    Vector xh(p.input_dim + hid);
    std::copy(x.data.begin(), x.data.end(), xh.data.begin());
    std::copy(h_eff.data.begin(), h_eff.data.end(),
              xh.data.begin() + static_cast<std::ptrdiff_t>(p.input_dim));
    Vector z = affine(p.w, xh, p.b);

    Vector gi(hid), gf(hid), go(hid), gg(hid), c_new(hid), tanh_c(hid);
    out.h = Vector(hid);
    for (std::size_t k = 0; k < hid; ++k) {
      gi[k] = activate_scalar(Activation::Sigmoid, z[k]);
      gf[k] = activate_scalar(Activation::Sigmoid, z[hid + k]);
      go[k] = activate_scalar(Activation::Sigmoid, z[2 * hid + k]);
      gg[k] = std::tanh(z[3 * hid + k]);
      c_new[k] = gf[k] * s.c[k] + gi[k] * gg[k];
      tanh_c[k] = std::tanh(c_new[k]);
      out.h[k] = go[k] * tanh_c[k];
    }
    out.c = c_new;
    if (tape) {
      tape->x = x;
      tape->h_eff = std::move(h_eff);
      tape->c_prev = s.c;
      tape->gate_i = std::move(gi);
      tape->gate_f = std::move(gf);
      tape->gate_o = std::move(go);
      tape->gate_g = std::move(gg);
      tape->c_new = std::move(c_new);
      tape->tanh_c = std::move(tanh_c);
      tape->masked = false;
    }
    return out;
  }

  // naive RNN: h' = f(W [x; h] + b) or, in literal mode, f(W h + b + x)
  Vector z;
  if (p.kind.literal_input) {
    z = affine(p.w, h_eff, p.b);
    for (std::size_t k = 0; k < hid; ++k) z[k] += x[k];
  } else {
    Vector xh(p.input_dim + hid);
    std::copy(x.data.begin(), x.data.end(), xh.data.begin());
    std::copy(h_eff.data.begin(), h_eff.data.end(),
              xh.data.begin() + static_cast<std::ptrdiff_t>(p.input_dim));
    z = affine(p.w, xh, p.b);
  }
  out.h = activate(p.kind.activation, z);
  if (tape) {
    tape->x = x;
    tape->h_eff = std::move(h_eff);
    tape->h_new = out.h;
    tape->masked = false;
  }
  return out;
}

void cell_backward(const CellParams& p, const CellTape& tape, const Vector& grad_h,
                   const Vector* grad_c, CellGrads& acc, Vector& grad_x, CellState& grad_prev,
                   std::span<const double> recur_mask) {
  const std::size_t hid = p.hidden_dim;
  if (grad_h.len() != hid)
    throw ShapeError("cell_backward: grad_h has " + std::to_string(grad_h.len()) +
                     " entries, cell expects " + std::to_string(hid));
  if (acc.dw.rows != p.w.rows || acc.dw.cols != p.w.cols || acc.db.len() != p.b.len())
    throw UsageError("cell_backward: gradient accumulator does not match the cell's parameters");

  grad_x.data.assign(p.input_dim, 0.0);
  grad_prev.h.data.assign(hid, 0.0);
  if (p.kind.type == CellType::Lstm) grad_prev.c.data.assign(hid, 0.0);
  else grad_prev.c.data.clear();

  if (tape.masked) return;  // masked cells contribute nothing

  if (p.kind.type == CellType::Lstm) {
    if (tape.gate_i.len() != hid || tape.x.len() != p.input_dim)
      throw UsageError("cell_backward: tape does not match the cell's parameters");
    if (grad_c && grad_c->len() != hid)
      throw ShapeError("cell_backward: grad_c has " + std::to_string(grad_c->len()) +
                       " entries, cell expects " + std::to_string(hid));

    Vector dz(4 * hid);
    for (std::size_t k = 0; k < hid; ++k) {
      const double i = tape.gate_i[k], f = tape.gate_f[k], o = tape.gate_o[k], g = tape.gate_g[k];
      const double tc = tape.tanh_c[k];
      const double dh = grad_h[k];
      const double dout_o = dh * tc;
      double dc = dh * o * (1.0 - tc * tc);
      if (grad_c) dc += (*grad_c)[k];
      const double di = dc * g;
      const double df = dc * tape.c_prev[k];
      const double dg = dc * i;
      grad_prev.c[k] = dc * f;
      dz[k] = di * i * (1.0 - i);
      dz[hid + k] = df * f * (1.0 - f);
      dz[2 * hid + k] = dout_o * o * (1.0 - o);
      dz[3 * hid + k] = dg * (1.0 - g * g);
    }

    Vector xh(p.input_dim + hid);
    std::copy(tape.x.data.begin(), tape.x.data.end(), xh.data.begin());
    std::copy(tape.h_eff.data.begin(), tape.h_eff.data.end(),
              xh.data.begin() + static_cast<std::ptrdiff_t>(p.input_dim));
    add_outer(acc.dw, dz, xh);
    for (std::size_t k = 0; k < dz.len(); ++k) acc.db[k] += dz[k];

    Vector dxh(p.input_dim + hid);
    matvec_transpose_acc(dxh, p.w, dz);
    for (std::size_t k = 0; k < p.input_dim; ++k) grad_x[k] = dxh[k];
    for (std::size_t k = 0; k < hid; ++k) {
      double dh_eff = dxh[p.input_dim + k];
      grad_prev.h[k] = recur_mask.empty() ? dh_eff : dh_eff * recur_mask[k];
    }
    return;
  }

  if (tape.h_new.len() != hid)
    throw UsageError("cell_backward: tape does not match the cell's parameters");

  Vector dz(hid);
  for (std::size_t k = 0; k < hid; ++k)
    dz[k] = grad_h[k] * activate_grad_from_output(p.kind.activation, tape.h_new[k]);

  if (p.kind.literal_input) {
    add_outer(acc.dw, dz, tape.h_eff);
    for (std::size_t k = 0; k < hid; ++k) acc.db[k] += dz[k];
    for (std::size_t k = 0; k < hid; ++k) grad_x[k] = dz[k];
    Vector dh_eff(hid);
    matvec_transpose_acc(dh_eff, p.w, dz);
    for (std::size_t k = 0; k < hid; ++k)
      grad_prev.h[k] = recur_mask.empty() ? dh_eff[k] : dh_eff[k] * recur_mask[k];
    return;
  }

  Vector xh(p.input_dim + hid);
  std::copy(tape.x.data.begin(), tape.x.data.end(), xh.data.begin());
  std::copy(tape.h_eff.data.begin(), tape.h_eff.data.end(),
            xh.data.begin() + static_cast<std::ptrdiff_t>(p.input_dim));
  add_outer(acc.dw, dz, xh);
  for (std::size_t k = 0; k < hid; ++k) acc.db[k] += dz[k];

  Vector dxh(p.input_dim + hid);
  matvec_transpose_acc(dxh, p.w, dz);
  for (std::size_t k = 0; k < p.input_dim; ++k) grad_x[k] = dxh[k];
  for (std::size_t k = 0; k < hid; ++k) {
    double dh_eff = dxh[p.input_dim + k];
    grad_prev.h[k] = recur_mask.empty() ? dh_eff : dh_eff * recur_mask[k];
  }
}

}  // namespace pcrnn
