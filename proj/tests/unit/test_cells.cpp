#include <doctest.h>

#include <cmath>

#include "pcrnn/cells.hpp"
#include "test_support.hpp"

using namespace pcrnn;
using namespace test_support;

namespace {

// 1-unit LSTM used across the scalar-oracle tests; rows (i, f, o, g)
CellParams scalar_lstm() {
  CellParams p = make_cell(CellKind::lstm(), 1, 1);
  const double w[4][2] = {{0.5, -0.3}, {0.2, 0.4}, {-0.1, 0.6}, {0.7, 0.25}};
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 2; ++c) p.w.at(r, c) = w[r][c];
  p.b = Vector{0.1, -0.2, 0.3, 0.05};
  return p;
}

}  // namespace

TEST_CASE("zero-parameter LSTM is a fixed point at zero state") {
  CellParams p = make_cell(CellKind::lstm(), 3, 2);
  CellState s = zero_state(p);
  CellTape tape;
  const CellState out = cell_forward(p, Vector{0.7, -1.3, 2.0}, s, &tape);
  for (double v : out.h.data) CHECK(v == 0.0);
  for (double v : out.c.data) CHECK(v == 0.0);
  for (double v : tape.gate_i.data) CHECK(v == 0.5);
  for (double v : tape.gate_f.data) CHECK(v == 0.5);
  for (double v : tape.gate_o.data) CHECK(v == 0.5);
  for (double v : tape.gate_g.data) CHECK(v == 0.0);
}

TEST_CASE("1-unit LSTM matches the scalar reference, two chained steps") {
  // expected values from tests/oracle/scalar_oracle.py
  CellParams p = scalar_lstm();
  CellState s;
  s.h = Vector{-0.5};
  s.c = Vector{0.35};

  const CellState s1 = cell_forward(p, Vector{0.8}, s);
  CHECK(s1.h[0] == doctest::Approx(0.20248127817887737).epsilon(1e-14));
  CHECK(s1.c[0] == doctest::Approx(0.44991195355591718).epsilon(1e-14));

  const CellState s2 = cell_forward(p, Vector{-0.4}, s1);
  CHECK(s2.h[0] == doctest::Approx(0.073870908187674569).epsilon(1e-14));
  CHECK(s2.c[0] == doctest::Approx(0.12102243742321851).epsilon(1e-14));
}

TEST_CASE("zero-weight naive RNN with tanh outputs zero") {
  CellParams p = make_cell(CellKind::naive(Activation::Tanh), 4, 3);
  Rng rng(1);
  const CellState s = random_state(p, rng);
  const CellState out = cell_forward(p, random_vector(4, rng), s);
  for (double v : out.h.data) CHECK(v == 0.0);
  CHECK(out.c.len() == 0);
}

TEST_CASE("literal naive cell adds the input raw") {
  CellParams p = make_cell(CellKind::naive(Activation::Tanh, true), 2, 2);
  CHECK(p.w.rows == 2);
  CHECK(p.w.cols == 2);  // m^2 + m parameters
  CHECK(param_count(p) == 6);
  p.w.at(0, 0) = 0.3;
  p.w.at(0, 1) = -0.2;
  p.w.at(1, 0) = 0.1;
  p.w.at(1, 1) = 0.4;
  p.b = Vector{0.05, -0.1};
  CellState s;
  s.h = Vector{0.5, -0.25};
  const Vector x{0.2, 0.6};
  const CellState out = cell_forward(p, x, s);
  for (std::size_t k = 0; k < 2; ++k) {
    const double z = p.w.at(k, 0) * s.h[0] + p.w.at(k, 1) * s.h[1] + p.b[k] + x[k];
    CHECK(out.h[k] == std::tanh(z));
  }
  CHECK_THROWS_AS(make_cell(CellKind::naive(Activation::Tanh, true), 3, 2), ConfigError);
}

TEST_CASE("forward is deterministic bit for bit") {
  Rng rng(21);
  const CellParams p = random_cell(CellKind::lstm(), 5, 4, rng);
  const CellState s = random_state(p, rng);
  const Vector x = random_vector(5, rng);
  const CellState a = cell_forward(p, x, s);
  const CellState b = cell_forward(p, x, s);
  CHECK(a.h.data == b.h.data);
  CHECK(a.c.data == b.c.data);
}

TEST_CASE("LSTM gate values stay in their open intervals") {
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const CellParams p = random_cell(CellKind::lstm(), 3, 4, rng, 1.5);
    const CellState s = random_state(p, rng);
    CellTape tape;
    cell_forward(p, random_vector(3, rng, -2, 2), s, &tape);
    for (std::size_t k = 0; k < 4; ++k) {
      CHECK(tape.gate_i[k] > 0.0);
      CHECK(tape.gate_i[k] < 1.0);
      CHECK(tape.gate_f[k] > 0.0);
      CHECK(tape.gate_f[k] < 1.0);
      CHECK(tape.gate_o[k] > 0.0);
      CHECK(tape.gate_o[k] < 1.0);
      CHECK(tape.gate_g[k] > -1.0);
      CHECK(tape.gate_g[k] < 1.0);
    }
  }
}

TEST_CASE("zero upstream gradient gives zero everywhere") {
  Rng rng(41);
  const CellParams p = random_cell(CellKind::lstm(), 3, 2, rng);
  const CellState s = random_state(p, rng);
  CellTape tape;
  cell_forward(p, random_vector(3, rng), s, &tape);

  CellGrads acc = zero_grads(p);
  Vector gx;
  CellState gs;
  const Vector zero_h(2), zero_c(2);
  cell_backward(p, tape, zero_h, &zero_c, acc, gx, gs);
  for (double v : acc.dw.data) CHECK(v == 0.0);
  for (double v : acc.db.data) CHECK(v == 0.0);
  for (double v : gx.data) CHECK(v == 0.0);
  for (double v : gs.h.data) CHECK(v == 0.0);
  for (double v : gs.c.data) CHECK(v == 0.0);
}

TEST_CASE("backward is linear in the upstream gradient") {
  Rng rng(43);
  const CellParams p = random_cell(CellKind::lstm(), 4, 3, rng);
  const CellState s = random_state(p, rng);
  CellTape tape;
  cell_forward(p, random_vector(4, rng), s, &tape);

  const Vector g1 = random_vector(3, rng), g2 = random_vector(3, rng);
  const Vector c1 = random_vector(3, rng), c2 = random_vector(3, rng);
  const double a = 0.7, b = -1.3;

  auto run = [&](const Vector& gh, const Vector& gc) {
    CellGrads acc = zero_grads(p);
    Vector gx;
    CellState gs;
    cell_backward(p, tape, gh, &gc, acc, gx, gs);
    std::vector<double> flat(acc.dw.data);
    flat.insert(flat.end(), acc.db.data.begin(), acc.db.data.end());
    flat.insert(flat.end(), gx.data.begin(), gx.data.end());
    flat.insert(flat.end(), gs.h.data.begin(), gs.h.data.end());
    flat.insert(flat.end(), gs.c.data.begin(), gs.c.data.end());
    return flat;
  };

  Vector gh(3), gc(3);
  for (std::size_t k = 0; k < 3; ++k) {
    gh[k] = a * g1[k] + b * g2[k];
    gc[k] = a * c1[k] + b * c2[k];
  }
  const auto combo = run(gh, gc);
  const auto r1 = run(g1, c1);
  const auto r2 = run(g2, c2);
  for (std::size_t i = 0; i < combo.size(); ++i)
    CHECK(std::abs(combo[i] - (a * r1[i] + b * r2[i])) <= 1e-10);
}

TEST_CASE("finite differences confirm every partial derivative") {
  Rng rng(53);
  int configs = 0;
  for (const CellKind kind :
       {CellKind::lstm(), CellKind::naive(Activation::Tanh), CellKind::naive(Activation::Sigmoid),
        CellKind::naive(Activation::Relu)}) {
    for (int trial = 0; trial < 8; ++trial) {
      const std::size_t input = 1 + rng.next_u64() % 4;
      const std::size_t hidden = 1 + rng.next_u64() % 4;
      CellParams p = random_cell(kind, input, hidden, rng);
      CellState s = random_state(p, rng);
      Vector x = random_vector(input, rng);
      const Vector gh = random_vector(hidden, rng);
      const Vector gc =
          kind.type == CellType::Lstm ? random_vector(hidden, rng) : Vector(hidden);

      CellTape tape;
      cell_forward(p, x, s, &tape);
      CellGrads acc = zero_grads(p);
      Vector gx;
      CellState gs;
      cell_backward(p, tape, gh, kind.type == CellType::Lstm ? &gc : nullptr, acc, gx, gs);

      const auto objective = [&] { return step_objective(p, x, s, gh, gc); };
      for (std::size_t i = 0; i < p.w.data.size(); ++i)
        CHECK(grads_match(acc.dw.data[i], central_diff(p.w.data[i], objective)));
      for (std::size_t i = 0; i < p.b.data.size(); ++i)
        CHECK(grads_match(acc.db.data[i], central_diff(p.b.data[i], objective)));
      for (std::size_t i = 0; i < x.data.size(); ++i)
        CHECK(grads_match(gx.data[i], central_diff(x.data[i], objective)));
      for (std::size_t i = 0; i < s.h.data.size(); ++i)
        CHECK(grads_match(gs.h.data[i], central_diff(s.h.data[i], objective)));
      for (std::size_t i = 0; i < s.c.data.size(); ++i)
        CHECK(grads_match(gs.c.data[i], central_diff(s.c.data[i], objective)));
      ++configs;
    }
  }
  CHECK(configs == 32);
}

TEST_CASE("naive RNN with identity-like recurrence passes finite differences") {
  Rng rng(59);
  CellParams p = make_cell(CellKind::naive(Activation::Tanh), 3, 3);
  for (std::size_t k = 0; k < 3; ++k) p.w.at(k, 3 + k) = 1.0;  // W_h = I
  for (double& v : p.b.data) v = rng.uniform(-0.05, 0.05);
  CellState s = zero_state(p);
  for (double& v : s.h.data) v = rng.uniform(-0.1, 0.1);
  Vector x = random_vector(3, rng, -0.1, 0.1);
  const Vector gh = random_vector(3, rng);
  const Vector gc;

  CellTape tape;
  cell_forward(p, x, s, &tape);
  CellGrads acc = zero_grads(p);
  Vector gx;
  CellState gs;
  cell_backward(p, tape, gh, nullptr, acc, gx, gs);

  const auto objective = [&] { return step_objective(p, x, s, gh, Vector(3)); };
  for (std::size_t i = 0; i < p.w.data.size(); ++i)
    CHECK(grads_match(acc.dw.data[i], central_diff(p.w.data[i], objective)));
  for (std::size_t i = 0; i < x.data.size(); ++i)
    CHECK(grads_match(gx.data[i], central_diff(x.data[i], objective)));
}

TEST_CASE("recurrent mask scales both forward use and state gradient") {
  Rng rng(61);
  const CellParams p = random_cell(CellKind::lstm(), 2, 3, rng);
  CellState s = random_state(p, rng);
  Vector x = random_vector(2, rng);
  const Vector mask{2.0, 0.0, 2.0};  // inverted dropout at rate 0.5
  const Vector gh = random_vector(3, rng);
  const Vector gc = random_vector(3, rng);

  // forward equals running the cell on a pre-masked h
  CellState masked_in = s;
  for (std::size_t k = 0; k < 3; ++k) masked_in.h[k] *= mask[k];
  const CellState direct = cell_forward(p, x, masked_in);
  CellTape tape;
  const CellState via_mask = cell_forward(p, x, s, &tape, mask.span());
  CHECK(via_mask.h.data == direct.h.data);
  CHECK(via_mask.c.data == direct.c.data);

  CellGrads acc = zero_grads(p);
  Vector gx;
  CellState gs;
  cell_backward(p, tape, gh, &gc, acc, gx, gs, mask.span());
  const auto objective = [&] { return step_objective(p, x, s, gh, gc, mask.span()); };
  for (std::size_t i = 0; i < s.h.data.size(); ++i)
    CHECK(grads_match(gs.h.data[i], central_diff(s.h.data[i], objective)));
  CHECK(gs.h[1] == 0.0);  // dropped coordinate gets no gradient
}

TEST_CASE("mismatched shapes are rejected") {
  Rng rng(67);
  const CellParams p = random_cell(CellKind::lstm(), 3, 2, rng);
  const CellState s = random_state(p, rng);
  CHECK_THROWS_AS(cell_forward(p, Vector{1, 2}, s), ShapeError);

  CellState bad = s;
  bad.c = Vector(5);
  CHECK_THROWS_AS(cell_forward(p, Vector{1, 2, 3}, bad), ShapeError);

  CellTape tape;
  cell_forward(p, Vector{1, 2, 3}, s, &tape);
  CellGrads wrong = zero_grads(random_cell(CellKind::lstm(), 4, 2, rng));
  Vector gx;
  CellState gs;
  const Vector gh(2), gc(2);
  CHECK_THROWS_AS(cell_backward(p, tape, gh, &gc, wrong, gx, gs), UsageError);
}
