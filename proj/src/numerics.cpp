#include "pcrnn/numerics.hpp"

#include <cmath>
#include <string>

namespace pcrnn {

double dot(const double* a, const double* b, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  double s = (s0 + s1) + (s2 + s3);
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy(double* y, double alpha, const double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void affine_into(Vector& out, const Matrix& w, const Vector& x, const Vector& b) {
  if (w.cols != x.len())
    throw ShapeError("affine: W has " + std::to_string(w.cols) + " cols but x has " +
                     std::to_string(x.len()) + " entries");
  if (w.rows != b.len())
    throw ShapeError("affine: W has " + std::to_string(w.rows) + " rows but b has " +
                     std::to_string(b.len()) + " entries");
  out.data.resize(w.rows);
  for (std::size_t i = 0; i < w.rows; ++i) out[i] = dot(w.row(i), x.ptr(), w.cols) + b[i];
}

Vector affine(const Matrix& w, const Vector& x, const Vector& b) {
  Vector out;
  affine_into(out, w, x, b);
  return out;
}

void matvec_transpose_acc(Vector& out, const Matrix& w, const Vector& u) {
  if (w.rows != u.len())
    throw ShapeError("matvec_transpose: W has " + std::to_string(w.rows) + " rows but u has " +
                     std::to_string(u.len()) + " entries");
  if (out.len() != w.cols)
    throw ShapeError("matvec_transpose: out has " + std::to_string(out.len()) +
                     " entries but W has " + std::to_string(w.cols) + " cols");
  for (std::size_t i = 0; i < w.rows; ++i) axpy(out.ptr(), u[i], w.row(i), w.cols);
}

void add_outer(Matrix& a, const Vector& u, const Vector& v) {
  if (a.rows != u.len() || a.cols != v.len())
    throw ShapeError("add_outer: target is " + std::to_string(a.rows) + "x" +
                     std::to_string(a.cols) + " but factors are " + std::to_string(u.len()) +
                     " and " + std::to_string(v.len()));
  for (std::size_t i = 0; i < a.rows; ++i) axpy(a.row(i), u[i], v.ptr(), a.cols);
}

double activate_scalar(Activation kind, double x) {
  switch (kind) {
    case Activation::Sigmoid:
      // branch on sign so exp never overflows
      if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
      {
        const double e = std::exp(x);
        return e / (1.0 + e);
      }
    case Activation::Tanh:
      return std::tanh(x);
    case Activation::Relu:
      return x > 0.0 ? x : 0.0;
  }
  return 0.0;
}

// Derivative expressed through the activation output (inputs are not needed
// for sigmoid/tanh; relu uses the output's sign since y > 0 iff x > 0).
double activate_grad_from_output(Activation kind, double y) {
  switch (kind) {
    case Activation::Sigmoid:
      return y * (1.0 - y);
    case Activation::Tanh:
      return 1.0 - y * y;
    case Activation::Relu:
      return y > 0.0 ? 1.0 : 0.0;
  }
  return 0.0;
}

Vector activate(Activation kind, const Vector& v) {
  Vector out(v.len());
  for (std::size_t i = 0; i < v.len(); ++i) out[i] = activate_scalar(kind, v[i]);
  return out;
}

Vector hadamard(const Vector& a, const Vector& b) {
  if (a.len() != b.len())
    throw ShapeError("hadamard: lengths differ (" + std::to_string(a.len()) + " vs " +
                     std::to_string(b.len()) + ")");
  Vector out(a.len());
  for (std::size_t i = 0; i < a.len(); ++i) out[i] = a[i] * b[i];
  return out;
}

Vector concat(const std::vector<Vector>& parts) {
  if (parts.empty()) throw UsageError("concat: empty part list");
  std::size_t total = 0;
  for (const auto& p : parts) total += p.len();
  Vector out(total);
  std::size_t off = 0;
  for (const auto& p : parts) {
    std::copy(p.data.begin(), p.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(off));
    off += p.len();
  }
  return out;
}

Vector slice(const Vector& v, std::size_t offset, std::size_t len) {
  if (offset + len > v.len())
    throw ShapeError("slice: [" + std::to_string(offset) + ", " + std::to_string(offset + len) +
                     ") exceeds length " + std::to_string(v.len()));
  Vector out(len);
  std::copy(v.data.begin() + static_cast<std::ptrdiff_t>(offset),
            v.data.begin() + static_cast<std::ptrdiff_t>(offset + len), out.data.begin());
  return out;
}

double global_norm(const std::vector<std::span<const double>>& tensors) {
  // One running accumulator in global element order, so the result is
  // bit-identical no matter how the same values are split into tensors.
  double total = 0.0;
  for (const auto& t : tensors)
    for (double v : t) total += v * v;
  return std::sqrt(total);
}

bool all_finite(std::span<const double> values) {
  for (double v : values)
    if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace pcrnn
