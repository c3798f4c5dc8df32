#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

#include "pcrnn/errors.hpp"

namespace pcrnn {

struct Vector {
  std::vector<double> data;

  Vector() = default;
  explicit Vector(std::size_t n, double fill = 0.0) : data(n, fill) {}
  Vector(std::initializer_list<double> values) : data(values) {}

  std::size_t len() const { return data.size(); }
  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }
  double* ptr() { return data.data(); }
  const double* ptr() const { return data.data(); }
  std::span<const double> span() const { return {data.data(), data.size()}; }
  std::span<double> span() { return {data.data(), data.size()}; }
  void fill(double v) { std::fill(data.begin(), data.end(), v); }
};

// Dense row-major matrix of doubles.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
  double* row(std::size_t i) { return data.data() + i * cols; }
  const double* row(std::size_t i) const { return data.data() + i * cols; }
  std::span<const double> span() const { return {data.data(), data.size()}; }
  std::span<double> span() { return {data.data(), data.size()}; }
  void fill(double v) { std::fill(data.begin(), data.end(), v); }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m.at(i, i) = 1.0;
    return m;
  }
};

enum class Activation { Sigmoid, Tanh, Relu };

// Dot product with a fixed summation order: four independent partial sums
// over stride-4 lanes, combined as (s0+s1)+(s2+s3), then the tail appended.
// Every matrix-vector path in the library goes through this kernel, so
// batched and per-vector execution produce identical bits.
double dot(const double* a, const double* b, std::size_t n);

// y[i] += alpha * x[i]
void axpy(double* y, double alpha, const double* x, std::size_t n);

// out = W x + b  (shape-checked; out[i] = dot(W row i, x) + b[i])
Vector affine(const Matrix& w, const Vector& x, const Vector& b);
void affine_into(Vector& out, const Matrix& w, const Vector& x, const Vector& b);

// out += W^T u  (accumulates; used for input gradients)
void matvec_transpose_acc(Vector& out, const Matrix& w, const Vector& u);

// a += u v^T  (outer-product accumulate; used for weight gradients)
void add_outer(Matrix& a, const Vector& u, const Vector& v);

double activate_scalar(Activation kind, double x);
double activate_grad_from_output(Activation kind, double y);
Vector activate(Activation kind, const Vector& v);

Vector hadamard(const Vector& a, const Vector& b);

Vector concat(const std::vector<Vector>& parts);
Vector slice(const Vector& v, std::size_t offset, std::size_t len);

// sqrt of the sum of squares over every entry of every tensor in the list;
// invariant under how the same values are partitioned into tensors.
double global_norm(const std::vector<std::span<const double>>& tensors);

bool all_finite(std::span<const double> values);

}  // namespace pcrnn
