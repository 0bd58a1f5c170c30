#include "samctr/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "samctr/errors.hpp"

namespace samctr {

namespace {

void require_same_length(const DenseVector& u, const DenseVector& v, const char* op) {
  if (u.size() != v.size()) {
    throw ShapeError(std::string(op) + ": length mismatch " + std::to_string(u.size()) +
                     " vs " + std::to_string(v.size()));
  }
}

}  // namespace

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (values_.size() != rows_ * cols_) {
    throw ShapeError("DenseMatrix: " + std::to_string(values_.size()) +
                     " values for shape " + std::to_string(rows_) + "x" +
                     std::to_string(cols_));
  }
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
  DenseMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

DenseMatrix DenseMatrix::row(const DenseVector& v) {
  return DenseMatrix(1, v.size(), v.values());
}

DenseVector DenseMatrix::row_vector(std::size_t r) const {
  auto s = row_span(r);
  return DenseVector(std::vector<double>(s.begin(), s.end()));
}

void DenseMatrix::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

double inner(const DenseVector& u, const DenseVector& v) {
  require_same_length(u, v, "inner");
  double acc = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) acc += u[k] * v[k];
  return acc;
}

DenseVector hadamard(const DenseVector& u, const DenseVector& v) {
  require_same_length(u, v, "hadamard");
  DenseVector out(u.size());
  for (std::size_t k = 0; k < u.size(); ++k) out[k] = u[k] * v[k];
  return out;
}

DenseVector add(const DenseVector& u, const DenseVector& v) {
  require_same_length(u, v, "add");
  DenseVector out(u.size());
  for (std::size_t k = 0; k < u.size(); ++k) out[k] = u[k] + v[k];
  return out;
}

DenseVector scale(const DenseVector& u, double c) {
  DenseVector out(u.size());
  for (std::size_t k = 0; k < u.size(); ++k) out[k] = c * u[k];
  return out;
}

DenseVector vec_mat(const DenseVector& x, const DenseMatrix& m) {
  if (x.size() != m.rows()) {
    throw ShapeError("vec_mat: vector length " + std::to_string(x.size()) +
                     " vs matrix rows " + std::to_string(m.rows()));
  }
  DenseVector out(m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) out[c] += x[r] * m(r, c);
  }
  return out;
}

std::vector<double> softmax_weights(std::span<const double> scores) {
  if (scores.empty()) throw DomainError("softmax_weights: empty score list");
  require_finite(scores, "softmax_weights");
  const double top = *std::max_element(scores.begin(), scores.end());
  std::vector<double> w(scores.size());
  double total = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    w[i] = std::exp(scores[i] - top);
    total += w[i];
  }
  for (double& x : w) x /= total;
  return w;
}

double relu(double x) noexcept { return x > 0.0 ? x : 0.0; }

double sigmoid(double x) noexcept {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void require_finite(std::span<const double> values, const char* what) {
  for (double v : values) {
    if (!std::isfinite(v)) throw NumericError(std::string(what) + ": non-finite value");
  }
}

}  // namespace samctr
