#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace samctr {

/// Fixed-length real vector. Length is set at construction and never changes.
class DenseVector {
 public:
  DenseVector() = default;
  explicit DenseVector(std::size_t n, double fill = 0.0) : values_(n, fill) {}
  DenseVector(std::initializer_list<double> init) : values_(init) {}
  explicit DenseVector(std::vector<double> values) : values_(std::move(values)) {}

  std::size_t size() const noexcept { return values_.size(); }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }
  std::span<double> span() noexcept { return values_; }
  std::span<const double> span() const noexcept { return values_; }
  const std::vector<double>& values() const noexcept { return values_; }

  bool operator==(const DenseVector&) const = default;

 private:
  std::vector<double> values_;
};

/// Row-major real matrix with an immutable shape.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), values_(rows * cols, fill) {}
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  static DenseMatrix identity(std::size_t n);
  static DenseMatrix row(const DenseVector& v);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return values_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  std::span<double> row_span(std::size_t r) { return {values_.data() + r * cols_, cols_}; }
  std::span<const double> row_span(std::size_t r) const {
    return {values_.data() + r * cols_, cols_};
  }
  DenseVector row_vector(std::size_t r) const;

  std::span<double> span() noexcept { return values_; }
  std::span<const double> span() const noexcept { return values_; }
  const std::vector<double>& values() const noexcept { return values_; }

  void fill(double v);
  bool same_shape(const DenseMatrix& o) const noexcept {
    return rows_ == o.rows_ && cols_ == o.cols_;
  }
  bool operator==(const DenseMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

// Pure-value primitives. All throw ShapeError on length mismatch.

double inner(const DenseVector& u, const DenseVector& v);
DenseVector hadamard(const DenseVector& u, const DenseVector& v);
DenseVector add(const DenseVector& u, const DenseVector& v);
DenseVector scale(const DenseVector& u, double c);

/// Row-vector convention: returns x·M, so M has shape (x.size() × out).
DenseVector vec_mat(const DenseVector& x, const DenseMatrix& m);

/// Max-subtracted softmax. Throws DomainError on an empty list.
std::vector<double> softmax_weights(std::span<const double> scores);

double relu(double x) noexcept;
/// Branches on sign so exp never overflows; finite for every finite input.
double sigmoid(double x) noexcept;

/// Throws NumericError if any entry is NaN or infinite.
void require_finite(std::span<const double> values, const char* what);

}  // namespace samctr
