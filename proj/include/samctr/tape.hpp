#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "samctr/parameter_store.hpp"
#include "samctr/tensor.hpp"

namespace samctr {

/// Handle to a node on a Tape. Only meaningful for the tape that created it.
struct Var {
  std::size_t id = 0;
};

/// Reverse-mode record of one forward pass over whole-matrix primitives.
///
/// Rows are batch records by convention. Binary elementwise ops broadcast a
/// dimension of extent 1 against the other operand. Parameter leaves and
/// row gathers read from a ParameterStore that must outlive the tape;
/// `backward` accumulates (never overwrites) into that store's gradient
/// buffers, visiting nodes once each in reverse creation order.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(DenseMatrix value);
  Var parameter(ParameterStore& store, SlotId slot);
  /// Selects rows of a table slot; gradients scatter into selected rows only.
  /// Throws ContractError for an out-of-range row.
  Var gather_rows(ParameterStore& store, SlotId slot, std::span<const std::uint32_t> rows);

  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, double c);
  /// Elementwise sum of same-shape nodes.
  Var add_n(std::span<const Var> terms);
  /// Per-row inner product of two (rows × d) nodes, giving (rows × 1).
  Var row_dot(Var a, Var b);
  /// Per-row sum over columns, giving (rows × 1).
  Var row_sum(Var a);
  Var relu(Var a);
  Var sigmoid(Var a);
  Var softmax_rows(Var a);
  Var concat_cols(std::span<const Var> parts);
  Var slice_cols(Var a, std::size_t begin, std::size_t count);
  Var slice_rows(Var a, std::size_t begin, std::size_t count);
  Var sum_all(Var a);
  Var sum_squares(Var a);
  /// Inverted dropout: kept entries are scaled by 1/(1-rate).
  Var dropout(Var a, double rate, std::mt19937_64& rng);
  /// Mean binary log-loss of sigmoid(logits) against labels, with the
  /// probability clamped to [1e-12, 1-1e-12] before the log.
  Var logloss(Var logits, std::span<const double> labels);

  const DenseMatrix& value(Var v) const { return nodes_.at(v.id).value; }
  /// Valid after `backward`; zero-shaped before.
  const DenseMatrix& grad(Var v) const { return nodes_.at(v.id).grad; }
  double scalar(Var v) const;

  /// Throws ContractError unless `root` is 1×1.
  void backward(Var root);

  std::size_t size() const noexcept { return nodes_.size(); }
  void clear() { nodes_.clear(); }

 private:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;
  struct Node {
    DenseMatrix value;
    DenseMatrix grad;
    BackwardFn backward;
  };

  Var push(DenseMatrix value, BackwardFn fn);
  DenseMatrix& g(std::size_t id) { return nodes_[id].grad; }
  const DenseMatrix& v(std::size_t id) const { return nodes_[id].value; }

  std::vector<Node> nodes_;
};

inline constexpr double kProbabilityClamp = 1e-12;

}  // namespace samctr
