#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "samctr/tensor.hpp"

namespace samctr {

using SlotId = std::size_t;

struct ParameterSlot {
  std::string name;
  DenseMatrix value;
  DenseMatrix grad;  // same shape as value; zero for frozen slots
  bool trainable = true;
};

/// Named parameter slots in insertion order. Every slot carries a gradient
/// buffer of identical shape; iteration order is the order of `add`.
class ParameterStore {
 public:
  ParameterStore() = default;
  explicit ParameterStore(std::uint64_t seed) : rng_(seed) {}

  /// Throws ContractError if the name is already taken.
  SlotId add(const std::string& name, DenseMatrix value, bool trainable = true);

  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  /// Throws ContractError for an unknown name.
  SlotId id(const std::string& name) const;

  ParameterSlot& slot(SlotId id) { return slots_.at(id); }
  const ParameterSlot& slot(SlotId id) const { return slots_.at(id); }
  ParameterSlot& slot(const std::string& name) { return slots_.at(id(name)); }
  const ParameterSlot& slot(const std::string& name) const { return slots_.at(id(name)); }

  DenseMatrix& value(const std::string& name) { return slot(name).value; }
  const DenseMatrix& value(const std::string& name) const { return slot(name).value; }

  std::size_t size() const noexcept { return slots_.size(); }
  auto begin() noexcept { return slots_.begin(); }
  auto end() noexcept { return slots_.end(); }
  auto begin() const noexcept { return slots_.begin(); }
  auto end() const noexcept { return slots_.end(); }

  void zero_grad();
  std::size_t trainable_count() const;
  std::size_t total_count() const;

  /// Flattened views in slot order (trainable slots only).
  std::vector<double> flat_values() const;
  std::vector<double> flat_grads() const;

  std::mt19937_64& rng() noexcept { return rng_; }

  /// Shapes and values equal, slot by slot.
  bool same_values(const ParameterStore& other) const;

 private:
  std::vector<ParameterSlot> slots_;
  std::unordered_map<std::string, SlotId> index_;
  std::mt19937_64 rng_{0};
};

/// Xavier/Glorot uniform bound sqrt(6 / (fan_in + fan_out)).
double xavier_bound(std::size_t fan_in, std::size_t fan_out);

/// Fills `m` with uniform(-a, a) draws, a = xavier_bound(fan_in, fan_out).
void fill_xavier(DenseMatrix& m, std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng);

/// Sum of squares over trainable slots times lambda; adds 2*lambda*theta to
/// each trainable gradient buffer. Returns the penalty value.
double apply_l2(ParameterStore& store, double lambda);

}  // namespace samctr
