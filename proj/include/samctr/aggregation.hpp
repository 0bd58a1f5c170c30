#pragma once

#include <cstddef>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "json.hpp"
#include "samctr/embedding.hpp"
#include "samctr/parameter_store.hpp"
#include "samctr/tape.hpp"
#include "samctr/tensor.hpp"

namespace samctr {

enum class AggregationKind { kConcat, kFieldCombination, kMean, kSum };

struct AggregationSpec {
  AggregationKind kind = AggregationKind::kConcat;
  double scale = 1.0;  // applied after aggregation (FM-style halving)

  nlohmann::json to_json() const;
  static AggregationSpec from_json(const nlohmann::json& j);
  bool operator==(const AggregationSpec&) const = default;
};

/// Value-level aggregation. `weights` is used by kFieldCombination only and
/// must have one entry per vector. Throws DomainError on empty input and
/// ShapeError on mismatched lengths (concat exempt).
DenseVector aggregate(const AggregationSpec& spec, std::span<const DenseVector> vectors,
                      std::span<const double> weights = {});

/// Tape aggregation. kFieldCombination reads its weights from slot "al.w"
/// (1 x count), initialized to 1/count.
class AggregationLayer {
 public:
  AggregationLayer(const AggregationSpec& spec, std::size_t count, std::size_t width,
                   ParameterStore& store, std::vector<SlotInit>& inits);

  Var forward(Tape& tape, ParameterStore& store, std::span<const Var> vectors) const;

  std::size_t output_width() const noexcept;
  std::optional<SlotId> weights_slot() const noexcept { return weights_; }
  const AggregationSpec& spec() const noexcept { return spec_; }

 private:
  AggregationSpec spec_;
  std::size_t count_ = 0;
  std::size_t width_ = 0;
  std::optional<SlotId> weights_;
};

struct MLPSpec {
  std::vector<std::size_t> hidden;  // empty: a single affine layer
  double dropout = 0.0;             // on hidden activations, training only
  bool residual = false;            // x + F(x) on hidden layers of equal width

  nlohmann::json to_json() const;
  static MLPSpec from_json(const nlohmann::json& j);
  bool operator==(const MLPSpec&) const = default;
};

/// ReLU stack ending in an affine map to width 1. Slots "st.W.<k>" (Xavier)
/// and "st.b.<k>" (zero).
class Mlp {
 public:
  Mlp(const MLPSpec& spec, std::size_t input_width, ParameterStore& store,
      std::vector<SlotInit>& inits);

  /// (batch x input_width) -> (batch x 1).
  Var forward(Tape& tape, ParameterStore& store, Var x, bool training, std::mt19937_64& rng) const;

  const MLPSpec& spec() const noexcept { return spec_; }
  std::size_t input_width() const noexcept { return input_width_; }
  const std::vector<SlotId>& weights() const noexcept { return weights_; }
  const std::vector<SlotId>& biases() const noexcept { return biases_; }

 private:
  MLPSpec spec_;
  std::size_t input_width_ = 0;
  std::vector<SlotId> weights_;
  std::vector<SlotId> biases_;
};

}  // namespace samctr
