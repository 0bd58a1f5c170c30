#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "samctr/data.hpp"
#include "samctr/parameter_store.hpp"
#include "samctr/tape.hpp"
#include "samctr/tensor.hpp"

namespace samctr {

/// How a slot is initialized by `init_parameters`.
struct SlotInit {
  enum class Kind { kXavier, kZero, kConstant };
  SlotId slot = 0;
  Kind kind = Kind::kXavier;
  std::size_t fan_in = 1;
  std::size_t fan_out = 1;
  double constant = 0.0;
};

/// Re-draws every listed slot from a generator seeded with `seed`, in list
/// order. Xavier slots use uniform(-a, a), a = sqrt(6 / (fan_in + fan_out)).
void init_parameters(ParameterStore& store, const std::vector<SlotInit>& inits, std::uint64_t seed);

/// Per-field lookup tables W_i (vocab_i x d), slot names "<prefix>.<i>".
struct EmbeddingTable {
  std::vector<SlotId> tables;
  std::size_t d = 0;

  static EmbeddingTable create(ParameterStore& store, const FieldSchema& schema, std::size_t d,
                               const std::string& prefix, std::vector<SlotInit>& inits);
};

/// Field-aware tables: for field i and target field t != i, a (vocab_i x d)
/// table "<prefix>.<i>.<t>" holding f_{i,F(t)}. n(n-1) tables in total.
struct FieldAwareEmbeddingTable {
  std::vector<std::vector<SlotId>> tables;  // [i][t], diagonal unused
  std::size_t d = 0;

  static FieldAwareEmbeddingTable create(ParameterStore& store, const FieldSchema& schema,
                                         std::size_t d, const std::string& prefix,
                                         std::vector<SlotInit>& inits);
};

/// Embedded features of a batch: `fields[i]` is (batch x d). For field-aware
/// lookups `aware[i][t]` holds f_{i,F(t)} and `fields` is empty.
struct LatentFields {
  std::vector<Var> fields;
  std::vector<std::vector<Var>> aware;

  std::size_t n() const noexcept { return fields.empty() ? aware.size() : fields.size(); }
  bool field_aware() const noexcept { return fields.empty() && !aware.empty(); }
};

LatentFields lookup(Tape& tape, ParameterStore& store, const EmbeddingTable& table,
                    const Batch& batch);
LatentFields lookup(Tape& tape, ParameterStore& store, const FieldAwareEmbeddingTable& table,
                    const Batch& batch);

/// Single-record lookup without a tape: row `record.index[i]` of each W_i.
std::vector<DenseVector> lookup_values(const ParameterStore& store, const EmbeddingTable& table,
                                       const EncodedRecord& record);

}  // namespace samctr
