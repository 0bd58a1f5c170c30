#include "samctr/embedding.hpp"

#include <random>

#include "samctr/errors.hpp"

namespace samctr {

void init_parameters(ParameterStore& store, const std::vector<SlotInit>& inits,
                     std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (const auto& init : inits) {
    DenseMatrix& m = store.slot(init.slot).value;
    switch (init.kind) {
      case SlotInit::Kind::kXavier:
        fill_xavier(m, init.fan_in, init.fan_out, rng);
        break;
      case SlotInit::Kind::kZero:
        m.fill(0.0);
        break;
      case SlotInit::Kind::kConstant:
        m.fill(init.constant);
        break;
    }
  }
}

EmbeddingTable EmbeddingTable::create(ParameterStore& store, const FieldSchema& schema,
                                      std::size_t d, const std::string& prefix,
                                      std::vector<SlotInit>& inits) {
  if (d < 1) throw ConfigError("embedding dimension must be >= 1");
  EmbeddingTable t;
  t.d = d;
  for (std::size_t i = 0; i < schema.n(); ++i) {
    const std::size_t vocab = schema.field(i).vocab_size;
    const SlotId id = store.add(prefix + "." + std::to_string(i), DenseMatrix(vocab, d));
    inits.push_back({id, SlotInit::Kind::kXavier, vocab, d, 0.0});
    t.tables.push_back(id);
  }
  return t;
}

FieldAwareEmbeddingTable FieldAwareEmbeddingTable::create(ParameterStore& store,
                                                          const FieldSchema& schema,
                                                          std::size_t d,
                                                          const std::string& prefix,
                                                          std::vector<SlotInit>& inits) {
  if (d < 1) throw ConfigError("embedding dimension must be >= 1");
  FieldAwareEmbeddingTable t;
  t.d = d;
  const std::size_t n = schema.n();
  t.tables.assign(n, std::vector<SlotId>(n, 0));
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t vocab = schema.field(i).vocab_size;
    for (std::size_t target = 0; target < n; ++target) {
      if (target == i) continue;
      const SlotId id = store.add(prefix + "." + std::to_string(i) + "." + std::to_string(target),
                                  DenseMatrix(vocab, d));
      inits.push_back({id, SlotInit::Kind::kXavier, vocab, d, 0.0});
      t.tables[i][target] = id;
    }
  }
  return t;
}

LatentFields lookup(Tape& tape, ParameterStore& store, const EmbeddingTable& table,
                    const Batch& batch) {
  if (batch.index.size() != table.tables.size()) {
    throw ContractError("lookup: batch has " + std::to_string(batch.index.size()) +
                        " fields, table " + std::to_string(table.tables.size()));
  }
  LatentFields out;
  out.fields.reserve(table.tables.size());
  for (std::size_t i = 0; i < table.tables.size(); ++i) {
    out.fields.push_back(tape.gather_rows(store, table.tables[i], batch.index[i]));
  }
  return out;
}

LatentFields lookup(Tape& tape, ParameterStore& store, const FieldAwareEmbeddingTable& table,
                    const Batch& batch) {
  const std::size_t n = table.tables.size();
  if (batch.index.size() != n) throw ContractError("lookup: field count mismatch");
  LatentFields out;
  out.aware.assign(n, std::vector<Var>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t target = 0; target < n; ++target) {
      if (target == i) continue;
      out.aware[i][target] = tape.gather_rows(store, table.tables[i][target], batch.index[i]);
    }
  }
  return out;
}

std::vector<DenseVector> lookup_values(const ParameterStore& store, const EmbeddingTable& table,
                                       const EncodedRecord& record) {
  if (record.index.size() != table.tables.size()) {
    throw ContractError("lookup_values: field count mismatch");
  }
  std::vector<DenseVector> out;
  for (std::size_t i = 0; i < table.tables.size(); ++i) {
    const DenseMatrix& w = store.slot(table.tables[i]).value;
    if (record.index[i] >= w.rows()) throw ContractError("lookup_values: index out of range");
    out.push_back(w.row_vector(record.index[i]));
  }
  return out;
}

}  // namespace samctr
