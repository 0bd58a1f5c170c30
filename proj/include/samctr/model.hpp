#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "samctr/aggregation.hpp"
#include "samctr/data.hpp"
#include "samctr/embedding.hpp"
#include "samctr/interaction.hpp"
#include "samctr/parameter_store.hpp"
#include "samctr/tape.hpp"

namespace samctr {

/// EL -> FI -> AL -> ST, plus the optional first-order term and global bias.
struct ModelSpec {
  std::string name;
  FieldSchema schema;
  std::size_t d = 4;
  FIConfig fi;
  AggregationSpec aggregation;
  std::optional<MLPSpec> st;  // none: the aggregated output is the logit
  bool include_linear = false;
  bool include_bias = false;

  std::size_t layers() const noexcept { return fi.layers; }

  /// Throws ConfigError when the pieces do not compose to a scalar logit.
  void validate() const;

  nlohmann::json to_json() const;
  static ModelSpec from_json(const nlohmann::json& j);
};

struct ZooOptions {
  std::size_t layers = 1;                                 // SAM3 and AutoInt
  std::vector<std::size_t> hidden = {32, 32, 32};        // IPNN and DeepFM-deep
  double dropout = 0.5;                                   // hidden activations only
};

/// Default spec for a catalog model. LR forces d = 1. Throws CatalogError for
/// unknown names.
ModelSpec make_model_spec(const std::string& name, const FieldSchema& schema, std::size_t d,
                          const ZooOptions& options = {});

class Model {
 public:
  /// Allocates every slot and initializes from `seed`. Throws ConfigError for
  /// an inconsistent spec.
  static Model build(const ModelSpec& spec, std::uint64_t seed);

  /// (batch x 1) logits. `rng` drives dropout when `training` is set.
  Var logits(Tape& tape, const Batch& batch, bool training, std::mt19937_64& rng);
  /// Same, but also returns the FI output for inspection.
  Var logits(Tape& tape, const Batch& batch, bool training, std::mt19937_64& rng,
             InteractionOutput* fi_out);

  /// Inference logits (no dropout), processed in chunks.
  std::vector<double> predict_logits(std::span<const EncodedRecord> records,
                                     std::size_t chunk = 4096);
  double logit(const EncodedRecord& record);

  /// Re-draws all parameters from `seed` exactly as `build` would.
  void reinitialize(std::uint64_t seed);

  const ModelSpec& spec() const noexcept { return spec_; }
  ParameterStore& store() noexcept { return store_; }
  const ParameterStore& store() const noexcept { return store_; }

  const std::optional<EmbeddingTable>& embeddings() const noexcept { return embeddings_; }
  const std::optional<FieldAwareEmbeddingTable>& field_aware() const noexcept { return aware_; }
  const std::vector<SlotId>& linear_slots() const noexcept { return linear_; }
  std::optional<SlotId> bias_slot() const noexcept { return bias_; }
  const InteractionLayer& interaction() const { return *fi_; }
  const AggregationLayer& aggregation() const { return *al_; }
  const std::optional<Mlp>& head() const noexcept { return st_; }

 private:
  explicit Model(ModelSpec spec) : spec_(std::move(spec)) {}

  ModelSpec spec_;
  ParameterStore store_;
  std::vector<SlotInit> inits_;
  std::optional<EmbeddingTable> embeddings_;
  std::optional<FieldAwareEmbeddingTable> aware_;
  std::vector<SlotId> linear_;
  std::optional<SlotId> bias_;
  std::optional<InteractionLayer> fi_;
  std::optional<AggregationLayer> al_;
  std::optional<Mlp> st_;
};

/// Parameter and operation counts by component, under the bias-free
/// convention: embeddings count d per field (vocabulary multiplicity
/// ignored), biases and residual maps are left out, and field-combination
/// weights are folded into the readout they feed, which is then counted as
/// one coefficient per FI output entry.
struct ComplexityReport {
  std::string model;
  std::size_t n = 0, d = 0, layers = 0;
  std::size_t space_el = 0, space_fi = 0, space_al = 0, space_st = 0;
  std::size_t time_fi = 0, time_al = 0, time_st = 0;
  std::size_t trainable = 0;  // exact count in the store

  std::size_t space() const noexcept { return space_el + space_fi + space_al + space_st; }
  std::size_t time() const noexcept { return time_fi + time_al + time_st; }
  nlohmann::json to_json() const;
};

ComplexityReport count_complexity(const Model& model);
/// Builds the default spec on a uniform schema and counts it.
ComplexityReport count_complexity(const std::string& name, std::size_t n, std::size_t d,
                                  std::size_t layers);

/// Checkpoint: spec plus every slot value, JSON. Doubles round-trip exactly.
nlohmann::json checkpoint_json(const Model& model);
Model model_from_checkpoint(const nlohmann::json& j);
void save_checkpoint(const Model& model, const std::string& path);
Model load_checkpoint(const std::string& path);

}  // namespace samctr
