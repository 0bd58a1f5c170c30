#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "samctr/embedding.hpp"
#include "samctr/parameter_store.hpp"
#include "samctr/tape.hpp"
#include "samctr/tensor.hpp"

namespace samctr {

// Feature interaction:
//   b(f_i, v) = S(f_i, v) * U(f_i, v)
//   B(f_i)    = sum_{v in V_i} b(f_i, v)
// with an optional softmax over the scores of V_i. Linear maps use the
// row-vector convention throughout: "K v" is computed as v * K.

enum class SimilarityKind {
  kOne,             // 1
  kConstant,        // w
  kInner,           // <f_i, v>
  kProjectedInner,  // <Q f_i, K v>
  kKernelInner,     // <f_i, K v>
  kAfmAttention,    // a_ij * <f_i, v>_P, attention softmax over all pairs
};

enum class UtilityKind {
  kOne,              // scalar 1
  kIdentity,         // v
  kFieldScalar,      // w_i * v (cross-network reduction)
  kFieldPairWeight,  // scalar w_{F(i),F(j)}, one per unordered field pair
  kThetaInner,       // scalar <theta_i, theta_j>
  kPairScalar,       // scalar w_ij, one per ordered pair
  kVectorWeight,     // W_ij in R^d
  kHadamard,         // f_i (.) v
  kLinearMap,        // V v
};

enum class NeighborhoodKind { kSelfOnly, kAllOthers, kAll, kOrderedPairs };
enum class Arity { kPerField, kPerPair };
enum class PairSet { kAllOrdered, kUpperTriangle };
enum class HadamardReading { kNeighbor, kLiteralSelf };

struct FIConfig {
  SimilarityKind similarity = SimilarityKind::kOne;
  bool softmax = false;
  UtilityKind utility = UtilityKind::kIdentity;
  NeighborhoodKind neighborhood = NeighborhoodKind::kSelfOnly;
  Arity arity = Arity::kPerField;
  bool field_aware = false;
  std::size_t layers = 1;
  bool residual = false;  // per-layer linear map of the layer input added to the output
  PairSet pairs = PairSet::kAllOrdered;
  HadamardReading hadamard = HadamardReading::kNeighbor;
  std::size_t attention_width = 0;  // AFM; 0 means d
  double constant = 1.0;            // kConstant similarity

  /// True when each output vector has length d (vector utilities).
  bool vector_valued() const noexcept;

  nlohmann::json to_json() const;
  static FIConfig from_json(const nlohmann::json& j);
  bool operator==(const FIConfig&) const = default;
};

/// Names accepted by `fi_catalog`, in catalog order.
const std::vector<std::string>& catalog_models();

/// The (S, U, V) row for a model. Throws CatalogError for unknown names.
FIConfig fi_catalog(const std::string& model_name);

std::string to_string(SimilarityKind k);
std::string to_string(UtilityKind k);
std::string to_string(NeighborhoodKind k);

/// Neighbor field indices of target `i` among n fields. Throws DomainError
/// if the result would be empty.
std::vector<std::size_t> neighborhood(NeighborhoodKind kind, std::size_t i, std::size_t n);

/// Ordered (i, j) pairs for per-pair arity.
std::vector<std::pair<std::size_t, std::size_t>> pair_list(PairSet set, std::size_t n);

/// Index of the unordered pair {i, j}, i != j, in [0, n(n-1)/2).
std::size_t unordered_pair_index(std::size_t i, std::size_t j, std::size_t n);

// ---------------------------------------------------------------------------
// Value-level operators for one target vector. These carry their parameters
// explicitly and serve as the reference semantics for the batched layer.

struct SimilarityFn {
  SimilarityKind kind = SimilarityKind::kInner;
  double constant = 1.0;
  DenseMatrix q;  // kProjectedInner
  DenseMatrix k;  // kProjectedInner, kKernelInner
  DenseVector p;  // kAfmAttention: <f_i, v>_P = p . (f_i (.) v)
};

struct UtilityFn {
  UtilityKind kind = UtilityKind::kOne;
  double weight = 1.0;   // kFieldScalar, kFieldPairWeight, kPairScalar
  DenseVector vector;    // kVectorWeight
  DenseMatrix map;       // kLinearMap
  DenseVector theta_i;   // kThetaInner
  DenseVector theta_j;
};

double similarity_value(const SimilarityFn& s, const DenseVector& f_i, const DenseVector& v);
DenseVector utility_value(const UtilityFn& u, const DenseVector& f_i, const DenseVector& v);

/// S(f_i, v) * U(f_i, v).
DenseVector pair_interaction(const SimilarityFn& s, const UtilityFn& u, const DenseVector& f_i,
                             const DenseVector& v);

/// Sum over the neighborhood; `utilities` is parallel to `neighbors` (or a
/// single entry shared by all). With `softmax`, the similarity scores are
/// normalized jointly over the neighborhood first. Throws DomainError on an
/// empty neighborhood.
DenseVector neighborhood_interaction(const SimilarityFn& s, bool softmax,
                                     std::span<const UtilityFn> utilities,
                                     std::span<const DenseVector> neighbors,
                                     const DenseVector& f_i);

// ---------------------------------------------------------------------------
// Batched layer on a Tape.

struct InteractionOutput {
  std::vector<Var> vectors;  // per field (n) or per pair, each (batch x width)
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // per-pair arity only
  std::size_t width = 0;
  std::vector<Var> attention;  // normalized weight rows, for inspection
};

class InteractionLayer {
 public:
  /// Registers every slot the config references under "fi.*".
  InteractionLayer(const FIConfig& config, std::size_t n, std::size_t d, ParameterStore& store,
                   std::vector<SlotInit>& inits);

  InteractionOutput forward(Tape& tape, ParameterStore& store, const LatentFields& f) const;

  const FIConfig& config() const noexcept { return config_; }
  std::size_t output_count() const noexcept;
  std::size_t output_width() const noexcept;

  /// FI slots counted as interaction parameters, and the residual maps.
  std::vector<SlotId> interaction_slots() const;
  std::vector<SlotId> residual_slots() const;

  /// True when the layer evaluates the FM row through the neighbor-sum
  /// identity instead of pair by pair.
  bool sum_trick() const noexcept;

 private:
  struct LayerSlots {
    std::optional<SlotId> q, k, v, w, residual;
  };

  // Parameter leaves and projections bound for one layer of one forward pass.
  struct Bound {
    std::optional<Var> w, theta, field_scalar, pair_weight, pair_scalar, residual;
    std::vector<Var> g_q, g_k, g_v;
    std::vector<std::vector<std::optional<Var>>> inner;  // symmetric <g_i, g_j> cache
  };

  Bound bind(Tape& tape, ParameterStore& store, const LayerSlots& layer,
             std::span<const Var> g) const;
  std::optional<Var> similarity(Tape& tape, Bound& b, std::span<const Var> g, std::size_t i,
                                std::size_t j) const;
  Var utility(Tape& tape, Bound& b, std::span<const Var> g, std::size_t i, std::size_t j,
              std::size_t weight_row) const;
  InteractionOutput forward_field_aware(Tape& tape, const LatentFields& f) const;
  InteractionOutput forward_afm(Tape& tape, ParameterStore& store, std::span<const Var> f) const;

  FIConfig config_;
  std::size_t n_ = 0;
  std::size_t d_ = 0;
  std::vector<LayerSlots> layers_;
  std::optional<SlotId> field_scalar_, pair_weight_, theta_, pair_scalar_;
  std::optional<SlotId> afm_w_, afm_b_, afm_h_, afm_p_;
};

}  // namespace samctr
