#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "json.hpp"
#include "samctr/model.hpp"

namespace samctr {

struct EquivalenceReport {
  std::string source;
  std::string target;
  std::string construction;
  std::size_t samples = 0;
  bool exhaustive = false;
  double max_abs_diff = 0.0;
  double tolerance = 0.0;
  bool expect_difference = false;  // negative controls

  /// Strict: max_abs_diff < tolerance.
  bool within_tolerance() const noexcept { return max_abs_diff < tolerance; }
  /// Within tolerance, or outside it for a negative control.
  bool ok() const noexcept { return expect_difference ? !within_tolerance() : within_tolerance(); }
  nlohmann::json to_json() const;
};

/// Schemas with at most this many records are enumerated exhaustively.
inline constexpr std::size_t kExhaustiveLimit = 1024;

/// Overwrites every slot with N(0, sigma^2) draws (biases included), so
/// constructions are exercised away from the initializer's structure.
void randomize_parameters(Model& model, std::uint64_t seed, double sigma = 0.5);

/// SAM1 reproducing an LR: each scalar weight goes to coordinate 0 of its
/// embedding and the readout picks coordinate 0 of every field block.
Model lift_lr_to_sam1(const Model& lr, std::size_t d);

/// LR reproducing a SAM1: w_{i,c} = <emb_i[c], head block i>.
Model reduce_sam1_to_lr(const Model& sam1);

/// SAM2_A reproducing an FM. Embeddings, first-order term and bias are
/// copied; W_ij = c_ij e_0 with a readout of e_0 per pair, c_ij = 1/2 off the
/// diagonal and 0 on it (or 1 per pair with the upper-triangle pair set).
Model lift_fm_to_sam2a(const Model& fm, PairSet pairs = PairSet::kAllOrdered);

/// One-layer SAM3_A in raw-similarity mode reproducing a SAM2_A: K = I, the
/// residual map is zero, field-combination weights are 1 and W'_ij carries
/// the SAM2_A readout coefficient <h_ij, W_ij> on coordinate 0.
Model lift_sam2a_to_sam3a(const Model& sam2a);

/// Max |logit_a - logit_b| over all records of the shared schema when there
/// are at most kExhaustiveLimit of them, otherwise over `samples` uniform
/// draws. Throws ContractError when the schemas differ.
EquivalenceReport verify_equivalence(Model& a, Model& b, std::size_t samples, double tolerance,
                                     std::uint64_t seed = 0);

/// Number of distinct records of a schema, saturating at SIZE_MAX.
std::size_t record_combinations(const FieldSchema& schema);

}  // namespace samctr
