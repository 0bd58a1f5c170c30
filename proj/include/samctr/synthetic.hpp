#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "json.hpp"
#include "samctr/data.hpp"
#include "samctr/tensor.hpp"

namespace samctr {

enum class UtilityFamily { kLinear, kFactorization };

/// How a label is drawn from the choice model.
///   kLogistic: y ~ Bernoulli(sigmoid((H - theta) / k)).
///   kGumbelUtility: y = [H - theta + k (e1 - e0) > 0] with e0, e1 standard
///   Gumbel; the difference of two Gumbels is logistic, so both modes share
///   one label distribution.
enum class LabelMode { kLogistic, kGumbelUtility };

/// Ground truth for a discrete-choice click model. The deterministic utility
/// H(X) is either sum_i w_i[x_i] (linear) or sum_{i<j} <v_i[x_i], v_j[x_j]>
/// plus the optional linear part (factorization).
struct SyntheticSpec {
  std::vector<std::uint32_t> categories;      // per field, >= 1
  UtilityFamily family = UtilityFamily::kFactorization;
  std::vector<std::vector<double>> linear;    // [field][category]; may be empty for FM
  std::vector<DenseMatrix> embeddings;        // [field] categories x d; FM only
  double theta = 0.0;                         // expected utility
  double noise = 1.0;                         // k > 0
  std::size_t samples = 0;
  std::uint64_t seed = 0;
  LabelMode label_mode = LabelMode::kLogistic;

  std::size_t n() const noexcept { return categories.size(); }

  /// Throws DomainError on k <= 0, empty fields or inconsistent shapes.
  void validate() const;

  nlohmann::json to_json() const;
  static SyntheticSpec from_json(const nlohmann::json& j);
};

/// Draws ground-truth parameters: embeddings ~ N(0, sigma^2), and sets
/// theta to the sample median of H over `calibration` uniform records so
/// the click rate is near one half.
SyntheticSpec make_random_spec(std::size_t n, std::uint32_t categories, std::size_t d,
                               UtilityFamily family, double sigma, double noise,
                               std::size_t samples, std::uint64_t seed,
                               std::size_t calibration = 4096);

double true_utility(const SyntheticSpec& spec, std::span<const std::uint32_t> category);

/// Standard Gumbel via inverse CDF: -ln(-ln U), U ~ uniform(0, 1).
double sample_gumbel(std::mt19937_64& rng);

struct SyntheticSample {
  std::vector<std::vector<std::uint32_t>> category;  // [record][field], 0-based
  std::vector<int> labels;
  std::vector<double> oracle;  // true click probability per record
};

/// Categories are drawn uniformly per field; p = sigmoid((H - theta) / k).
SyntheticSample generate_dcm(const SyntheticSpec& spec);

/// Encoded view of a sample: category c of field i becomes row c + 2 so
/// the reserved missing/OOV rows stay unused.
FieldSchema synthetic_schema(const SyntheticSpec& spec);
std::vector<EncodedRecord> encode_sample(const SyntheticSample& sample);

/// Raw text rows with tokens "c<k>", suitable for the prepare pipeline.
std::vector<RawRecord> raw_sample(const SyntheticSample& sample);
RawLayout synthetic_layout(const SyntheticSpec& spec);

}  // namespace samctr
