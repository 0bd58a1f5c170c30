#pragma once

#include <cstddef>
#include <span>

#include "json.hpp"

namespace samctr {

struct MetricsReport {
  double auc = 0.0;
  double logloss = 0.0;
  std::size_t positives = 0;
  std::size_t negatives = 0;

  nlohmann::json to_json() const;
};

/// Mann-Whitney AUC with average ranks for tied scores:
/// P(s+ > s-) + 0.5 P(s+ = s-). Throws UndefinedMetricError unless both
/// classes are present.
double auc(std::span<const double> scores, std::span<const int> labels);

/// Mean binary cross-entropy with probabilities clamped to [1e-12, 1-1e-12].
/// Throws DomainError on an empty batch.
double logloss(std::span<const double> probs, std::span<const int> labels);

/// Scores are logits; probabilities are sigmoid(logit).
MetricsReport evaluate_logits(std::span<const double> logits, std::span<const int> labels);

}  // namespace samctr
