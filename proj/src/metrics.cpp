#include "samctr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "samctr/errors.hpp"
#include "samctr/tape.hpp"
#include "samctr/tensor.hpp"

namespace samctr {

nlohmann::json MetricsReport::to_json() const {
  return {{"auc", auc}, {"logloss", logloss}, {"positives", positives}, {"negatives", negatives}};
}

double auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw ShapeError("auc: scores and labels differ in length");
  std::size_t pos = 0;
  for (int y : labels) pos += (y != 0);
  const std::size_t neg = labels.size() - pos;
  if (pos == 0 || neg == 0) throw UndefinedMetricError("auc: needs both classes");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Twice the rank sum of positives; tied blocks share rank (lo + hi) / 2,
  // 1-based, so doubling keeps everything integral.
  double rank_sum_x2 = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i + 1;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double shared = static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] != 0) rank_sum_x2 += shared;
    }
    i = j;
  }
  const double p = static_cast<double>(pos);
  const double u_x2 = rank_sum_x2 - p * (p + 1.0);
  return u_x2 / (2.0 * p * static_cast<double>(neg));
}

double logloss(std::span<const double> probs, std::span<const int> labels) {
  if (probs.size() != labels.size()) throw ShapeError("logloss: length mismatch");
  if (probs.empty()) throw DomainError("logloss: empty batch");
  double total = 0.0;
  for (std::size_t r = 0; r < probs.size(); ++r) {
    const double p = std::clamp(probs[r], kProbabilityClamp, 1.0 - kProbabilityClamp);
    total -= labels[r] != 0 ? std::log(p) : std::log(1.0 - p);
  }
  return total / static_cast<double>(probs.size());
}

MetricsReport evaluate_logits(std::span<const double> logits, std::span<const int> labels) {
  MetricsReport m;
  std::vector<double> probs(logits.size());
  for (std::size_t r = 0; r < logits.size(); ++r) probs[r] = sigmoid(logits[r]);
  m.logloss = logloss(probs, labels);
  for (int y : labels) (y != 0 ? m.positives : m.negatives)++;
  m.auc = auc(logits, labels);
  return m;
}

}  // namespace samctr
