#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "samctr/data.hpp"
#include "samctr/model.hpp"
#include "samctr/parameter_store.hpp"

namespace samctr {

struct TrainConfig {
  double learning_rate = 0.001;
  std::size_t batch_size = 256;
  std::size_t epochs = 10;
  double l2 = 1e-5;
  std::size_t patience = 3;  // epochs without a validation AUC gain before stopping
  std::uint64_t seed = 0;

  /// Throws ConfigError on non-positive rates, sizes or patience.
  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_auc = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;  // 1-based; 0 before any epoch
  bool stopped_early = false;

  /// "epoch,train_loss,val_loss,val_auc" with %.17g values.
  std::string to_csv() const;
  nlohmann::json to_json() const;
};

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::vector<DenseMatrix> m;
  std::vector<DenseMatrix> v;

  /// Zero moments shaped like the store's slots.
  static AdamState for_store(const ParameterStore& store);
};

/// One bias-corrected Adam update of every trainable slot from its gradient
/// buffer. Throws ContractError when t < 1 or the state does not match.
void adam_step(ParameterStore& store, AdamState& state, std::size_t t, double learning_rate);

/// Called after each epoch; returning false stops training.
using EpochCallback = std::function<bool(const EpochRecord&)>;

/// Mini-batch Adam on logloss + l2 * ||theta||^2 with per-epoch validation.
/// Restores the parameters of the best validation-AUC epoch before
/// returning. Shuffling and dropout draw from streams fixed by `config.seed`.
/// Throws NumericError (with epoch and batch) when the loss stops being
/// finite, ContractError on empty splits.
TrainHistory train(Model& model, std::span<const EncodedRecord> train_set,
                   std::span<const EncodedRecord> validation_set, const TrainConfig& config,
                   const EpochCallback& on_epoch = {});

}  // namespace samctr
