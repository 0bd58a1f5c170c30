#include "samctr/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

#include "samctr/errors.hpp"
#include "samctr/metrics.hpp"
#include "samctr/tape.hpp"

namespace samctr {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("train: learning rate must be > 0");
  if (batch_size < 1) throw ConfigError("train: batch size must be >= 1");
  if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
  if (!(l2 >= 0.0) || !std::isfinite(l2)) throw ConfigError("train: l2 must be >= 0");
  if (patience < 1) throw ConfigError("train: patience must be >= 1");
}

nlohmann::json TrainConfig::to_json() const {
  return {{"learning_rate", learning_rate}, {"batch_size", batch_size}, {"epochs", epochs},
          {"l2", l2},                       {"patience", patience},     {"seed", seed}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  try {
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.epochs = j.value("epochs", c.epochs);
    c.l2 = j.value("l2", c.l2);
    c.patience = j.value("patience", c.patience);
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("train config: ") + e.what());
  }
  c.validate();
  return c;
}

std::string TrainHistory::to_csv() const {
  std::string out = "epoch,train_loss,val_loss,val_auc\n";
  char line[128];
  for (const auto& e : epochs) {
    std::snprintf(line, sizeof line, "%zu,%.17g,%.17g,%.17g\n", e.epoch, e.train_loss, e.val_loss,
                  e.val_auc);
    out += line;
  }
  return out;
}

nlohmann::json TrainHistory::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& e : epochs) {
    rows.push_back({{"epoch", e.epoch},
                    {"train_loss", e.train_loss},
                    {"val_loss", e.val_loss},
                    {"val_auc", e.val_auc}});
  }
  return {{"epochs", rows}, {"best_epoch", best_epoch}, {"stopped_early", stopped_early}};
}

AdamState AdamState::for_store(const ParameterStore& store) {
  AdamState s;
  for (const auto& slot : store) {
    s.m.emplace_back(slot.value.rows(), slot.value.cols());
    s.v.emplace_back(slot.value.rows(), slot.value.cols());
  }
  return s;
}

void adam_step(ParameterStore& store, AdamState& state, std::size_t t, double learning_rate) {
  if (t < 1) throw ContractError("adam_step: step index must be >= 1");
  if (state.m.size() != store.size() || state.v.size() != store.size()) {
    throw ContractError("adam_step: state does not match the store");
  }
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(t));
  std::size_t k = 0;
  for (auto& slot : store) {
    DenseMatrix& m = state.m[k];
    DenseMatrix& v = state.v[k];
    ++k;
    if (!slot.trainable) continue;
    if (!m.same_shape(slot.value) || !v.same_shape(slot.value)) {
      throw ContractError("adam_step: moment shape mismatch for " + slot.name);
    }
    for (std::size_t e = 0; e < slot.value.size(); ++e) {
      const double g = slot.grad[e];
      m[e] = state.beta1 * m[e] + (1.0 - state.beta1) * g;
      v[e] = state.beta2 * v[e] + (1.0 - state.beta2) * g * g;
      const double m_hat = m[e] / c1;
      const double v_hat = v[e] / c2;
      slot.value[e] -= learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
  }
}

namespace {

std::vector<DenseMatrix> snapshot(const ParameterStore& store) {
  std::vector<DenseMatrix> out;
  for (const auto& slot : store) out.push_back(slot.value);
  return out;
}

void restore(ParameterStore& store, const std::vector<DenseMatrix>& values) {
  std::size_t k = 0;
  for (auto& slot : store) slot.value = values[k++];
}

std::vector<int> labels_of(std::span<const EncodedRecord> records) {
  std::vector<int> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.label);
  return out;
}

}  // namespace

TrainHistory train(Model& model, std::span<const EncodedRecord> train_set,
                   std::span<const EncodedRecord> validation_set, const TrainConfig& config,
                   const EpochCallback& on_epoch) {
  config.validate();
  if (train_set.empty()) throw ContractError("train: empty training set");
  if (validation_set.empty()) throw ContractError("train: empty validation set");
  const FieldSchema& schema = model.spec().schema;
  for (const auto& r : train_set) schema.validate(r);
  for (const auto& r : validation_set) schema.validate(r);

  ParameterStore& store = model.store();
  AdamState adam = AdamState::for_store(store);
  std::mt19937_64 shuffle_rng(config.seed);
  std::mt19937_64 dropout_rng(config.seed ^ 0xd1b54a32d192ed03ULL);
  const std::vector<int> val_labels = labels_of(validation_set);

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<const EncodedRecord*> rows;
  rows.reserve(config.batch_size);

  TrainHistory history;
  std::vector<DenseMatrix> best = snapshot(store);
  double best_auc = -1.0;
  std::size_t since_best = 0;
  std::size_t step = 0;
  Tape tape;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size, ++batch_index) {
      const std::size_t count = std::min(config.batch_size, order.size() - begin);
      rows.clear();
      for (std::size_t k = 0; k < count; ++k) rows.push_back(&train_set[order[begin + k]]);
      const Batch batch = make_batch(std::span<const EncodedRecord* const>(rows), schema.n());

      tape.clear();
      const Var loss = tape.logloss(model.logits(tape, batch, true, dropout_rng), batch.labels);
      store.zero_grad();
      tape.backward(loss);
      const double data_loss = tape.scalar(loss);
      const double penalty = apply_l2(store, config.l2);
      if (!std::isfinite(data_loss + penalty)) {
        throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(batch_index));
      }
      adam_step(store, adam, ++step, config.learning_rate);
      loss_sum += data_loss * static_cast<double>(count);
    }

    const std::vector<double> logits = model.predict_logits(validation_set);
    const MetricsReport val = evaluate_logits(logits, val_labels);
    const EpochRecord record{epoch, loss_sum / static_cast<double>(train_set.size()), val.logloss,
                             val.auc};
    history.epochs.push_back(record);

    if (val.auc > best_auc) {
      best_auc = val.auc;
      history.best_epoch = epoch;
      best = snapshot(store);
      since_best = 0;
    } else if (++since_best >= config.patience) {
      history.stopped_early = epoch < config.epochs;
      break;
    }
    if (on_epoch && !on_epoch(record)) break;
  }
  restore(store, best);
  return history;
}

}  // namespace samctr
