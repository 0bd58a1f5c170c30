#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "samctr/equivalence.hpp"
#include "samctr/errors.hpp"
#include "samctr/metrics.hpp"
#include "samctr/synthetic.hpp"
#include "samctr/training.hpp"
#include "support/oracles.hpp"

using namespace samctr;

namespace {

struct Splits {
  FieldSchema schema;
  std::vector<EncodedRecord> train, validation;
};

Splits synthetic(UtilityFamily family, double noise, std::size_t samples, std::uint64_t seed,
                 double sigma = 1.0) {
  const auto spec = make_random_spec(4, 5, 3, family, sigma, noise, samples, seed);
  const auto sample = generate_dcm(spec);
  const auto parts = split(encode_sample(sample), {0.8, 0.1, 0.1}, seed);
  return {synthetic_schema(spec), parts.train, parts.validation};
}

double batch_loss(Model& m, const Batch& b, double lambda) {
  Tape t;
  std::mt19937_64 rng(0);
  double loss = t.scalar(t.logloss(m.logits(t, b, false, rng), b.labels));
  for (const auto& slot : m.store())
    if (slot.trainable)
      for (double v : slot.value.values()) loss += lambda * v * v;
  return loss;
}

}  // namespace

TEST(Adam, ZeroGradientLeavesParameters) {
  ParameterStore s;
  s.add("w", DenseMatrix(2, 2, {1, -2, 3, 0.5}));
  const ParameterStore before = s;
  AdamState st = AdamState::for_store(s);
  for (std::size_t t = 1; t <= 5; ++t) adam_step(s, st, t, 0.1);
  EXPECT_TRUE(s.same_values(before));
}

TEST(Adam, FirstStepIsSignTimesRate) {
  ParameterStore s;
  const SlotId w = s.add("w", DenseMatrix(1, 3, {0, 0, 0}));
  s.slot(w).grad = DenseMatrix(1, 3, {2.5, -1e-3, 40});
  AdamState st = AdamState::for_store(s);
  adam_step(s, st, 1, 0.01);
  // m_hat = g, v_hat = g^2: step = -lr g / (|g| + eps).
  EXPECT_NEAR(s.slot(w).value[0], -0.01, 1e-9);
  EXPECT_NEAR(s.slot(w).value[1], 0.01, 1e-7);
  EXPECT_NEAR(s.slot(w).value[2], -0.01, 1e-9);
}

TEST(Adam, ConstantGradientStepTendsToRate) {
  ParameterStore s;
  const SlotId w = s.add("w", DenseMatrix(1, 1));
  AdamState st = AdamState::for_store(s);
  double prev = 0, step = 0;
  for (std::size_t t = 1; t <= 2000; ++t) {
    s.slot(w).grad[0] = 0.37;
    adam_step(s, st, t, 0.001);
    step = prev - s.slot(w).value[0];
    prev = s.slot(w).value[0];
  }
  EXPECT_NEAR(step, 0.001, 1e-9);
}

TEST(Adam, Contracts) {
  ParameterStore s;
  s.add("w", DenseMatrix(1, 1));
  AdamState st = AdamState::for_store(s);
  EXPECT_THROW(adam_step(s, st, 0, 0.1), ContractError);
  ParameterStore other;
  other.add("w", DenseMatrix(2, 1));
  EXPECT_THROW(adam_step(other, st, 1, 0.1), ContractError);
}

TEST(TrainConfig, Validation) {
  TrainConfig c;
  EXPECT_NO_THROW(c.validate());
  for (auto mutate : std::vector<std::function<void(TrainConfig&)>>{
           [](TrainConfig& x) { x.learning_rate = 0; }, [](TrainConfig& x) { x.batch_size = 0; },
           [](TrainConfig& x) { x.epochs = 0; }, [](TrainConfig& x) { x.patience = 0; },
           [](TrainConfig& x) { x.l2 = -1; }}) {
    TrainConfig bad;
    mutate(bad);
    EXPECT_THROW(bad.validate(), ConfigError);
  }
  c.learning_rate = 0.25;
  c.seed = 42;
  const auto back = TrainConfig::from_json(c.to_json());
  EXPECT_EQ(back.learning_rate, 0.25);
  EXPECT_EQ(back.seed, 42u);
}

// One small Adam step lowers the regularized batch loss for every model.
TEST(Training, SmallStepDecreasesLoss) {
  const FieldSchema schema = FieldSchema::uniform(4, 5);
  const auto records = oracle::random_records(schema, 32, 3);
  const Batch batch = make_batch(records, schema.n());
  const double lambda = 1e-3;
  for (const auto& name : catalog_models()) {
    Model m = Model::build(make_model_spec(name, schema, 3), 7);
    m.store().zero_grad();
    const double before = batch_loss(m, batch, lambda);
    Tape t;
    std::mt19937_64 rng(0);
    t.backward(t.logloss(m.logits(t, batch, false, rng), batch.labels));
    apply_l2(m.store(), lambda);
    AdamState st = AdamState::for_store(m.store());
    adam_step(m.store(), st, 1, 1e-5);
    EXPECT_LT(batch_loss(m, batch, lambda), before) << name;
  }
}

TEST(Training, DropoutOffLossIsForwardLogloss) {
  const FieldSchema schema = FieldSchema::uniform(3, 4);
  const auto records = oracle::random_records(schema, 16, 1);
  Model m = Model::build(make_model_spec("IPNN", schema, 3), 2);
  const Batch b = make_batch(records, schema.n());
  Tape t;
  std::mt19937_64 rng(0);
  const double tape_loss = t.scalar(t.logloss(m.logits(t, b, false, rng), b.labels));
  std::vector<double> p;
  std::vector<int> y;
  for (const auto& r : records) {
    p.push_back(sigmoid(m.logit(r)));
    y.push_back(r.label);
  }
  EXPECT_NEAR(tape_loss, logloss(p, y), 1e-14);
}

TEST(Training, SeparableLrReachesLowLossMonotonically) {
  const Splits s = synthetic(UtilityFamily::kLinear, 0.01, 4000, 21, 1.0);
  Model m = Model::build(make_model_spec("LR", s.schema, 1), 1);
  TrainConfig c;
  c.learning_rate = 0.05;
  c.batch_size = 64;
  c.epochs = 40;
  c.l2 = 0.0;
  c.patience = 40;
  const auto h = train(m, s.train, s.validation, c);
  for (std::size_t e = 1; e < h.epochs.size(); ++e) {
    EXPECT_EQ(h.epochs[e].epoch, e + 1);
    EXPECT_LE(h.epochs[e].train_loss, h.epochs[e - 1].train_loss) << "epoch " << e + 1;
  }
  EXPECT_LT(h.epochs.back().train_loss, 0.1);
}

TEST(Training, Sam1SeparableValidationAuc) {
  const Splits s = synthetic(UtilityFamily::kLinear, 0.05, 4000, 22, 1.0);
  Model m = Model::build(make_model_spec("SAM1", s.schema, 4), 1);
  TrainConfig c;
  c.learning_rate = 0.01;
  c.batch_size = 64;
  c.epochs = 15;
  const auto h = train(m, s.train, s.validation, c);
  EXPECT_GT(h.epochs[h.best_epoch - 1].val_auc, 0.95);
}

TEST(Training, HugeL2DrivesLossToLn2) {
  const Splits s = synthetic(UtilityFamily::kFactorization, 0.5, 2000, 23);
  Model m = Model::build(make_model_spec("FM", s.schema, 3), 1);
  TrainConfig c;
  c.l2 = 1e6;
  c.learning_rate = 0.003;
  c.epochs = 40;
  c.patience = 40;
  c.batch_size = 64;
  // The best-AUC restore may pick an early epoch; the limit shows in the
  // last epoch's losses.
  const auto h = train(m, s.train, s.validation, c);
  EXPECT_NEAR(h.epochs.back().train_loss, std::numbers::ln2, 1e-4);
  EXPECT_NEAR(h.epochs.back().val_loss, std::numbers::ln2, 1e-4);
  EXPECT_LT(h.epochs.back().train_loss, h.epochs.front().train_loss + 1e-12);
}

TEST(Training, DeterministicHistoryAndBestRestored) {
  const Splits s = synthetic(UtilityFamily::kFactorization, 0.5, 3000, 24);
  TrainConfig c;
  c.epochs = 6;
  c.learning_rate = 0.01;
  c.batch_size = 128;
  c.seed = 99;
  auto run = [&] {
    Model m = Model::build(make_model_spec("DeepFM-deep", s.schema, 3), 5);
    const auto h = train(m, s.train, s.validation, c);
    return std::make_pair(h, m.predict_logits(s.validation));
  };
  const auto [h1, z1] = run();
  const auto [h2, z2] = run();
  EXPECT_EQ(h1.to_csv(), h2.to_csv());
  EXPECT_EQ(z1, z2);
  // The restored parameters score the best epoch's validation AUC.
  std::size_t best = 0;
  for (std::size_t e = 0; e < h1.epochs.size(); ++e)
    if (h1.epochs[e].val_auc > h1.epochs[best].val_auc) best = e;
  EXPECT_EQ(h1.best_epoch, best + 1);
  std::vector<int> y;
  for (const auto& r : s.validation) y.push_back(r.label);
  EXPECT_DOUBLE_EQ(auc(z1, y), h1.epochs[best].val_auc);
  EXPECT_EQ(h1.to_csv().substr(0, 36), "epoch,train_loss,val_loss,val_auc\n1,");
}

TEST(Training, EarlyStopAfterPatience) {
  const Splits s = synthetic(UtilityFamily::kFactorization, 0.5, 2000, 25);
  Model m = Model::build(make_model_spec("SAM2_A", s.schema, 3), 1);
  TrainConfig c;
  c.epochs = 200;
  c.learning_rate = 0.05;
  c.patience = 2;
  c.batch_size = 32;
  const auto h = train(m, s.train, s.validation, c);
  ASSERT_TRUE(h.stopped_early);
  EXPECT_EQ(h.epochs.size(), h.best_epoch + 2);
}

TEST(Training, CallbackCanStop) {
  const Splits s = synthetic(UtilityFamily::kLinear, 0.5, 1000, 26);
  Model m = Model::build(make_model_spec("LR", s.schema, 1), 1);
  TrainConfig c;
  c.epochs = 10;
  const auto h = train(m, s.train, s.validation, c, [](const EpochRecord& r) { return r.epoch < 2; });
  EXPECT_EQ(h.epochs.size(), 2u);
}

TEST(Training, NonFiniteLossReported) {
  const Splits s = synthetic(UtilityFamily::kLinear, 0.5, 1000, 27);
  Model m = Model::build(make_model_spec("LR", s.schema, 1), 1);
  m.store().value("bias")(0, 0) = std::nan("");
  TrainConfig c;
  try {
    train(m, s.train, s.validation, c);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("epoch 1"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("batch"), std::string::npos) << e.what();
  }
  EXPECT_THROW(train(m, {}, s.validation, c), ContractError);
}
