#include "samctr/equivalence.hpp"

#include <cmath>
#include <limits>
#include <random>

#include "samctr/errors.hpp"

namespace samctr {

nlohmann::json EquivalenceReport::to_json() const {
  return {{"source", source},         {"target", target},
          {"construction", construction}, {"samples", samples},
          {"exhaustive", exhaustive}, {"max_abs_diff", max_abs_diff},
          {"tolerance", tolerance},   {"within_tolerance", within_tolerance()},
          {"expect_difference", expect_difference}, {"ok", ok()}};
}

void randomize_parameters(Model& model, std::uint64_t seed, double sigma) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, sigma);
  for (auto& slot : model.store()) {
    for (double& x : slot.value.span()) x = normal(rng);
  }
}

namespace {

void require_model(const Model& m, const char* name) {
  if (m.spec().name != name) {
    throw ContractError(std::string("expected a ") + name + " model, got " + m.spec().name);
  }
}

DenseMatrix& value(Model& m, const std::string& slot) { return m.store().value(slot); }
const DenseMatrix& value(const Model& m, const std::string& slot) { return m.store().value(slot); }

void copy_slot(const Model& from, const std::string& src, Model& to, const std::string& dst) {
  const DenseMatrix& v = value(from, src);
  DenseMatrix& w = value(to, dst);
  if (!v.same_shape(w)) throw ShapeError("copy " + src + " -> " + dst + ": shape mismatch");
  w = v;
}

void zero_all(Model& m) {
  for (auto& slot : m.store()) slot.value.fill(0.0);
}

std::string emb(std::size_t i) { return "emb." + std::to_string(i); }

// Source bias (if any) into the target readout bias.
void move_bias(const Model& from, Model& to) {
  if (from.bias_slot()) value(to, "st.b.0")(0, 0) = value(from, "bias")(0, 0);
}

void copy_linear(const Model& from, Model& to) {
  for (std::size_t i = 0; i < from.linear_slots().size(); ++i) {
    const std::string name = "linear." + std::to_string(i);
    copy_slot(from, name, to, name);
  }
}

}  // namespace

Model lift_lr_to_sam1(const Model& lr, std::size_t d) {
  require_model(lr, "LR");
  const FieldSchema& schema = lr.spec().schema;
  const std::size_t n = schema.n();
  Model sam1 = Model::build(make_model_spec("SAM1", schema, d), 0);
  zero_all(sam1);
  for (std::size_t i = 0; i < n; ++i) {
    const DenseMatrix& w = value(lr, emb(i));
    DenseMatrix& e = value(sam1, emb(i));
    for (std::size_t c = 0; c < w.rows(); ++c) e(c, 0) = w(c, 0);
  }
  DenseMatrix& head = value(sam1, "st.W.0");
  for (std::size_t i = 0; i < n; ++i) head(i * d, 0) = 1.0;
  move_bias(lr, sam1);
  return sam1;
}

Model reduce_sam1_to_lr(const Model& sam1) {
  require_model(sam1, "SAM1");
  const FieldSchema& schema = sam1.spec().schema;
  const std::size_t n = schema.n();
  const std::size_t d = sam1.spec().d;
  Model lr = Model::build(make_model_spec("LR", schema, 1), 0);
  zero_all(lr);
  const DenseMatrix& head = value(sam1, "st.W.0");
  for (std::size_t i = 0; i < n; ++i) {
    const DenseMatrix& e = value(sam1, emb(i));
    DenseMatrix& w = value(lr, emb(i));
    for (std::size_t c = 0; c < e.rows(); ++c) {
      double acc = 0.0;
      for (std::size_t k = 0; k < d; ++k) acc += e(c, k) * head(i * d + k, 0);
      w(c, 0) = acc;
    }
  }
  value(lr, "bias")(0, 0) = value(sam1, "st.b.0")(0, 0);
  return lr;
}

Model lift_fm_to_sam2a(const Model& fm, PairSet pairs) {
  require_model(fm, "FM");
  const FieldSchema& schema = fm.spec().schema;
  const std::size_t n = schema.n();
  const std::size_t d = fm.spec().d;
  ModelSpec spec = make_model_spec("SAM2_A", schema, d);
  spec.fi.pairs = pairs;
  spec.include_linear = fm.spec().include_linear;
  Model sam2 = Model::build(spec, 0);
  zero_all(sam2);
  for (std::size_t i = 0; i < n; ++i) copy_slot(fm, emb(i), sam2, emb(i));
  copy_linear(fm, sam2);
  move_bias(fm, sam2);

  const double fm_scale = fm.spec().aggregation.scale;  // 1/2 for the classical FM
  const auto list = pair_list(pairs, n);
  DenseMatrix& w = value(sam2, "fi.W.0");
  DenseMatrix& head = value(sam2, "st.W.0");
  for (std::size_t p = 0; p < list.size(); ++p) {
    const auto [i, j] = list[p];
    double c = 0.0;
    if (i != j) c = pairs == PairSet::kUpperTriangle ? 2.0 * fm_scale : fm_scale;
    w(p, 0) = c;
    head(p * d, 0) = 1.0;
  }
  return sam2;
}

Model lift_sam2a_to_sam3a(const Model& sam2a) {
  require_model(sam2a, "SAM2_A");
  const FieldSchema& schema = sam2a.spec().schema;
  const std::size_t n = schema.n();
  const std::size_t d = sam2a.spec().d;
  ModelSpec spec = make_model_spec("SAM3_A", schema, d);
  spec.fi.softmax = false;
  spec.fi.layers = 1;
  spec.include_linear = sam2a.spec().include_linear;
  spec.include_bias = sam2a.spec().include_bias;
  Model sam3 = Model::build(spec, 0);
  zero_all(sam3);
  for (std::size_t i = 0; i < n; ++i) copy_slot(sam2a, emb(i), sam3, emb(i));
  copy_linear(sam2a, sam3);
  if (spec.include_bias) copy_slot(sam2a, "bias", sam3, "bias");
  value(sam3, "st.b.0")(0, 0) = value(sam2a, "st.b.0")(0, 0);
  value(sam3, "fi.K.0") = DenseMatrix::identity(d);
  value(sam3, "al.w").fill(1.0);
  value(sam3, "st.W.0")(0, 0) = 1.0;

  const auto list = pair_list(sam2a.spec().fi.pairs, n);
  const DenseMatrix& w2 = value(sam2a, "fi.W.0");
  const DenseMatrix& h2 = value(sam2a, "st.W.0");
  DenseMatrix& w3 = value(sam3, "fi.W.0");
  for (std::size_t p = 0; p < list.size(); ++p) {
    const auto [i, j] = list[p];
    double coef = 0.0;
    for (std::size_t k = 0; k < d; ++k) coef += h2(p * d + k, 0) * w2(p, k);
    w3(i * n + j, 0) = coef;
  }
  return sam3;
}

std::size_t record_combinations(const FieldSchema& schema) {
  std::size_t total = 1;
  for (std::uint32_t v : schema.vocab_sizes()) {
    if (v != 0 && total > std::numeric_limits<std::size_t>::max() / v) {
      return std::numeric_limits<std::size_t>::max();
    }
    total *= v;
  }
  return total;
}

EquivalenceReport verify_equivalence(Model& a, Model& b, std::size_t samples, double tolerance,
                                     std::uint64_t seed) {
  const FieldSchema& schema = a.spec().schema;
  if (!schema.same_shape(b.spec().schema)) {
    throw ContractError("verify_equivalence: " + a.spec().name + " and " + b.spec().name +
                        " use different schemas");
  }
  const std::vector<std::uint32_t> sizes = schema.vocab_sizes();
  const std::size_t combos = record_combinations(schema);
  std::vector<EncodedRecord> records;
  EquivalenceReport report;
  report.source = a.spec().name;
  report.target = b.spec().name;
  report.tolerance = tolerance;
  if (combos <= kExhaustiveLimit) {
    report.exhaustive = true;
    records.reserve(combos);
    for (std::size_t code = 0; code < combos; ++code) {
      EncodedRecord r;
      std::size_t rest = code;
      for (std::uint32_t v : sizes) {
        r.index.push_back(static_cast<std::uint32_t>(rest % v));
        rest /= v;
      }
      records.push_back(std::move(r));
    }
  } else {
    if (samples < 1) throw ContractError("verify_equivalence: need at least one sample");
    std::mt19937_64 rng(seed);
    records.reserve(samples);
    for (std::size_t s = 0; s < samples; ++s) {
      EncodedRecord r;
      for (std::uint32_t v : sizes) {
        r.index.push_back(std::uniform_int_distribution<std::uint32_t>(0, v - 1)(rng));
      }
      records.push_back(std::move(r));
    }
  }
  const std::vector<double> la = a.predict_logits(records);
  const std::vector<double> lb = b.predict_logits(records);
  for (std::size_t k = 0; k < records.size(); ++k) {
    const double diff = std::abs(la[k] - lb[k]);
    if (!std::isfinite(diff)) throw NumericError("verify_equivalence: non-finite logit");
    report.max_abs_diff = std::max(report.max_abs_diff, diff);
  }
  report.samples = records.size();
  return report;
}

}  // namespace samctr
