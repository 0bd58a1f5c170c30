#include "samctr/model.hpp"

#include <fstream>

#include "samctr/errors.hpp"

namespace samctr {

void ModelSpec::validate() const {
  if (schema.n() < 1) throw ConfigError("model: schema has no fields");
  if (d < 1) throw ConfigError("model: d must be >= 1");
  if (fi.layers < 1) throw ConfigError("model: layer count must be >= 1");
  if (!st) {
    const bool reduces = aggregation.kind != AggregationKind::kConcat || fi.arity == Arity::kPerField;
    const bool scalar = !fi.vector_valued() || d == 1;
    const bool single = aggregation.kind != AggregationKind::kConcat || schema.n() == 1;
    if (!(reduces && scalar && single)) {
      throw ConfigError("model '" + name + "': without a space transform the aggregate must be scalar");
    }
  }
}

nlohmann::json ModelSpec::to_json() const {
  nlohmann::json j = {{"name", name},
                      {"schema", schema.to_json()},
                      {"d", d},
                      {"fi", fi.to_json()},
                      {"aggregation", aggregation.to_json()},
                      {"include_linear", include_linear},
                      {"include_bias", include_bias}};
  j["st"] = st ? st->to_json() : nlohmann::json(nullptr);
  return j;
}

ModelSpec ModelSpec::from_json(const nlohmann::json& j) {
  ModelSpec s;
  try {
    s.name = j.at("name").get<std::string>();
    s.schema = FieldSchema::from_json(j.at("schema"));
    s.d = j.at("d").get<std::size_t>();
    s.fi = j.contains("fi") ? FIConfig::from_json(j.at("fi")) : fi_catalog(s.name);
    s.aggregation = AggregationSpec::from_json(j.value("aggregation", nlohmann::json::object()));
    if (j.contains("st") && !j.at("st").is_null()) s.st = MLPSpec::from_json(j.at("st"));
    s.include_linear = j.value("include_linear", false);
    s.include_bias = j.value("include_bias", false);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model spec: ") + e.what());
  }
  s.validate();
  return s;
}

ModelSpec make_model_spec(const std::string& name, const FieldSchema& schema, std::size_t d,
                          const ZooOptions& options) {
  ModelSpec s;
  s.name = name;
  s.schema = schema;
  s.d = name == "LR" ? 1 : d;
  s.fi = fi_catalog(name);
  const MLPSpec affine{};
  const MLPSpec deep{options.hidden, options.dropout, false};

  if (name == "LR") {
    s.aggregation = {AggregationKind::kSum, 1.0};
    s.include_bias = true;
  } else if (name == "FM") {
    s.aggregation = {AggregationKind::kSum, 0.5};
    s.include_linear = true;
    s.include_bias = true;
  } else if (name == "FFM" || name == "FwFM") {
    s.aggregation = {AggregationKind::kSum, 0.5};
    s.include_bias = true;
  } else if (name == "AFM") {
    s.aggregation = {AggregationKind::kSum, 1.0};
    s.include_bias = true;
  } else if (name == "IPNN" || name == "DeepFM-deep") {
    s.aggregation = {AggregationKind::kConcat, 1.0};
    s.st = deep;
  } else if (name == "SAM3_A" || name == "SAM3_E") {
    s.aggregation = {AggregationKind::kFieldCombination, 1.0};
    s.st = affine;
    s.fi.layers = options.layers;
  } else {
    // DCN, CIN2, AutoInt, SAM1, SAM2_*
    s.aggregation = {AggregationKind::kConcat, 1.0};
    s.st = affine;
    if (name == "AutoInt") s.fi.layers = options.layers;
  }
  s.validate();
  return s;
}

Model Model::build(const ModelSpec& spec, std::uint64_t seed) {
  spec.validate();
  Model m(spec);
  const std::size_t n = spec.schema.n();
  if (spec.fi.field_aware) {
    m.aware_ = FieldAwareEmbeddingTable::create(m.store_, spec.schema, spec.d, "emb", m.inits_);
  } else {
    m.embeddings_ = EmbeddingTable::create(m.store_, spec.schema, spec.d, "emb", m.inits_);
  }
  if (spec.include_linear) {
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t vocab = spec.schema.field(i).vocab_size;
      const SlotId id = m.store_.add("linear." + std::to_string(i), DenseMatrix(vocab, 1));
      m.inits_.push_back({id, SlotInit::Kind::kXavier, vocab, 1, 0.0});
      m.linear_.push_back(id);
    }
  }
  if (spec.include_bias) {
    m.bias_ = m.store_.add("bias", DenseMatrix(1, 1));
    m.inits_.push_back({*m.bias_, SlotInit::Kind::kZero, 1, 1, 0.0});
  }
  m.fi_.emplace(spec.fi, n, spec.d, m.store_, m.inits_);
  m.al_.emplace(spec.aggregation, m.fi_->output_count(), m.fi_->output_width(), m.store_, m.inits_);
  if (spec.st) m.st_.emplace(*spec.st, m.al_->output_width(), m.store_, m.inits_);
  m.reinitialize(seed);
  return m;
}

void Model::reinitialize(std::uint64_t seed) { init_parameters(store_, inits_, seed); }

Var Model::logits(Tape& tape, const Batch& batch, bool training, std::mt19937_64& rng) {
  return logits(tape, batch, training, rng, nullptr);
}

Var Model::logits(Tape& tape, const Batch& batch, bool training, std::mt19937_64& rng,
                  InteractionOutput* fi_out) {
  if (batch.index.size() != spec_.schema.n()) {
    throw ContractError("model: batch has " + std::to_string(batch.index.size()) +
                        " fields, schema " + std::to_string(spec_.schema.n()));
  }
  const LatentFields f = aware_ ? lookup(tape, store_, *aware_, batch)
                                : lookup(tape, store_, *embeddings_, batch);
  InteractionOutput fi = fi_->forward(tape, store_, f);
  Var y = al_->forward(tape, store_, fi.vectors);
  if (st_) y = st_->forward(tape, store_, y, training, rng);
  if (!linear_.empty()) {
    std::vector<Var> terms;
    for (std::size_t i = 0; i < linear_.size(); ++i) {
      terms.push_back(tape.gather_rows(store_, linear_[i], batch.index[i]));
    }
    y = tape.add(y, terms.size() == 1 ? terms[0] : tape.add_n(terms));
  }
  if (bias_) y = tape.add(y, tape.parameter(store_, *bias_));
  if (fi_out) *fi_out = std::move(fi);
  return y;
}

std::vector<double> Model::predict_logits(std::span<const EncodedRecord> records,
                                          std::size_t chunk) {
  if (chunk < 1) throw ContractError("predict_logits: chunk must be >= 1");
  std::vector<double> out;
  out.reserve(records.size());
  std::mt19937_64 unused(0);
  Tape tape;
  for (std::size_t begin = 0; begin < records.size(); begin += chunk) {
    const std::size_t count = std::min(chunk, records.size() - begin);
    const Batch batch = make_batch(records.subspan(begin, count), spec_.schema.n());
    tape.clear();
    const DenseMatrix& z = tape.value(logits(tape, batch, false, unused));
    for (std::size_t r = 0; r < count; ++r) out.push_back(z(r, 0));
  }
  return out;
}

double Model::logit(const EncodedRecord& record) {
  return predict_logits(std::span<const EncodedRecord>(&record, 1), 1).front();
}

// ---------------------------------------------------------------------------

nlohmann::json ComplexityReport::to_json() const {
  return {{"model", model},
          {"n", n},
          {"d", d},
          {"layers", layers},
          {"space", {{"EL", space_el}, {"FI", space_fi}, {"AL", space_al}, {"ST", space_st},
                     {"total", space()}}},
          {"time", {{"FI", time_fi}, {"AL", time_al}, {"ST", time_st}, {"total", time()}}},
          {"trainable_parameters", trainable}};
}

namespace {

std::size_t slot_size(const ParameterStore& store, SlotId id) {
  const DenseMatrix& m = store.slot(id).value;
  return m.rows() * m.cols();
}

// Multiply-accumulates of one FI evaluation; projections cost d^2 per vector,
// an inner-type similarity d per pair, and the scaled accumulation of a
// utility its width per pair. Residual maps are left out like their weights.
std::size_t fi_time(const InteractionLayer& fi, std::size_t n, std::size_t d) {
  const FIConfig& c = fi.config();
  if (c.field_aware) return n * (n - 1) * (d + 1);
  if (fi.sum_trick()) return 2 * d * n;
  if (c.similarity == SimilarityKind::kAfmAttention) {
    const std::size_t t = c.attention_width == 0 ? d : c.attention_width;
    return n * (n - 1) * (2 * d + d * t + t + 1);
  }
  std::size_t projections = 0;
  if (c.similarity == SimilarityKind::kProjectedInner) projections += 2;
  if (c.similarity == SimilarityKind::kKernelInner) projections += 1;
  if (c.utility == UtilityKind::kLinearMap) projections += 1;

  const bool inner_type = c.similarity == SimilarityKind::kInner ||
                          c.similarity == SimilarityKind::kProjectedInner ||
                          c.similarity == SimilarityKind::kKernelInner;
  const std::size_t width = c.vector_valued() ? d : 1;
  std::size_t per_pair = (inner_type ? d : 0) + width;
  if (c.utility == UtilityKind::kThetaInner) per_pair += d;
  if (c.similarity == SimilarityKind::kOne && c.utility == UtilityKind::kIdentity) per_pair = 0;

  std::size_t pairs = 0;
  if (c.arity == Arity::kPerPair) {
    pairs = pair_list(c.pairs, n).size();
  } else {
    for (std::size_t i = 0; i < n; ++i) pairs += neighborhood(c.neighborhood, i, n).size();
  }
  return c.layers * (projections * d * d * n + pairs * per_pair);
}

}  // namespace

ComplexityReport count_complexity(const Model& model) {
  const ModelSpec& spec = model.spec();
  const ParameterStore& store = model.store();
  const std::size_t n = spec.schema.n();
  const std::size_t d = spec.d;
  ComplexityReport r;
  r.model = spec.name;
  r.n = n;
  r.d = d;
  r.layers = spec.layers();

  r.space_el = spec.fi.field_aware ? d * n * (n - 1) : d * n;
  if (!model.linear_slots().empty()) r.space_el += n;

  for (SlotId id : model.interaction().interaction_slots()) r.space_fi += slot_size(store, id);

  const std::size_t count = model.interaction().output_count();
  const std::size_t width = model.interaction().output_width();
  const bool combination = spec.aggregation.kind == AggregationKind::kFieldCombination;
  const auto& head = model.head();

  if (head && head->spec().hidden.empty()) {
    // Affine readout; a preceding field combination folds into it.
    r.space_st = combination ? count * width : slot_size(store, head->weights().front());
    r.time_st = r.space_st;
  } else if (head) {
    for (SlotId id : head->weights()) r.space_st += slot_size(store, id);
    r.time_st = r.space_st;
    if (combination) r.space_al = count, r.time_al = count * width;
  } else {
    if (combination) r.space_al = count;
    if (spec.aggregation.kind != AggregationKind::kConcat) r.time_al = count * width;
  }
  r.time_fi = fi_time(model.interaction(), n, d);
  r.trainable = store.trainable_count();
  return r;
}

ComplexityReport count_complexity(const std::string& name, std::size_t n, std::size_t d,
                                  std::size_t layers) {
  ZooOptions options;
  options.layers = layers;
  const Model m = Model::build(make_model_spec(name, FieldSchema::uniform(n, 3), d, options), 0);
  return count_complexity(m);
}

// ---------------------------------------------------------------------------

nlohmann::json checkpoint_json(const Model& model) {
  nlohmann::json slots = nlohmann::json::array();
  for (const auto& slot : model.store()) {
    slots.push_back({{"name", slot.name},
                     {"rows", slot.value.rows()},
                     {"cols", slot.value.cols()},
                     {"values", slot.value.values()}});
  }
  return {{"format", "samctr-checkpoint-1"}, {"spec", model.spec().to_json()}, {"slots", slots}};
}

Model model_from_checkpoint(const nlohmann::json& j) {
  try {
    if (j.value("format", "") != "samctr-checkpoint-1") throw ConfigError("checkpoint: unknown format");
    Model m = Model::build(ModelSpec::from_json(j.at("spec")), 0);
    const auto& slots = j.at("slots");
    if (slots.size() != m.store().size()) throw ConfigError("checkpoint: slot count mismatch");
    for (const auto& s : slots) {
      ParameterSlot& slot = m.store().slot(s.at("name").get<std::string>());
      DenseMatrix value(s.at("rows").get<std::size_t>(), s.at("cols").get<std::size_t>(),
                        s.at("values").get<std::vector<double>>());
      if (!value.same_shape(slot.value)) throw ConfigError("checkpoint: shape mismatch for " + slot.name);
      slot.value = std::move(value);
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("checkpoint: ") + e.what());
  } catch (const ContractError& e) {
    throw ConfigError(std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint(const Model& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write checkpoint " + path);
  out << checkpoint_json(model).dump(1) << '\n';
  if (!out) throw DataError("write failed for " + path);
}

Model load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read checkpoint " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("checkpoint " + path + ": " + e.what());
  }
  return model_from_checkpoint(j);
}

}  // namespace samctr
