#include "samctr/aggregation.hpp"

#include "samctr/errors.hpp"

namespace samctr {

NLOHMANN_JSON_SERIALIZE_ENUM(AggregationKind, {
                                                  {AggregationKind::kConcat, "concat"},
                                                  {AggregationKind::kFieldCombination, "field_combination"},
                                                  {AggregationKind::kMean, "mean"},
                                                  {AggregationKind::kSum, "sum"},
                                              })

nlohmann::json AggregationSpec::to_json() const { return {{"kind", kind}, {"scale", scale}}; }

AggregationSpec AggregationSpec::from_json(const nlohmann::json& j) {
  AggregationSpec s;
  try {
    if (j.contains("kind")) {
      const std::string raw = j.at("kind").get<std::string>();
      s.kind = j.at("kind").get<AggregationKind>();
      if (nlohmann::json(s.kind).get<std::string>() != raw) {
        throw ConfigError("aggregation: unknown kind '" + raw + "'");
      }
    }
    s.scale = j.value("scale", 1.0);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("aggregation: ") + e.what());
  }
  return s;
}

DenseVector aggregate(const AggregationSpec& spec, std::span<const DenseVector> vectors,
                      std::span<const double> weights) {
  if (vectors.empty()) throw DomainError("aggregate: no vectors");
  DenseVector out;
  if (spec.kind == AggregationKind::kConcat) {
    std::vector<double> all;
    for (const auto& v : vectors) all.insert(all.end(), v.span().begin(), v.span().end());
    out = DenseVector(std::move(all));
  } else {
    const std::size_t len = vectors[0].size();
    for (const auto& v : vectors) {
      if (v.size() != len) throw ShapeError("aggregate: vectors differ in length");
    }
    if (spec.kind == AggregationKind::kFieldCombination && weights.size() != vectors.size()) {
      throw ShapeError("aggregate: " + std::to_string(weights.size()) + " weights for " +
                       std::to_string(vectors.size()) + " vectors");
    }
    out = DenseVector(len);
    for (std::size_t k = 0; k < vectors.size(); ++k) {
      const double w = spec.kind == AggregationKind::kFieldCombination ? weights[k] : 1.0;
      for (std::size_t c = 0; c < len; ++c) out[c] += w * vectors[k][c];
    }
    if (spec.kind == AggregationKind::kMean) out = scale(out, 1.0 / static_cast<double>(vectors.size()));
  }
  return spec.scale == 1.0 ? out : scale(out, spec.scale);
}

AggregationLayer::AggregationLayer(const AggregationSpec& spec, std::size_t count,
                                   std::size_t width, ParameterStore& store,
                                   std::vector<SlotInit>& inits)
    : spec_(spec), count_(count), width_(width) {
  if (count < 1 || width < 1) throw ConfigError("aggregation: empty input");
  if (spec.kind == AggregationKind::kFieldCombination) {
    weights_ = store.add("al.w", DenseMatrix(1, count));
    inits.push_back({*weights_, SlotInit::Kind::kConstant, 1, 1, 1.0 / static_cast<double>(count)});
  }
}

std::size_t AggregationLayer::output_width() const noexcept {
  return spec_.kind == AggregationKind::kConcat ? count_ * width_ : width_;
}

Var AggregationLayer::forward(Tape& tape, ParameterStore& store, std::span<const Var> vectors) const {
  if (vectors.size() != count_) {
    throw ContractError("aggregation: expected " + std::to_string(count_) + " vectors, got " +
                        std::to_string(vectors.size()));
  }
  Var out;
  switch (spec_.kind) {
    case AggregationKind::kConcat:
      out = tape.concat_cols(vectors);
      break;
    case AggregationKind::kSum:
    case AggregationKind::kMean:
      out = vectors.size() == 1 ? vectors[0] : tape.add_n(vectors);
      if (spec_.kind == AggregationKind::kMean) out = tape.scale(out, 1.0 / static_cast<double>(count_));
      break;
    case AggregationKind::kFieldCombination: {
      const Var w = tape.parameter(store, *weights_);
      std::vector<Var> terms;
      terms.reserve(count_);
      for (std::size_t k = 0; k < count_; ++k) terms.push_back(tape.mul(tape.slice_cols(w, k, 1), vectors[k]));
      out = terms.size() == 1 ? terms[0] : tape.add_n(terms);
      break;
    }
  }
  return spec_.scale == 1.0 ? out : tape.scale(out, spec_.scale);
}

nlohmann::json MLPSpec::to_json() const {
  return {{"hidden", hidden}, {"dropout", dropout}, {"residual", residual}};
}

MLPSpec MLPSpec::from_json(const nlohmann::json& j) {
  MLPSpec s;
  try {
    s.hidden = j.value("hidden", std::vector<std::size_t>{});
    s.dropout = j.value("dropout", 0.0);
    s.residual = j.value("residual", false);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("mlp: ") + e.what());
  }
  return s;
}

Mlp::Mlp(const MLPSpec& spec, std::size_t input_width, ParameterStore& store,
         std::vector<SlotInit>& inits)
    : spec_(spec), input_width_(input_width) {
  if (input_width < 1) throw ConfigError("mlp: input width must be >= 1");
  if (!(spec.dropout >= 0.0 && spec.dropout < 1.0)) throw ConfigError("mlp: dropout must be in [0, 1)");
  std::size_t in = input_width;
  std::vector<std::size_t> widths = spec.hidden;
  widths.push_back(1);
  for (std::size_t k = 0; k < widths.size(); ++k) {
    if (widths[k] < 1) throw ConfigError("mlp: layer widths must be >= 1");
    const SlotId w = store.add("st.W." + std::to_string(k), DenseMatrix(in, widths[k]));
    const SlotId b = store.add("st.b." + std::to_string(k), DenseMatrix(1, widths[k]));
    inits.push_back({w, SlotInit::Kind::kXavier, in, widths[k], 0.0});
    inits.push_back({b, SlotInit::Kind::kZero, 1, 1, 0.0});
    weights_.push_back(w);
    biases_.push_back(b);
    in = widths[k];
  }
}

Var Mlp::forward(Tape& tape, ParameterStore& store, Var x, bool training, std::mt19937_64& rng) const {
  if (tape.value(x).cols() != input_width_) {
    throw ShapeError("mlp: input width " + std::to_string(tape.value(x).cols()) + ", expected " +
                     std::to_string(input_width_));
  }
  Var h = x;
  for (std::size_t k = 0; k < weights_.size(); ++k) {
    Var y = tape.add(tape.matmul(h, tape.parameter(store, weights_[k])),
                     tape.parameter(store, biases_[k]));
    if (k + 1 == weights_.size()) return y;
    y = tape.relu(y);
    if (spec_.residual && tape.value(y).cols() == tape.value(h).cols()) y = tape.add(y, h);
    if (training && spec_.dropout > 0.0) y = tape.dropout(y, spec_.dropout, rng);
    h = y;
  }
  return h;
}

}  // namespace samctr
