#include "samctr/interaction.hpp"

#include <algorithm>

#include "samctr/errors.hpp"

namespace samctr {

NLOHMANN_JSON_SERIALIZE_ENUM(SimilarityKind, {
                                                 {SimilarityKind::kOne, "one"},
                                                 {SimilarityKind::kConstant, "constant"},
                                                 {SimilarityKind::kInner, "inner"},
                                                 {SimilarityKind::kProjectedInner, "projected_inner"},
                                                 {SimilarityKind::kKernelInner, "kernel_inner"},
                                                 {SimilarityKind::kAfmAttention, "afm_attention"},
                                             })

NLOHMANN_JSON_SERIALIZE_ENUM(UtilityKind, {
                                              {UtilityKind::kOne, "one"},
                                              {UtilityKind::kIdentity, "identity"},
                                              {UtilityKind::kFieldScalar, "field_scalar"},
                                              {UtilityKind::kFieldPairWeight, "field_pair_weight"},
                                              {UtilityKind::kThetaInner, "theta_inner"},
                                              {UtilityKind::kPairScalar, "pair_scalar"},
                                              {UtilityKind::kVectorWeight, "vector_weight"},
                                              {UtilityKind::kHadamard, "hadamard"},
                                              {UtilityKind::kLinearMap, "linear_map"},
                                          })

NLOHMANN_JSON_SERIALIZE_ENUM(NeighborhoodKind, {
                                                   {NeighborhoodKind::kSelfOnly, "self"},
                                                   {NeighborhoodKind::kAllOthers, "all_others"},
                                                   {NeighborhoodKind::kAll, "all"},
                                                   {NeighborhoodKind::kOrderedPairs, "ordered_pairs"},
                                               })

NLOHMANN_JSON_SERIALIZE_ENUM(Arity, {{Arity::kPerField, "per_field"}, {Arity::kPerPair, "per_pair"}})
NLOHMANN_JSON_SERIALIZE_ENUM(PairSet, {{PairSet::kAllOrdered, "all_ordered"},
                                       {PairSet::kUpperTriangle, "upper_triangle"}})
NLOHMANN_JSON_SERIALIZE_ENUM(HadamardReading, {{HadamardReading::kNeighbor, "neighbor"},
                                               {HadamardReading::kLiteralSelf, "literal_self"}})

namespace {

bool scalar_utility(UtilityKind u) {
  return u == UtilityKind::kOne || u == UtilityKind::kFieldPairWeight ||
         u == UtilityKind::kThetaInner || u == UtilityKind::kPairScalar;
}

template <typename E>
E enum_from(const nlohmann::json& j, const char* key, E fallback) {
  if (!j.contains(key)) return fallback;
  const std::string raw = j.at(key).get<std::string>();
  const E parsed = j.at(key).get<E>();
  // nlohmann maps unknown strings to the first enumerator; catch that.
  if (nlohmann::json(parsed).get<std::string>() != raw) {
    throw ConfigError(std::string("fi config: unknown value '") + raw + "' for " + key);
  }
  return parsed;
}

void check_same(const DenseVector& a, const DenseVector& b, const char* what) {
  if (a.size() != b.size()) {
    throw ShapeError(std::string(what) + ": length " + std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()));
  }
}

}  // namespace

bool FIConfig::vector_valued() const noexcept { return !scalar_utility(utility); }

nlohmann::json FIConfig::to_json() const {
  return {{"similarity", similarity},
          {"softmax", softmax},
          {"utility", utility},
          {"neighborhood", neighborhood},
          {"arity", arity},
          {"field_aware", field_aware},
          {"layers", layers},
          {"residual", residual},
          {"pairs", pairs},
          {"hadamard", hadamard},
          {"attention_width", attention_width},
          {"constant", constant}};
}

FIConfig FIConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("fi config must be an object");
  FIConfig c;
  try {
    c.similarity = enum_from(j, "similarity", c.similarity);
    c.utility = enum_from(j, "utility", c.utility);
    c.neighborhood = enum_from(j, "neighborhood", c.neighborhood);
    c.arity = enum_from(j, "arity", c.arity);
    c.pairs = enum_from(j, "pairs", c.pairs);
    c.hadamard = enum_from(j, "hadamard", c.hadamard);
    c.softmax = j.value("softmax", c.softmax);
    c.field_aware = j.value("field_aware", c.field_aware);
    c.layers = j.value("layers", c.layers);
    c.residual = j.value("residual", c.residual);
    c.attention_width = j.value("attention_width", c.attention_width);
    c.constant = j.value("constant", c.constant);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("fi config: ") + e.what());
  }
  return c;
}

const std::vector<std::string>& catalog_models() {
  static const std::vector<std::string> names = {
      "LR",   "FM",  "FFM",     "FwFM", "IPNN",   "DCN",    "DeepFM-deep", "CIN2",
      "AFM",  "AutoInt", "SAM1", "SAM2_A", "SAM2_E", "SAM3_A", "SAM3_E"};
  return names;
}

FIConfig fi_catalog(const std::string& name) {
  FIConfig c;
  using S = SimilarityKind;
  using U = UtilityKind;
  using V = NeighborhoodKind;
  auto row = [&](S s, U u, V v) {
    c.similarity = s;
    c.utility = u;
    c.neighborhood = v;
  };
  if (name == "LR" || name == "DeepFM-deep" || name == "SAM1") {
    row(S::kOne, U::kIdentity, V::kSelfOnly);
  } else if (name == "FM") {
    row(S::kInner, U::kOne, V::kAllOthers);
  } else if (name == "FFM") {
    row(S::kInner, U::kOne, V::kAllOthers);
    c.field_aware = true;
  } else if (name == "FwFM") {
    row(S::kInner, U::kFieldPairWeight, V::kAllOthers);
  } else if (name == "IPNN") {
    row(S::kInner, U::kThetaInner, V::kAll);
  } else if (name == "DCN") {
    row(S::kOne, U::kFieldScalar, V::kSelfOnly);
  } else if (name == "CIN2") {
    row(S::kInner, U::kPairScalar, V::kAll);
  } else if (name == "AFM") {
    row(S::kAfmAttention, U::kOne, V::kAllOthers);
  } else if (name == "AutoInt") {
    row(S::kProjectedInner, U::kLinearMap, V::kAll);
    c.softmax = true;
  } else if (name == "SAM2_A" || name == "SAM2_E") {
    row(S::kInner, name == "SAM2_A" ? U::kVectorWeight : U::kHadamard, V::kOrderedPairs);
    c.arity = Arity::kPerPair;
  } else if (name == "SAM3_A" || name == "SAM3_E") {
    row(S::kKernelInner, name == "SAM3_A" ? U::kVectorWeight : U::kHadamard, V::kAll);
    c.softmax = true;
    c.residual = true;
  } else {
    throw CatalogError("unknown model '" + name + "'");
  }
  return c;
}

std::string to_string(SimilarityKind k) { return nlohmann::json(k).get<std::string>(); }
std::string to_string(UtilityKind k) { return nlohmann::json(k).get<std::string>(); }
std::string to_string(NeighborhoodKind k) { return nlohmann::json(k).get<std::string>(); }

std::vector<std::size_t> neighborhood(NeighborhoodKind kind, std::size_t i, std::size_t n) {
  if (i >= n) throw ContractError("neighborhood: target " + std::to_string(i) + " of " + std::to_string(n));
  std::vector<std::size_t> out;
  switch (kind) {
    case NeighborhoodKind::kSelfOnly:
      out.push_back(i);
      break;
    case NeighborhoodKind::kAllOthers:
      for (std::size_t j = 0; j < n; ++j)
        if (j != i) out.push_back(j);
      break;
    case NeighborhoodKind::kAll:
    case NeighborhoodKind::kOrderedPairs:
      for (std::size_t j = 0; j < n; ++j) out.push_back(j);
      break;
  }
  if (out.empty()) throw DomainError("neighborhood: empty for target " + std::to_string(i));
  return out;
}

std::vector<std::pair<std::size_t, std::size_t>> pair_list(PairSet set, std::size_t n) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = set == PairSet::kUpperTriangle ? i + 1 : 0; j < n; ++j) out.emplace_back(i, j);
  }
  return out;
}

std::size_t unordered_pair_index(std::size_t i, std::size_t j, std::size_t n) {
  if (i == j || i >= n || j >= n) {
    throw ContractError("unordered_pair_index: bad pair (" + std::to_string(i) + ", " +
                        std::to_string(j) + ")");
  }
  if (i > j) std::swap(i, j);
  return i * n - i * (i + 1) / 2 + (j - i - 1);
}

// ---------------------------------------------------------------------------

double similarity_value(const SimilarityFn& s, const DenseVector& f_i, const DenseVector& v) {
  check_same(f_i, v, "similarity");
  switch (s.kind) {
    case SimilarityKind::kOne:
      return 1.0;
    case SimilarityKind::kConstant:
      return s.constant;
    case SimilarityKind::kInner:
      return inner(f_i, v);
    case SimilarityKind::kProjectedInner:
      return inner(vec_mat(f_i, s.q), vec_mat(v, s.k));
    case SimilarityKind::kKernelInner:
      return inner(f_i, vec_mat(v, s.k));
    case SimilarityKind::kAfmAttention:
      check_same(f_i, s.p, "afm projection");
      return inner(s.p, hadamard(f_i, v));
  }
  throw ContractError("similarity: bad kind");
}

DenseVector utility_value(const UtilityFn& u, const DenseVector& f_i, const DenseVector& v) {
  check_same(f_i, v, "utility");
  switch (u.kind) {
    case UtilityKind::kOne:
      return DenseVector(1, 1.0);
    case UtilityKind::kIdentity:
      return v;
    case UtilityKind::kFieldScalar:
      return scale(v, u.weight);
    case UtilityKind::kFieldPairWeight:
    case UtilityKind::kPairScalar:
      return DenseVector(1, u.weight);
    case UtilityKind::kThetaInner:
      check_same(u.theta_i, u.theta_j, "theta");
      return DenseVector(1, inner(u.theta_i, u.theta_j));
    case UtilityKind::kVectorWeight:
      check_same(u.vector, v, "vector weight");
      return u.vector;
    case UtilityKind::kHadamard:
      return hadamard(f_i, v);
    case UtilityKind::kLinearMap:
      return vec_mat(v, u.map);
  }
  throw ContractError("utility: bad kind");
}

DenseVector pair_interaction(const SimilarityFn& s, const UtilityFn& u, const DenseVector& f_i,
                             const DenseVector& v) {
  return scale(utility_value(u, f_i, v), similarity_value(s, f_i, v));
}

DenseVector neighborhood_interaction(const SimilarityFn& s, bool softmax,
                                     std::span<const UtilityFn> utilities,
                                     std::span<const DenseVector> neighbors,
                                     const DenseVector& f_i) {
  if (neighbors.empty()) throw DomainError("neighborhood_interaction: empty neighborhood");
  if (utilities.size() != 1 && utilities.size() != neighbors.size()) {
    throw ShapeError("neighborhood_interaction: " + std::to_string(utilities.size()) +
                     " utilities for " + std::to_string(neighbors.size()) + " neighbors");
  }
  std::vector<double> weights;
  weights.reserve(neighbors.size());
  for (const auto& v : neighbors) weights.push_back(similarity_value(s, f_i, v));
  if (softmax) weights = softmax_weights(weights);

  std::optional<DenseVector> total;
  for (std::size_t k = 0; k < neighbors.size(); ++k) {
    const UtilityFn& u = utilities.size() == 1 ? utilities[0] : utilities[k];
    DenseVector term = scale(utility_value(u, f_i, neighbors[k]), weights[k]);
    if (!total) {
      total = std::move(term);
    } else {
      check_same(*total, term, "neighborhood_interaction");
      total = add(*total, term);
    }
  }
  return *total;
}

// ---------------------------------------------------------------------------

InteractionLayer::InteractionLayer(const FIConfig& config, std::size_t n, std::size_t d,
                                   ParameterStore& store, std::vector<SlotInit>& inits)
    : config_(config), n_(n), d_(d) {
  using S = SimilarityKind;
  using U = UtilityKind;
  if (n < 1 || d < 1) throw ConfigError("interaction: n and d must be >= 1");
  if (config.layers < 1) throw ConfigError("interaction: layer count must be >= 1");
  const bool per_pair = config.arity == Arity::kPerPair;
  if (per_pair && (config.layers != 1 || config.softmax || config.residual)) {
    throw ConfigError("interaction: per-pair arity supports one plain layer only");
  }
  if (config.layers > 1 && !config.vector_valued()) {
    throw ConfigError("interaction: stacked layers need a vector utility");
  }
  if ((config.similarity == S::kOne || config.similarity == S::kConstant) &&
      (scalar_utility(config.utility) || config.utility == U::kVectorWeight)) {
    throw ConfigError("interaction: output would not depend on the record");
  }
  if (config.field_aware &&
      (config.similarity != S::kInner || config.utility != U::kOne ||
       config.neighborhood != NeighborhoodKind::kAllOthers || config.layers != 1 || per_pair)) {
    throw ConfigError("interaction: field-aware vectors support the FFM row only");
  }
  if (config.similarity == S::kAfmAttention &&
      (config.utility != U::kOne || config.neighborhood != NeighborhoodKind::kAllOthers ||
       config.layers != 1 || per_pair || config.softmax)) {
    throw ConfigError("interaction: attention similarity supports the AFM row only");
  }
  if (config.neighborhood == NeighborhoodKind::kAllOthers && n < 2) {
    throw DomainError("interaction: all-others neighborhood needs n >= 2");
  }
  if (config.utility == U::kFieldPairWeight && config.neighborhood != NeighborhoodKind::kAllOthers) {
    throw ConfigError("interaction: field-pair weights need the all-others neighborhood");
  }

  auto add_slot = [&](const std::string& name, std::size_t rows, std::size_t cols,
                      std::size_t fan_in, std::size_t fan_out) {
    const SlotId id = store.add(name, DenseMatrix(rows, cols));
    inits.push_back({id, SlotInit::Kind::kXavier, fan_in, fan_out, 0.0});
    return id;
  };

  const std::size_t pair_rows = per_pair ? pair_list(config.pairs, n).size() : n * n;
  layers_.resize(config.layers);
  for (std::size_t l = 0; l < config.layers; ++l) {
    LayerSlots& ls = layers_[l];
    const std::string sfx = "." + std::to_string(l);
    if (config.similarity == S::kProjectedInner) ls.q = add_slot("fi.Q" + sfx, d, d, d, d);
    if (config.similarity == S::kProjectedInner || config.similarity == S::kKernelInner) {
      ls.k = add_slot("fi.K" + sfx, d, d, d, d);
    }
    if (config.utility == U::kLinearMap) ls.v = add_slot("fi.V" + sfx, d, d, d, d);
    if (config.utility == U::kVectorWeight) ls.w = add_slot("fi.W" + sfx, pair_rows, d, pair_rows, d);
    if (config.residual) ls.residual = add_slot("fi.R" + sfx, d, d, d, d);
  }
  if (config.utility == U::kFieldScalar) field_scalar_ = add_slot("fi.w", n, 1, n, 1);
  if (config.utility == U::kFieldPairWeight) {
    const std::size_t p = n * (n - 1) / 2;
    pair_weight_ = add_slot("fi.pair", p, 1, p, 1);
  }
  if (config.utility == U::kThetaInner) theta_ = add_slot("fi.theta", n, d, n, d);
  if (config.utility == U::kPairScalar) pair_scalar_ = add_slot("fi.cin", n * n, 1, n * n, 1);
  if (config.similarity == S::kAfmAttention) {
    const std::size_t t = config.attention_width == 0 ? d : config.attention_width;
    afm_w_ = add_slot("fi.afm.W", d, t, d, t);
    afm_b_ = store.add("fi.afm.b", DenseMatrix(1, t));
    inits.push_back({*afm_b_, SlotInit::Kind::kZero, 1, 1, 0.0});
    afm_h_ = add_slot("fi.afm.h", t, 1, t, 1);
    afm_p_ = add_slot("fi.afm.p", d, 1, d, 1);
  }
}

bool InteractionLayer::sum_trick() const noexcept {
  return config_.similarity == SimilarityKind::kInner && config_.utility == UtilityKind::kOne &&
         config_.neighborhood == NeighborhoodKind::kAllOthers && !config_.softmax &&
         !config_.field_aware && !config_.residual && config_.layers == 1 &&
         config_.arity == Arity::kPerField && n_ >= 2;
}

std::size_t InteractionLayer::output_count() const noexcept {
  return config_.arity == Arity::kPerPair ? pair_list(config_.pairs, n_).size() : n_;
}

std::size_t InteractionLayer::output_width() const noexcept {
  return config_.vector_valued() ? d_ : 1;
}

std::vector<SlotId> InteractionLayer::interaction_slots() const {
  std::vector<SlotId> out;
  for (const auto& ls : layers_) {
    for (const auto& s : {ls.q, ls.k, ls.v, ls.w})
      if (s) out.push_back(*s);
  }
  for (const auto& s : {field_scalar_, pair_weight_, theta_, pair_scalar_, afm_w_, afm_h_, afm_p_})
    if (s) out.push_back(*s);
  return out;
}

std::vector<SlotId> InteractionLayer::residual_slots() const {
  std::vector<SlotId> out;
  for (const auto& ls : layers_)
    if (ls.residual) out.push_back(*ls.residual);
  if (afm_b_) out.push_back(*afm_b_);
  return out;
}

InteractionLayer::Bound InteractionLayer::bind(Tape& tape, ParameterStore& store,
                                               const LayerSlots& layer,
                                               std::span<const Var> g) const {
  Bound b;
  auto leaf = [&](const std::optional<SlotId>& s) -> std::optional<Var> {
    if (!s) return std::nullopt;
    return tape.parameter(store, *s);
  };
  b.w = leaf(layer.w);
  b.residual = leaf(layer.residual);
  b.theta = leaf(theta_);
  b.field_scalar = leaf(field_scalar_);
  b.pair_weight = leaf(pair_weight_);
  b.pair_scalar = leaf(pair_scalar_);
  if (layer.q) {
    const Var q = tape.parameter(store, *layer.q);
    for (Var x : g) b.g_q.push_back(tape.matmul(x, q));
  }
  if (layer.k) {
    const Var k = tape.parameter(store, *layer.k);
    for (Var x : g) b.g_k.push_back(tape.matmul(x, k));
  }
  if (layer.v) {
    const Var v = tape.parameter(store, *layer.v);
    for (Var x : g) b.g_v.push_back(tape.matmul(x, v));
  }
  b.inner.assign(g.size(), std::vector<std::optional<Var>>(g.size()));
  return b;
}

std::optional<Var> InteractionLayer::similarity(Tape& tape, Bound& b, std::span<const Var> g,
                                                std::size_t i, std::size_t j) const {
  switch (config_.similarity) {
    case SimilarityKind::kOne:
    case SimilarityKind::kConstant:
      return std::nullopt;
    case SimilarityKind::kInner: {
      auto& slot = b.inner[std::min(i, j)][std::max(i, j)];
      if (!slot) slot = tape.row_dot(g[i], g[j]);
      return *slot;
    }
    case SimilarityKind::kProjectedInner:
      return tape.row_dot(b.g_q[i], b.g_k[j]);
    case SimilarityKind::kKernelInner:
      return tape.row_dot(g[i], b.g_k[j]);
    case SimilarityKind::kAfmAttention:
      break;
  }
  throw ContractError("interaction: similarity not available per pair");
}

Var InteractionLayer::utility(Tape& tape, Bound& b, std::span<const Var> g, std::size_t i,
                              std::size_t j, std::size_t weight_row) const {
  switch (config_.utility) {
    case UtilityKind::kOne:
      return tape.constant(DenseMatrix(1, 1, {1.0}));
    case UtilityKind::kIdentity:
      return g[j];
    case UtilityKind::kFieldScalar:
      return tape.mul(tape.slice_rows(*b.field_scalar, i, 1), g[j]);
    case UtilityKind::kFieldPairWeight:
      return tape.slice_rows(*b.pair_weight, unordered_pair_index(i, j, n_), 1);
    case UtilityKind::kThetaInner:
      return tape.row_sum(tape.mul(tape.slice_rows(*b.theta, i, 1), tape.slice_rows(*b.theta, j, 1)));
    case UtilityKind::kPairScalar:
      return tape.slice_rows(*b.pair_scalar, i * n_ + j, 1);
    case UtilityKind::kVectorWeight:
      return tape.slice_rows(*b.w, weight_row, 1);
    case UtilityKind::kHadamard:
      return config_.hadamard == HadamardReading::kLiteralSelf ? tape.mul(g[i], g[i])
                                                               : tape.mul(g[i], g[j]);
    case UtilityKind::kLinearMap:
      return b.g_v[j];
  }
  throw ContractError("interaction: bad utility");
}

InteractionOutput InteractionLayer::forward(Tape& tape, ParameterStore& store,
                                            const LatentFields& f) const {
  if (f.n() != n_) {
    throw ContractError("interaction: expected " + std::to_string(n_) + " fields, got " +
                        std::to_string(f.n()));
  }
  if (config_.field_aware) {
    if (!f.field_aware()) throw ContractError("interaction: field-aware config needs field-aware vectors");
    return forward_field_aware(tape, f);
  }
  if (f.field_aware()) throw ContractError("interaction: unexpected field-aware vectors");
  if (config_.similarity == SimilarityKind::kAfmAttention) return forward_afm(tape, store, f.fields);

  InteractionOutput out;
  out.width = output_width();

  if (sum_trick()) {
    // <f_i, sum_{j != i} f_j> with the neighbor sum formed once.
    const Var total = tape.add_n(f.fields);
    for (std::size_t i = 0; i < n_; ++i) {
      out.vectors.push_back(tape.row_dot(f.fields[i], tape.sub(total, f.fields[i])));
    }
    return out;
  }

  if (config_.arity == Arity::kPerPair) {
    Bound b = bind(tape, store, layers_[0], f.fields);
    out.pairs = pair_list(config_.pairs, n_);
    for (std::size_t p = 0; p < out.pairs.size(); ++p) {
      const auto [i, j] = out.pairs[p];
      Var u = utility(tape, b, f.fields, i, j, p);
      auto s = similarity(tape, b, f.fields, i, j);
      if (s) {
        u = tape.mul(*s, u);
      } else if (config_.similarity == SimilarityKind::kConstant) {
        u = tape.scale(u, config_.constant);
      }
      out.vectors.push_back(u);
    }
    return out;
  }

  std::vector<Var> g = f.fields;
  for (const LayerSlots& layer : layers_) {
    Bound b = bind(tape, store, layer, g);
    std::vector<Var> next;
    next.reserve(n_);
    for (std::size_t i = 0; i < n_; ++i) {
      const auto nbrs = neighborhood(config_.neighborhood, i, n_);
      std::vector<std::optional<Var>> scores;
      scores.reserve(nbrs.size());
      for (std::size_t j : nbrs) scores.push_back(similarity(tape, b, g, i, j));
      if (config_.softmax) {
        std::vector<Var> raw;
        for (const auto& s : scores) {
          if (!s) throw ConfigError("interaction: softmax needs a record-dependent similarity");
          raw.push_back(*s);
        }
        const Var a = tape.softmax_rows(tape.concat_cols(raw));
        out.attention.push_back(a);
        for (std::size_t k = 0; k < nbrs.size(); ++k) scores[k] = tape.slice_cols(a, k, 1);
      }
      std::vector<Var> terms;
      terms.reserve(nbrs.size());
      for (std::size_t k = 0; k < nbrs.size(); ++k) {
        const std::size_t j = nbrs[k];
        Var u = utility(tape, b, g, i, j, i * n_ + j);
        if (scores[k]) {
          u = tape.mul(*scores[k], u);
        } else if (config_.similarity == SimilarityKind::kConstant) {
          u = tape.scale(u, config_.constant);
        }
        terms.push_back(u);
      }
      Var z = terms.size() == 1 ? terms[0] : tape.add_n(terms);
      if (b.residual) z = tape.add(z, tape.matmul(g[i], *b.residual));
      next.push_back(z);
    }
    g = std::move(next);
  }
  out.vectors = std::move(g);
  return out;
}

InteractionOutput InteractionLayer::forward_field_aware(Tape& tape, const LatentFields& f) const {
  InteractionOutput out;
  out.width = 1;
  for (std::size_t i = 0; i < n_; ++i) {
    std::vector<Var> terms;
    for (std::size_t j = 0; j < n_; ++j) {
      if (j == i) continue;
      terms.push_back(tape.row_dot(f.aware[i][j], f.aware[j][i]));
    }
    out.vectors.push_back(terms.size() == 1 ? terms[0] : tape.add_n(terms));
  }
  return out;
}

InteractionOutput InteractionLayer::forward_afm(Tape& tape, ParameterStore& store,
                                                std::span<const Var> f) const {
  const Var w = tape.parameter(store, *afm_w_);
  const Var bias = tape.parameter(store, *afm_b_);
  const Var h = tape.parameter(store, *afm_h_);
  const Var p = tape.parameter(store, *afm_p_);

  InteractionOutput out;
  out.width = 1;
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::vector<Var> raw, projected;
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t j = 0; j < n_; ++j) {
      if (i == j) continue;
      const Var e = tape.mul(f[i], f[j]);
      raw.push_back(tape.matmul(tape.relu(tape.add(tape.matmul(e, w), bias)), h));
      projected.push_back(tape.matmul(e, p));
      pairs.emplace_back(i, j);
    }
  }
  const Var a = tape.softmax_rows(tape.concat_cols(raw));
  out.attention.push_back(a);
  std::vector<std::vector<Var>> terms(n_);
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    terms[pairs[k].first].push_back(tape.mul(tape.slice_cols(a, k, 1), projected[k]));
  }
  for (auto& t : terms) out.vectors.push_back(t.size() == 1 ? t[0] : tape.add_n(t));
  return out;
}

}  // namespace samctr
