#include "samctr/synthetic.hpp"

#include <algorithm>
#include <cmath>

#include "samctr/errors.hpp"

namespace samctr {

void SyntheticSpec::validate() const {
  if (categories.empty()) throw DomainError("synthetic spec: no fields");
  if (!(noise > 0.0)) throw DomainError("synthetic spec: noise level k must be positive");
  for (auto c : categories) {
    if (c < 1) throw DomainError("synthetic spec: field with no categories");
  }
  if (!linear.empty()) {
    if (linear.size() != n()) throw DomainError("synthetic spec: linear weights per field");
    for (std::size_t i = 0; i < n(); ++i) {
      if (linear[i].size() != categories[i]) {
        throw DomainError("synthetic spec: linear weight count for field " + std::to_string(i));
      }
    }
  }
  if (family == UtilityFamily::kLinear && linear.empty()) {
    throw DomainError("synthetic spec: linear family needs weights");
  }
  if (family == UtilityFamily::kFactorization) {
    if (embeddings.size() != n()) throw DomainError("synthetic spec: one embedding per field");
    const std::size_t d = embeddings[0].cols();
    for (std::size_t i = 0; i < n(); ++i) {
      if (embeddings[i].rows() != categories[i] || embeddings[i].cols() != d || d == 0) {
        throw DomainError("synthetic spec: embedding shape for field " + std::to_string(i));
      }
    }
  }
}

nlohmann::json SyntheticSpec::to_json() const {
  nlohmann::json j;
  j["categories"] = categories;
  j["family"] = family == UtilityFamily::kLinear ? "linear" : "factorization";
  j["linear"] = linear;
  j["embeddings"] = nlohmann::json::array();
  for (const auto& e : embeddings) {
    j["embeddings"].push_back({{"rows", e.rows()}, {"cols", e.cols()}, {"values", e.values()}});
  }
  j["theta"] = theta;
  j["noise"] = noise;
  j["samples"] = samples;
  j["seed"] = seed;
  j["label_mode"] = label_mode == LabelMode::kLogistic ? "logistic" : "gumbel_utility";
  return j;
}

SyntheticSpec SyntheticSpec::from_json(const nlohmann::json& j) {
  SyntheticSpec s;
  try {
    s.categories = j.at("categories").get<std::vector<std::uint32_t>>();
    s.family = j.at("family").get<std::string>() == "linear" ? UtilityFamily::kLinear
                                                             : UtilityFamily::kFactorization;
    s.linear = j.value("linear", std::vector<std::vector<double>>{});
    for (const auto& e : j.value("embeddings", nlohmann::json::array())) {
      s.embeddings.emplace_back(e.at("rows").get<std::size_t>(), e.at("cols").get<std::size_t>(),
                                e.at("values").get<std::vector<double>>());
    }
    s.theta = j.at("theta").get<double>();
    s.noise = j.at("noise").get<double>();
    s.samples = j.at("samples").get<std::size_t>();
    s.seed = j.at("seed").get<std::uint64_t>();
    s.label_mode = j.value("label_mode", std::string("logistic")) == "gumbel_utility"
                       ? LabelMode::kGumbelUtility
                       : LabelMode::kLogistic;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("synthetic spec json: ") + e.what());
  }
  s.validate();
  return s;
}

double true_utility(const SyntheticSpec& spec, std::span<const std::uint32_t> category) {
  double h = 0.0;
  if (!spec.linear.empty()) {
    for (std::size_t i = 0; i < spec.n(); ++i) h += spec.linear[i][category[i]];
  }
  if (spec.family == UtilityFamily::kFactorization) {
    const std::size_t d = spec.embeddings[0].cols();
    for (std::size_t i = 0; i < spec.n(); ++i) {
      auto vi = spec.embeddings[i].row_span(category[i]);
      for (std::size_t j = i + 1; j < spec.n(); ++j) {
        auto vj = spec.embeddings[j].row_span(category[j]);
        for (std::size_t k = 0; k < d; ++k) h += vi[k] * vj[k];
      }
    }
  }
  return h;
}

double sample_gumbel(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double x = u(rng);
  while (x <= 0.0) x = u(rng);
  return -std::log(-std::log(x));
}

namespace {

std::vector<std::uint32_t> draw_categories(const SyntheticSpec& spec, std::mt19937_64& rng) {
  std::vector<std::uint32_t> cat(spec.n());
  for (std::size_t i = 0; i < spec.n(); ++i) {
    std::uniform_int_distribution<std::uint32_t> pick(0, spec.categories[i] - 1);
    cat[i] = pick(rng);
  }
  return cat;
}

}  // namespace

SyntheticSpec make_random_spec(std::size_t n, std::uint32_t categories, std::size_t d,
                               UtilityFamily family, double sigma, double noise,
                               std::size_t samples, std::uint64_t seed,
                               std::size_t calibration) {
  SyntheticSpec spec;
  spec.categories.assign(n, categories);
  spec.family = family;
  spec.noise = noise;
  spec.samples = samples;
  spec.seed = seed;
  // Ground-truth parameters use a stream separate from the sampling stream.
  std::mt19937_64 rng(seed ^ 0x9E3779B97F4A7C15ULL);
  std::normal_distribution<double> normal(0.0, sigma);
  if (family == UtilityFamily::kLinear) {
    spec.linear.assign(n, std::vector<double>(categories));
    for (auto& field : spec.linear) {
      for (double& w : field) w = normal(rng);
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      DenseMatrix e(categories, d);
      for (double& v : e.span()) v = normal(rng);
      spec.embeddings.push_back(std::move(e));
    }
  }
  spec.validate();
  std::vector<double> hs;
  hs.reserve(calibration);
  for (std::size_t r = 0; r < calibration; ++r) {
    auto cat = draw_categories(spec, rng);
    hs.push_back(true_utility(spec, cat));
  }
  if (!hs.empty()) {
    std::nth_element(hs.begin(), hs.begin() + hs.size() / 2, hs.end());
    spec.theta = hs[hs.size() / 2];
  }
  return spec;
}

SyntheticSample generate_dcm(const SyntheticSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  SyntheticSample out;
  out.category.reserve(spec.samples);
  out.labels.reserve(spec.samples);
  out.oracle.reserve(spec.samples);
  for (std::size_t r = 0; r < spec.samples; ++r) {
    auto cat = draw_categories(spec, rng);
    const double margin = (true_utility(spec, cat) - spec.theta) / spec.noise;
    const double p = sigmoid(margin);
    int y = 0;
    if (spec.label_mode == LabelMode::kLogistic) {
      y = u(rng) < p ? 1 : 0;
    } else {
      const double e1 = sample_gumbel(rng);
      const double e0 = sample_gumbel(rng);
      y = margin + (e1 - e0) > 0.0 ? 1 : 0;
    }
    out.category.push_back(std::move(cat));
    out.labels.push_back(y);
    out.oracle.push_back(p);
  }
  return out;
}

FieldSchema synthetic_schema(const SyntheticSpec& spec) {
  std::vector<FieldDescriptor> fields;
  for (std::size_t i = 0; i < spec.n(); ++i) {
    FieldDescriptor f{"c" + std::to_string(i), FieldKind::kCategorical, kFirstValueIndex, {}};
    for (std::uint32_t c = 0; c < spec.categories[i]; ++c) {
      f.dictionary.emplace("c" + std::to_string(c), f.vocab_size++);
    }
    fields.push_back(std::move(f));
  }
  return FieldSchema(std::move(fields));
}

std::vector<EncodedRecord> encode_sample(const SyntheticSample& sample) {
  std::vector<EncodedRecord> out;
  out.reserve(sample.labels.size());
  for (std::size_t r = 0; r < sample.labels.size(); ++r) {
    EncodedRecord rec;
    rec.label = sample.labels[r];
    rec.index.reserve(sample.category[r].size());
    for (auto c : sample.category[r]) rec.index.push_back(c + kFirstValueIndex);
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<RawRecord> raw_sample(const SyntheticSample& sample) {
  std::vector<RawRecord> out;
  out.reserve(sample.labels.size());
  for (std::size_t r = 0; r < sample.labels.size(); ++r) {
    RawRecord rec;
    rec.label = sample.labels[r];
    for (auto c : sample.category[r]) rec.values.emplace_back("c" + std::to_string(c));
    out.push_back(std::move(rec));
  }
  return out;
}

RawLayout synthetic_layout(const SyntheticSpec& spec) {
  RawLayout layout;
  for (std::size_t i = 0; i < spec.n(); ++i) {
    layout.names.push_back("c" + std::to_string(i));
    layout.kinds.push_back(FieldKind::kCategorical);
  }
  return layout;
}

}  // namespace samctr
