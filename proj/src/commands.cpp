#include "samctr/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "samctr/synthetic.hpp"

namespace samctr {

namespace fs = std::filesystem;

nlohmann::json RunConfig::to_json() const {
  return {{"subcommand", subcommand},
          {"data", data},
          {"layout", layout},
          {"checkpoint", checkpoint},
          {"out", out},
          {"model", model},
          {"d", d},
          {"layers", layers},
          {"pairs", pairs},
          {"hidden", hidden},
          {"dropout", dropout},
          {"train", train.to_json()},
          {"seed", seed},
          {"min_count", min_count},
          {"ratios", ratios},
          {"fields", fields},
          {"categories", categories},
          {"sigma", sigma},
          {"noise", noise},
          {"sizes", sizes},
          {"family", family}};
}

RunConfig RunConfig::from_json(const nlohmann::json& j, const RunConfig& base) {
  if (!j.is_object()) throw ConfigError("run config must be a JSON object");
  RunConfig c = base;
  try {
    c.subcommand = j.value("subcommand", c.subcommand);
    c.data = j.value("data", c.data);
    c.layout = j.value("layout", c.layout);
    c.checkpoint = j.value("checkpoint", c.checkpoint);
    c.out = j.value("out", c.out);
    c.model = j.value("model", c.model);
    c.d = j.value("d", c.d);
    c.layers = j.value("layers", c.layers);
    c.pairs = j.value("pairs", c.pairs);
    c.hidden = j.value("hidden", c.hidden);
    c.dropout = j.value("dropout", c.dropout);
    if (j.contains("train")) {
      nlohmann::json merged = c.train.to_json();
      merged.update(j.at("train"));
      c.train = TrainConfig::from_json(merged);
    }
    c.seed = j.value("seed", c.seed);
    c.min_count = j.value("min_count", c.min_count);
    c.ratios = j.value("ratios", c.ratios);
    c.fields = j.value("fields", c.fields);
    c.categories = j.value("categories", c.categories);
    c.sigma = j.value("sigma", c.sigma);
    c.noise = j.value("noise", c.noise);
    c.sizes = j.value("sizes", c.sizes);
    c.family = j.value("family", c.family);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("run config: ") + e.what());
  }
  return c;
}

int exit_code(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::kConfig:
    case ErrorKind::kCatalog:
      return 2;
    case ErrorKind::kData:
      return 3;
    case ErrorKind::kNumeric:
      return 4;
    case ErrorKind::kVerification:
      return 5;
    default:
      return 1;
  }
}

namespace {

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create directory " + dir + ": " + ec.message());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("write failed for " + path.string());
}

void write_json(const fs::path& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  try {
    nlohmann::json j;
    in >> j;
    return j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct LoadedData {
  FieldSchema schema;
  std::vector<EncodedRecord> train, validation, test;
};

LoadedData load_data(const std::string& dir) {
  if (dir.empty()) throw ConfigError("--data is required");
  const fs::path root(dir);
  LoadedData d;
  try {
    d.schema = FieldSchema::from_json(read_json(root / "schema.json"));
  } catch (const ConfigError& e) {
    throw DataError(std::string("schema: ") + e.what());
  }
  d.train = read_encoded((root / "train.tsv").string(), d.schema);
  d.validation = read_encoded((root / "validation.tsv").string(), d.schema);
  if (fs::exists(root / "test.tsv")) d.test = read_encoded((root / "test.tsv").string(), d.schema);
  return d;
}

ModelSpec spec_for(const RunConfig& c, const FieldSchema& schema) {
  ZooOptions options;
  options.layers = c.layers;
  options.hidden = c.hidden;
  options.dropout = c.dropout;
  ModelSpec spec = make_model_spec(c.model, schema, c.d, options);
  if (c.pairs == "upper") {
    if (spec.fi.arity == Arity::kPerPair) spec.fi.pairs = PairSet::kUpperTriangle;
  } else if (c.pairs != "all") {
    throw ConfigError("pairs must be 'all' or 'upper', got '" + c.pairs + "'");
  }
  return spec;
}

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::vector<int> labels_of(const std::vector<EncodedRecord>& rs) {
  std::vector<int> out;
  out.reserve(rs.size());
  for (const auto& r : rs) out.push_back(r.label);
  return out;
}

}  // namespace

void write_manifest(const RunConfig& config, const nlohmann::json& extra) {
  ensure_dir(config.out);
  nlohmann::json j = {{"subcommand", config.subcommand},
                      {"config", config.to_json()},
                      {"created_at", utc_now()}};
  if (!extra.is_null()) j["result"] = extra;
  write_json(fs::path(config.out) / "manifest.json", j);
}

DatasetSplit cmd_prepare(const RunConfig& config) {
  if (config.data.empty()) throw ConfigError("prepare: --data must name the raw file");
  RawLayout layout;
  if (!config.layout.empty()) {
    layout = RawLayout::from_json(read_json(config.layout));
  } else {
    std::ifstream in(config.data);
    if (!in) throw DataError("cannot read " + config.data);
    std::string first;
    if (!std::getline(in, first)) throw DataError(config.data + ": empty file");
    const std::size_t columns = static_cast<std::size_t>(std::count(first.begin(), first.end(), '\t')) + 1;
    if (columns < 2) throw DataError(config.data + ": need a label and at least one field");
    for (std::size_t i = 0; i + 1 < columns; ++i) {
      layout.names.push_back("f" + std::to_string(i));
      layout.kinds.push_back(FieldKind::kCategorical);
    }
  }
  const auto raw = read_raw(config.data, layout.names.size(), layout.delimiter);
  const FieldSchema schema = build_vocab(raw, layout, config.min_count);
  const auto encoded = encode_all(schema, raw);
  DatasetSplit parts = split(encoded, config.ratios, config.seed);

  ensure_dir(config.out);
  const fs::path root(config.out);
  write_encoded((root / "train.tsv").string(), parts.train);
  write_encoded((root / "validation.tsv").string(), parts.validation);
  write_encoded((root / "test.tsv").string(), parts.test);
  write_json(root / "schema.json", schema.to_json());
  write_manifest(config, {{"records", encoded.size()},
                          {"train", parts.train.size()},
                          {"validation", parts.validation.size()},
                          {"test", parts.test.size()}});
  return parts;
}

void cmd_generate(const RunConfig& config) {
  UtilityFamily family;
  if (config.family == "fm") {
    family = UtilityFamily::kFactorization;
  } else if (config.family == "linear") {
    family = UtilityFamily::kLinear;
  } else {
    throw ConfigError("generate: family must be 'fm' or 'linear'");
  }
  const std::size_t total = config.sizes[0] + config.sizes[1] + config.sizes[2];
  if (config.sizes[0] < 1 || config.sizes[1] < 1) throw ConfigError("generate: empty train or validation split");
  const SyntheticSpec truth = make_random_spec(config.fields, config.categories, config.d, family,
                                               config.sigma, config.noise, total, config.seed);
  const SyntheticSample sample = generate_dcm(truth);
  const auto records = encode_sample(sample);

  ensure_dir(config.out);
  const fs::path root(config.out);
  const char* names[3] = {"train", "validation", "test"};
  std::size_t begin = 0;
  for (int s = 0; s < 3; ++s) {
    const std::size_t count = config.sizes[s];
    const std::span<const EncodedRecord> part(records.data() + begin, count);
    write_encoded((root / (std::string(names[s]) + ".tsv")).string(), part);
    std::string oracle;
    for (std::size_t r = begin; r < begin + count; ++r) oracle += format_double(sample.oracle[r]) + "\n";
    write_text(root / (std::string(names[s]) + "_oracle.tsv"), oracle);
    begin += count;
  }
  write_json(root / "schema.json", synthetic_schema(truth).to_json());
  write_json(root / "truth.json", truth.to_json());
  write_manifest(config, {{"records", total}});
}

TrainOutcome cmd_train(const RunConfig& config) {
  const LoadedData data = load_data(config.data);
  Model model = Model::build(spec_for(config, data.schema), config.seed);
  TrainConfig tc = config.train;
  tc.seed = config.seed;

  TrainOutcome outcome;
  outcome.history = train(model, data.train, data.validation, tc);
  outcome.validation = evaluate_logits(model.predict_logits(data.validation), labels_of(data.validation));
  if (!data.test.empty()) {
    outcome.test = evaluate_logits(model.predict_logits(data.test), labels_of(data.test));
    outcome.has_test = true;
  }

  ensure_dir(config.out);
  const fs::path root(config.out);
  save_checkpoint(model, (root / "checkpoint.json").string());
  write_text(root / "history.csv", outcome.history.to_csv());
  write_json(root / "history.json", outcome.history.to_json());
  nlohmann::json metrics = {{"model", config.model}, {"validation", outcome.validation.to_json()}};
  if (outcome.has_test) metrics["test"] = outcome.test.to_json();
  write_json(root / "metrics.json", metrics);
  write_manifest(config, metrics);
  return outcome;
}

MetricsReport cmd_evaluate(const RunConfig& config) {
  if (config.checkpoint.empty()) throw ConfigError("evaluate: --checkpoint is required");
  if (config.data.empty()) throw ConfigError("evaluate: --data must name an encoded file");
  Model model = load_checkpoint(config.checkpoint);
  const auto records = read_encoded(config.data, model.spec().schema);
  const MetricsReport report = evaluate_logits(model.predict_logits(records), labels_of(records));
  ensure_dir(config.out);
  write_json(fs::path(config.out) / "evaluation.json", report.to_json());
  write_manifest(config, report.to_json());
  return report;
}

GradCheckOutcome cmd_gradcheck(const std::string& model_name, std::size_t n, std::size_t d,
                               std::uint64_t seed, bool corrupt, std::size_t layers) {
  constexpr std::uint32_t kVocab = 7;
  constexpr std::size_t kBatch = 8;
  ZooOptions options;
  options.layers = layers;
  Model model = Model::build(make_model_spec(model_name, FieldSchema::uniform(n, kVocab), d, options), seed);

  std::mt19937_64 rng(seed ^ 0x5bd1e995ULL);
  std::uniform_int_distribution<std::uint32_t> pick(0, kVocab - 1);
  std::vector<EncodedRecord> records(kBatch);
  for (std::size_t r = 0; r < kBatch; ++r) {
    records[r].label = static_cast<int>(r % 2);
    for (std::size_t i = 0; i < n; ++i) records[r].index.push_back(pick(rng));
  }
  const Batch batch = make_batch(records, n);

  // Dropout draws restart from the same state for every evaluation, so the
  // loss is one fixed smooth function of the parameters.
  const std::uint64_t mask_seed = seed + 17;
  auto loss = [&](ParameterStore&) {
    Tape tape;
    std::mt19937_64 masks(mask_seed);
    return tape.scalar(tape.logloss(model.logits(tape, batch, true, masks), batch.labels));
  };

  {
    Tape tape;
    std::mt19937_64 masks(mask_seed);
    const Var l = tape.logloss(model.logits(tape, batch, true, masks), batch.labels);
    model.store().zero_grad();
    tape.backward(l);
  }
  if (corrupt) model.store().slot(0).grad[0] += 1.0;

  GradCheckOutcome out;
  out.result = finite_diff_check(loss, model.store());
  out.passed = out.result.max_relative_error < out.tolerance;
  return out;
}

const std::vector<std::string>& propositions() {
  static const std::vector<std::string> names = {"lr-sam1",  "sam1-lr", "fm-sam2a",
                                                 "sam2a-sam3a", "fm-sam3a", "negative"};
  return names;
}

EquivalenceReport cmd_equivalence(const std::string& prop, std::size_t trials, double tolerance,
                                  std::uint64_t seed) {
  if (trials < 1) throw ConfigError("equivalence: trials must be >= 1");
  const FieldSchema schema = FieldSchema::uniform(5, 4);
  constexpr std::size_t d = 4;
  EquivalenceReport worst;
  bool first = true;
  std::size_t total = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    const std::uint64_t s = seed + 1000 * t;
    auto fresh = [&](const std::string& name, std::uint64_t salt) {
      Model m = Model::build(make_model_spec(name, schema, d), s + salt);
      randomize_parameters(m, s + salt);
      return m;
    };
    EquivalenceReport r;
    if (prop == "lr-sam1") {
      Model a = fresh("LR", 0);
      Model b = lift_lr_to_sam1(a, d);
      r = verify_equivalence(a, b, 1000, tolerance, s);
      r.construction = "coordinate-0 embedding, unit readout per field";
    } else if (prop == "sam1-lr") {
      Model a = fresh("SAM1", 0);
      Model b = reduce_sam1_to_lr(a);
      r = verify_equivalence(a, b, 1000, tolerance, s);
      r.construction = "per-category weight <emb, readout block>";
    } else if (prop == "fm-sam2a") {
      Model a = fresh("FM", 0);
      Model b = lift_fm_to_sam2a(a);
      r = verify_equivalence(a, b, 1000, tolerance, s);
      r.construction = "W_ij = c_ij e0, readout e0, c = 1/2 off-diagonal";
    } else if (prop == "sam2a-sam3a") {
      Model a = fresh("SAM2_A", 0);
      Model b = lift_sam2a_to_sam3a(a);
      r = verify_equivalence(a, b, 1000, tolerance, s);
      r.construction = "raw similarity, K = I, zero residual, W'_ij = <h_ij, W_ij> e0";
    } else if (prop == "fm-sam3a") {
      Model a = fresh("FM", 0);
      Model mid = lift_fm_to_sam2a(a);
      Model b = lift_sam2a_to_sam3a(mid);
      r = verify_equivalence(a, b, 1000, tolerance, s);
      r.construction = "FM -> SAM2_A -> SAM3_A";
    } else if (prop == "negative") {
      Model a = fresh("LR", 0);
      Model b = fresh("FM", 1);
      r = verify_equivalence(a, b, 1000, tolerance, s);
      r.construction = "none (negative control)";
      r.expect_difference = true;
    } else {
      throw ConfigError("equivalence: unknown proposition '" + prop + "'");
    }
    total += r.samples;
    // Worst case: largest gap for positive claims, smallest for the control.
    const bool worse = r.expect_difference ? r.max_abs_diff < worst.max_abs_diff
                                           : r.max_abs_diff > worst.max_abs_diff;
    if (first || worse) worst = r;
    first = false;
  }
  worst.samples = total;
  return worst;
}

ComplexityReport cmd_complexity(const std::string& model, std::size_t n, std::size_t d,
                                std::size_t layers) {
  if (layers < 1) throw ConfigError("complexity: L must be >= 1");
  return count_complexity(model, n, d, layers);
}

std::string complexity_grid_csv(const std::vector<std::string>& models, std::size_t n_max,
                                std::size_t d_max, std::size_t l_max) {
  std::ostringstream out;
  out << "model,n,d,L,space_el,space_fi,space_al,space_st,space,time,trainable\n";
  for (const auto& name : models) {
    const bool layered = name == "SAM3_A" || name == "SAM3_E" || name == "AutoInt";
    for (std::size_t n = 2; n <= n_max; ++n) {
      for (std::size_t d = 1; d <= d_max; ++d) {
        for (std::size_t l = 1; l <= (layered ? l_max : 1); ++l) {
          const ComplexityReport r = count_complexity(name, n, d, l);
          out << name << ',' << n << ',' << r.d << ',' << l << ',' << r.space_el << ','
              << r.space_fi << ',' << r.space_al << ',' << r.space_st << ',' << r.space() << ','
              << r.time() << ',' << r.trainable << '\n';
        }
      }
    }
  }
  return out.str();
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::string out = "layers,epochs,best_epoch,val_auc,test_auc,test_logloss\n";
  for (const auto& r : rows) {
    out += std::to_string(r.layers) + "," + std::to_string(r.epochs) + "," +
           std::to_string(r.best_epoch) + "," + format_double(r.val_auc) + "," +
           format_double(r.test_auc) + "," + format_double(r.test_logloss) + "\n";
  }
  return out;
}

std::vector<AblationRow> cmd_ablation_layers(const RunConfig& config, std::size_t l_min,
                                             std::size_t l_max) {
  if (l_min < 1) throw ConfigError("ablation: L must be >= 1");
  if (l_min > l_max) throw ConfigError("ablation: empty layer range");
  const LoadedData data = load_data(config.data);
  if (data.test.empty()) throw DataError("ablation: data directory has no test split");
  std::vector<AblationRow> rows;
  for (std::size_t l = l_min; l <= l_max; ++l) {
    RunConfig c = config;
    c.model = "SAM3_A";
    c.layers = l;
    Model model = Model::build(spec_for(c, data.schema), c.seed);
    TrainConfig tc = c.train;
    tc.seed = c.seed;
    const TrainHistory h = train(model, data.train, data.validation, tc);
    const MetricsReport test = evaluate_logits(model.predict_logits(data.test), labels_of(data.test));
    rows.push_back({l, h.epochs.size(), h.best_epoch, h.epochs[h.best_epoch - 1].val_auc, test.auc,
                    test.logloss});
  }
  ensure_dir(config.out);
  write_text(fs::path(config.out) / "ablation.csv", ablation_csv(rows));
  write_manifest(config, {{"layers", {l_min, l_max}}});
  return rows;
}

}  // namespace samctr
