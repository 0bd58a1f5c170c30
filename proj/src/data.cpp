#include "samctr/data.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_map>

#include "samctr/errors.hpp"

namespace samctr {

std::int64_t discretize_numeric(double x, double log_base) {
  if (x > 2.0) {
    const double lg = log_base == std::numbers::e ? std::log(x) : std::log(x) / std::log(log_base);
    return static_cast<std::int64_t>(std::floor(2.0 * lg));
  }
  return static_cast<std::int64_t>(std::trunc(x - 2.0));
}

FieldSchema::FieldSchema(std::vector<FieldDescriptor> fields, double log_base)
    : fields_(std::move(fields)), log_base_(log_base) {
  if (fields_.empty()) throw DomainError("FieldSchema: at least one field required");
  for (const auto& f : fields_) {
    if (f.vocab_size < 1) throw DomainError("FieldSchema: field '" + f.name + "' has no rows");
  }
}

FieldSchema FieldSchema::uniform(std::size_t n, std::uint32_t vocab_size) {
  std::vector<std::uint32_t> sizes(n, vocab_size);
  return from_sizes(sizes);
}

FieldSchema FieldSchema::from_sizes(std::span<const std::uint32_t> vocab_sizes) {
  std::vector<FieldDescriptor> fields;
  for (std::size_t i = 0; i < vocab_sizes.size(); ++i) {
    fields.push_back(FieldDescriptor{"f" + std::to_string(i), FieldKind::kCategorical,
                                     vocab_sizes[i], {}});
  }
  return FieldSchema(std::move(fields));
}

std::vector<std::uint32_t> FieldSchema::vocab_sizes() const {
  std::vector<std::uint32_t> out;
  out.reserve(fields_.size());
  for (const auto& f : fields_) out.push_back(f.vocab_size);
  return out;
}

std::size_t FieldSchema::total_vocab() const {
  std::size_t total = 0;
  for (const auto& f : fields_) total += f.vocab_size;
  return total;
}

namespace {

std::optional<double> parse_double(const std::string& s) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) return std::nullopt;
    return v;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

std::string key_for(FieldKind kind, const std::string& raw, double log_base) {
  if (kind == FieldKind::kNumeric) {
    if (auto v = parse_double(raw); v && std::isfinite(*v)) {
      return std::to_string(discretize_numeric(*v, log_base));
    }
    // Unparseable numerics become their own category so encoding stays total.
    return "raw:" + raw;
  }
  return raw;
}

std::string kind_name(FieldKind k) { return k == FieldKind::kNumeric ? "numeric" : "categorical"; }

FieldKind parse_kind(const std::string& s) {
  if (s == "numeric") return FieldKind::kNumeric;
  if (s == "categorical") return FieldKind::kCategorical;
  throw ConfigError("unknown field kind '" + s + "'");
}

}  // namespace

std::string FieldSchema::category_key(std::size_t field, const std::string& raw) const {
  return key_for(fields_.at(field).kind, raw, log_base_);
}

EncodedRecord FieldSchema::encode(const RawRecord& raw) const {
  if (raw.values.size() != fields_.size()) {
    throw DataError("encode: record has " + std::to_string(raw.values.size()) + " fields, schema " +
                    std::to_string(fields_.size()));
  }
  EncodedRecord rec;
  rec.label = raw.label;
  rec.index.reserve(fields_.size());
  for (std::size_t i = 0; i < fields_.size(); ++i) {
    const auto& v = raw.values[i];
    if (!v) {
      rec.index.push_back(kMissingIndex);
      continue;
    }
    const auto& dict = fields_[i].dictionary;
    auto it = dict.find(category_key(i, *v));
    rec.index.push_back(it == dict.end() ? kOovIndex : it->second);
  }
  return rec;
}

void FieldSchema::validate(const EncodedRecord& rec) const {
  if (rec.index.size() != fields_.size()) {
    throw ContractError("record has " + std::to_string(rec.index.size()) + " fields, schema has " +
                        std::to_string(fields_.size()));
  }
  for (std::size_t i = 0; i < fields_.size(); ++i) {
    if (rec.index[i] >= fields_[i].vocab_size) {
      throw ContractError("field " + std::to_string(i) + " index " + std::to_string(rec.index[i]) +
                          " >= vocabulary " + std::to_string(fields_[i].vocab_size));
    }
  }
}

nlohmann::json FieldSchema::to_json() const {
  nlohmann::json j;
  j["log_base"] = log_base_;
  j["fields"] = nlohmann::json::array();
  for (const auto& f : fields_) {
    nlohmann::json jf;
    jf["name"] = f.name;
    jf["kind"] = kind_name(f.kind);
    jf["vocab_size"] = f.vocab_size;
    jf["dictionary"] = f.dictionary;
    j["fields"].push_back(jf);
  }
  return j;
}

FieldSchema FieldSchema::from_json(const nlohmann::json& j) {
  try {
    std::vector<FieldDescriptor> fields;
    for (const auto& jf : j.at("fields")) {
      FieldDescriptor f;
      f.name = jf.at("name").get<std::string>();
      f.kind = parse_kind(jf.value("kind", std::string("categorical")));
      f.vocab_size = jf.at("vocab_size").get<std::uint32_t>();
      if (jf.contains("dictionary")) {
        f.dictionary = jf.at("dictionary").get<std::map<std::string, std::uint32_t>>();
      }
      fields.push_back(std::move(f));
    }
    return FieldSchema(std::move(fields), j.value("log_base", std::numbers::e));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("schema json: ") + e.what());
  }
}

RawLayout RawLayout::from_json(const nlohmann::json& j) {
  RawLayout layout;
  try {
    for (const auto& jf : j.at("fields")) {
      layout.names.push_back(jf.at("name").get<std::string>());
      layout.kinds.push_back(parse_kind(jf.value("kind", std::string("categorical"))));
    }
    const std::string delim = j.value("delimiter", std::string("\t"));
    if (delim.size() != 1) throw ConfigError("delimiter must be a single character");
    layout.delimiter = delim[0];
    layout.log_base = j.value("log_base", std::numbers::e);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("layout json: ") + e.what());
  }
  if (layout.names.empty()) throw ConfigError("layout json: no fields");
  if (!(layout.log_base > 0.0) || layout.log_base == 1.0) {
    throw ConfigError("layout json: log_base must be positive and not 1");
  }
  return layout;
}

nlohmann::json RawLayout::to_json() const {
  nlohmann::json j;
  j["delimiter"] = std::string(1, delimiter);
  j["log_base"] = log_base;
  j["fields"] = nlohmann::json::array();
  for (std::size_t i = 0; i < names.size(); ++i) {
    j["fields"].push_back({{"name", names[i]}, {"kind", kind_name(kinds[i])}});
  }
  return j;
}

FieldSchema build_vocab(std::span<const RawRecord> records, const RawLayout& layout,
                        std::size_t min_count) {
  if (records.empty()) throw DomainError("build_vocab: empty record stream");
  if (min_count < 1) throw DomainError("build_vocab: min_count must be >= 1");
  const std::size_t n = layout.names.size();
  std::vector<std::map<std::string, std::size_t>> counts(n);
  for (const auto& r : records) {
    if (r.values.size() != n) {
      throw DataError("build_vocab: record has " + std::to_string(r.values.size()) +
                      " fields, layout " + std::to_string(n));
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (r.values[i]) ++counts[i][key_for(layout.kinds[i], *r.values[i], layout.log_base)];
    }
  }
  std::vector<FieldDescriptor> fields;
  fields.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    FieldDescriptor f{layout.names[i], layout.kinds[i], kFirstValueIndex, {}};
    for (const auto& [key, count] : counts[i]) {
      if (count >= min_count) f.dictionary.emplace(key, f.vocab_size++);
    }
    fields.push_back(std::move(f));
  }
  return FieldSchema(std::move(fields), layout.log_base);
}

std::vector<EncodedRecord> encode_all(const FieldSchema& schema, std::span<const RawRecord> raw) {
  std::vector<EncodedRecord> out;
  out.reserve(raw.size());
  for (const auto& r : raw) out.push_back(schema.encode(r));
  return out;
}

std::array<std::vector<std::size_t>, 3> split_positions(std::size_t count,
                                                        std::array<double, 3> ratios,
                                                        std::uint64_t seed) {
  double total = 0.0;
  for (double r : ratios) {
    if (!(r > 0.0)) throw DomainError("split: ratios must all be positive");
    total += r;
  }
  if (std::abs(total - 1.0) > 1e-9) throw DomainError("split: ratios must sum to 1");
  if (count < ratios.size()) throw DomainError("split: fewer records than splits");

  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  std::array<std::vector<std::size_t>, 3> parts;
  std::size_t begin = 0;
  double cumulative = 0.0;
  for (std::size_t k = 0; k < 3; ++k) {
    cumulative += ratios[k];
    const std::size_t end =
        k == 2 ? count : std::min(count, static_cast<std::size_t>(std::llround(cumulative * count)));
    parts[k].assign(order.begin() + begin, order.begin() + end);
    begin = end;
  }
  return parts;
}

DatasetSplit split(std::span<const EncodedRecord> records, std::array<double, 3> ratios,
                   std::uint64_t seed) {
  auto parts = split_positions(records.size(), ratios, seed);
  DatasetSplit out;
  out.seed = seed;
  std::vector<EncodedRecord>* dst[3] = {&out.train, &out.validation, &out.test};
  for (std::size_t k = 0; k < 3; ++k) {
    dst[k]->reserve(parts[k].size());
    for (std::size_t pos : parts[k]) dst[k]->push_back(records[pos]);
  }
  return out;
}

Batch make_batch(std::span<const EncodedRecord> records, std::size_t n_fields) {
  std::vector<const EncodedRecord*> ptrs;
  ptrs.reserve(records.size());
  for (const auto& r : records) ptrs.push_back(&r);
  return make_batch(std::span<const EncodedRecord* const>(ptrs), n_fields);
}

Batch make_batch(std::span<const EncodedRecord* const> records, std::size_t n_fields) {
  Batch b;
  b.size = records.size();
  b.index.assign(n_fields, std::vector<std::uint32_t>(records.size()));
  b.labels.resize(records.size());
  for (std::size_t r = 0; r < records.size(); ++r) {
    const auto& rec = *records[r];
    if (rec.index.size() != n_fields) {
      throw ContractError("make_batch: record with " + std::to_string(rec.index.size()) +
                          " fields, expected " + std::to_string(n_fields));
    }
    for (std::size_t i = 0; i < n_fields; ++i) b.index[i][r] = rec.index[i];
    b.labels[r] = rec.label;
  }
  return b;
}

namespace {

std::vector<std::string> split_line(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == delim) {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(std::move(cur));
  return out;
}

int parse_label(const std::string& s, const std::string& path, std::size_t line_no) {
  if (s == "0") return 0;
  if (s == "1") return 1;
  throw DataError(path + ":" + std::to_string(line_no) + ": label must be 0 or 1, got '" + s + "'");
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return in;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path + "'");
  return out;
}

}  // namespace

std::vector<RawRecord> read_raw(const std::string& path, std::size_t n_fields, char delimiter) {
  auto in = open_in(path);
  std::vector<RawRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto cols = split_line(line, delimiter);
    if (cols.size() != n_fields + 1) {
      throw DataError(path + ":" + std::to_string(line_no) + ": expected " +
                      std::to_string(n_fields + 1) + " columns, got " + std::to_string(cols.size()));
    }
    RawRecord r;
    r.label = parse_label(cols[0], path, line_no);
    r.values.reserve(n_fields);
    for (std::size_t i = 1; i < cols.size(); ++i) {
      if (cols[i].empty()) {
        r.values.emplace_back(std::nullopt);
      } else {
        r.values.emplace_back(std::move(cols[i]));
      }
    }
    out.push_back(std::move(r));
  }
  return out;
}

void write_raw(const std::string& path, std::span<const RawRecord> records, char delimiter) {
  auto out = open_out(path);
  for (const auto& r : records) {
    out << r.label;
    for (const auto& v : r.values) {
      out << delimiter;
      if (v) out << *v;
    }
    out << '\n';
  }
}

std::vector<EncodedRecord> read_encoded(const std::string& path, const FieldSchema& schema,
                                        char delimiter) {
  auto in = open_in(path);
  std::vector<EncodedRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto cols = split_line(line, delimiter);
    if (cols.size() != schema.n() + 1) {
      throw DataError(path + ":" + std::to_string(line_no) + ": expected " +
                      std::to_string(schema.n() + 1) + " columns");
    }
    EncodedRecord r;
    r.label = parse_label(cols[0], path, line_no);
    r.index.resize(schema.n());
    for (std::size_t i = 0; i < schema.n(); ++i) {
      const auto& tok = cols[i + 1];
      std::uint32_t v = 0;
      auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (ec != std::errc() || p != tok.data() + tok.size() || v >= schema.field(i).vocab_size) {
        throw DataError(path + ":" + std::to_string(line_no) + ": bad index '" + tok +
                        "' for field " + std::to_string(i));
      }
      r.index[i] = v;
    }
    out.push_back(std::move(r));
  }
  return out;
}

void write_encoded(const std::string& path, std::span<const EncodedRecord> records,
                   char delimiter) {
  auto out = open_out(path);
  for (const auto& r : records) {
    out << r.label;
    for (auto idx : r.index) out << delimiter << idx;
    out << '\n';
  }
}

}  // namespace samctr
