#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace samctr {

enum class FieldKind { kNumeric, kCategorical };

/// Every field reserves row 0 for missing values and row 1 for
/// out-of-vocabulary values; dictionary entries start at 2.
inline constexpr std::uint32_t kMissingIndex = 0;
inline constexpr std::uint32_t kOovIndex = 1;
inline constexpr std::uint32_t kFirstValueIndex = 2;

struct FieldDescriptor {
  std::string name;
  FieldKind kind = FieldKind::kCategorical;
  std::uint32_t vocab_size = kFirstValueIndex;
  std::map<std::string, std::uint32_t> dictionary;
};

struct EncodedRecord {
  int label = 0;
  std::vector<std::uint32_t> index;  // one entry per field
};

/// One raw input row: label plus one optional token per field (nullopt = missing).
struct RawRecord {
  int label = 0;
  std::vector<std::optional<std::string>> values;
};

/// Numeric discretization: floor(2 log x) for x > 2, trunc(x - 2) otherwise.
/// `log_base` defaults to e; any positive base other than 1 is accepted.
std::int64_t discretize_numeric(double x, double log_base = std::numbers::e);

class FieldSchema {
 public:
  FieldSchema() = default;
  explicit FieldSchema(std::vector<FieldDescriptor> fields, double log_base = std::numbers::e);

  /// Schema with bare vocabulary sizes and no dictionaries (synthetic data, tests).
  static FieldSchema uniform(std::size_t n, std::uint32_t vocab_size);
  static FieldSchema from_sizes(std::span<const std::uint32_t> vocab_sizes);

  std::size_t n() const noexcept { return fields_.size(); }
  const FieldDescriptor& field(std::size_t i) const { return fields_.at(i); }
  const std::vector<FieldDescriptor>& fields() const noexcept { return fields_; }
  std::vector<std::uint32_t> vocab_sizes() const;
  std::size_t total_vocab() const;
  double log_base() const noexcept { return log_base_; }

  /// Token a raw value maps to before dictionary lookup (numeric fields are
  /// discretized; categorical tokens pass through).
  std::string category_key(std::size_t field, const std::string& raw) const;

  /// Total: missing -> kMissingIndex, unseen -> kOovIndex.
  EncodedRecord encode(const RawRecord& raw) const;

  /// Throws ContractError if the record has the wrong arity or an index
  /// outside its field's vocabulary.
  void validate(const EncodedRecord& rec) const;

  bool same_shape(const FieldSchema& o) const { return vocab_sizes() == o.vocab_sizes(); }

  nlohmann::json to_json() const;
  static FieldSchema from_json(const nlohmann::json& j);

 private:
  std::vector<FieldDescriptor> fields_;
  double log_base_ = std::numbers::e;
};

/// Column layout of a raw file: field names, kinds, delimiter.
struct RawLayout {
  std::vector<std::string> names;
  std::vector<FieldKind> kinds;
  char delimiter = '\t';
  double log_base = std::numbers::e;

  static RawLayout from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

/// Two passes: count category keys per field, then index keys seen at least
/// `min_count` times in sorted key order. Throws DomainError on empty input
/// or min_count < 1.
FieldSchema build_vocab(std::span<const RawRecord> records, const RawLayout& layout,
                        std::size_t min_count = 10);

std::vector<EncodedRecord> encode_all(const FieldSchema& schema, std::span<const RawRecord> raw);

struct DatasetSplit {
  std::vector<EncodedRecord> train;
  std::vector<EncodedRecord> validation;
  std::vector<EncodedRecord> test;
  std::uint64_t seed = 0;
};

/// Record positions after the seeded shuffle, sliced per ratio. Used by
/// `split` and by callers that need to carry side data (oracle scores)
/// through the same permutation.
std::array<std::vector<std::size_t>, 3> split_positions(std::size_t count,
                                                        std::array<double, 3> ratios,
                                                        std::uint64_t seed);

/// Uniform random permutation under `seed`, then contiguous slicing with
/// boundaries round(N * cumulative ratio). Ratios must be positive and sum
/// to 1; throws DomainError otherwise or when N < 3.
DatasetSplit split(std::span<const EncodedRecord> records,
                   std::array<double, 3> ratios = {0.8, 0.1, 0.1}, std::uint64_t seed = 0);

/// Field-major mini-batch: `index[i]` holds the category rows of field i.
struct Batch {
  std::size_t size = 0;
  std::vector<std::vector<std::uint32_t>> index;
  std::vector<double> labels;
};

Batch make_batch(std::span<const EncodedRecord> records, std::size_t n_fields);
Batch make_batch(std::span<const EncodedRecord* const> records, std::size_t n_fields);

// Text I/O. Lines are "label<delim>v1<delim>...<delim>vn"; empty = missing.

std::vector<RawRecord> read_raw(const std::string& path, std::size_t n_fields, char delimiter);
void write_raw(const std::string& path, std::span<const RawRecord> records, char delimiter);
std::vector<EncodedRecord> read_encoded(const std::string& path, const FieldSchema& schema,
                                        char delimiter = '\t');
void write_encoded(const std::string& path, std::span<const EncodedRecord> records,
                   char delimiter = '\t');

}  // namespace samctr
