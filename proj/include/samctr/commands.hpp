#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "samctr/equivalence.hpp"
#include "samctr/errors.hpp"
#include "samctr/gradcheck.hpp"
#include "samctr/metrics.hpp"
#include "samctr/model.hpp"
#include "samctr/training.hpp"

namespace samctr {

/// Everything a subcommand may read. JSON config files mirror these fields;
/// command-line flags override them.
struct RunConfig {
  std::string subcommand;
  std::string data;        // data directory (or raw file for prepare)
  std::string layout;      // raw layout JSON for prepare; optional
  std::string checkpoint;  // evaluate
  std::string out = "out";

  std::string model = "SAM2_E";
  std::size_t d = 8;
  std::size_t layers = 1;
  std::string pairs = "all";  // SAM2 pair set: all | upper
  std::vector<std::size_t> hidden = {32, 32, 32};
  double dropout = 0.5;

  TrainConfig train;
  std::uint64_t seed = 0;

  std::size_t min_count = 10;
  std::array<double, 3> ratios = {0.8, 0.1, 0.1};

  // generate
  std::size_t fields = 10;
  std::uint32_t categories = 10;
  double sigma = 0.2;
  double noise = 0.3;
  std::array<std::size_t, 3> sizes = {100000, 10000, 10000};
  std::string family = "fm";  // fm | linear

  nlohmann::json to_json() const;
  /// Overlays the fields present in `j` onto `base`.
  static RunConfig from_json(const nlohmann::json& j, const RunConfig& base);
};

/// Exit status per error class: config/catalog 2, data 3, numeric 4,
/// verification 5, anything else 1.
int exit_code(ErrorKind kind) noexcept;

/// Writes "<out>/manifest.json" with the resolved config and a timestamp.
void write_manifest(const RunConfig& config, const nlohmann::json& extra = {});

/// Raw file -> vocabulary, three encoded splits and schema.json in `out`.
/// Without a layout every column is categorical and tab-separated, with
/// the field count taken from the first line.
DatasetSplit cmd_prepare(const RunConfig& config);

/// Synthetic DCM benchmark: train/validation/test.tsv, matching *_oracle.tsv
/// with the true click probabilities, schema.json and truth.json.
void cmd_generate(const RunConfig& config);

struct TrainOutcome {
  TrainHistory history;
  MetricsReport validation;
  MetricsReport test;  // zero when the data has no test split
  bool has_test = false;
};

/// Trains on `<data>/train.tsv` with early stopping on validation.tsv and
/// writes checkpoint.json, history.csv, history.json and metrics.json.
TrainOutcome cmd_train(const RunConfig& config);

/// Scores `<data>` (an encoded file) with a checkpoint.
MetricsReport cmd_evaluate(const RunConfig& config);

struct GradCheckOutcome {
  GradCheckResult result;
  bool passed = false;
  double tolerance = 1e-6;
};

/// Finite-difference check of one zoo model on a uniform schema (vocab 7,
/// batch 8). `corrupt` perturbs one analytic gradient entry before the
/// comparison, which must then fail.
GradCheckOutcome cmd_gradcheck(const std::string& model, std::size_t n, std::size_t d,
                               std::uint64_t seed, bool corrupt = false,
                               std::size_t layers = 1);

/// Propositions: "lr-sam1", "sam1-lr", "fm-sam2a", "sam2a-sam3a",
/// "fm-sam3a" (the chain) and "negative" (LR vs FM, expected to differ).
/// Runs `trials` random source instances on a 5-field, 4-category schema and
/// reports the worst one.
EquivalenceReport cmd_equivalence(const std::string& proposition, std::size_t trials,
                                  double tolerance, std::uint64_t seed);
const std::vector<std::string>& propositions();

ComplexityReport cmd_complexity(const std::string& model, std::size_t n, std::size_t d,
                                std::size_t layers);
/// CSV over n in [2, n_max], d in [1, d_max], L in [1, l_max].
std::string complexity_grid_csv(const std::vector<std::string>& models, std::size_t n_max,
                                std::size_t d_max, std::size_t l_max);

struct AblationRow {
  std::size_t layers = 0;
  std::size_t epochs = 0;
  std::size_t best_epoch = 0;
  double val_auc = 0.0;
  double test_auc = 0.0;
  double test_logloss = 0.0;
};

/// SAM3_A for each L in [l_min, l_max] on `<data>`; writes ablation.csv.
/// Throws ConfigError when l_min < 1 or l_min > l_max.
std::vector<AblationRow> cmd_ablation_layers(const RunConfig& config, std::size_t l_min,
                                             std::size_t l_max);
std::string ablation_csv(const std::vector<AblationRow>& rows);

}  // namespace samctr
