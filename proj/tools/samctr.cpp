// samctr: data preparation, training and verification front end.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "samctr/commands.hpp"

using namespace samctr;

namespace {

struct Overrides {
  std::string config_path;
  std::uint64_t seed = 0;
  std::string model, data, out, layout, checkpoint, family, pairs;
  std::size_t d = 0, layers = 0, min_count = 0, batch = 0, epochs = 0, patience = 0;
  std::size_t fields = 0;
  std::uint32_t categories = 0;
  double lr = 0, l2 = 0, dropout = 0, sigma = 0, noise = 0;
  std::vector<double> ratios;
  std::vector<std::size_t> sizes, hidden;
};

nlohmann::json read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path);
  try {
    nlohmann::json j;
    in >> j;
    return j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

// True when the flag was passed, on the main app or the active subcommand.
bool given(const CLI::App& app, const std::string& name) {
  if (const auto* opt = app.get_option_no_throw(name); opt && opt->count() > 0) return true;
  for (const auto* sub : app.get_subcommands()) {
    if (const auto* opt = sub->get_option_no_throw(name); opt && opt->count() > 0) return true;
  }
  return false;
}

RunConfig resolve(const CLI::App& app, const Overrides& o, const std::string& subcommand) {
  RunConfig c;
  if (!o.config_path.empty()) c = RunConfig::from_json(read_config_file(o.config_path), c);
  c.subcommand = subcommand;
  if (given(app, "--seed")) c.seed = o.seed;
  if (given(app, "--model")) c.model = o.model;
  if (given(app, "--data")) c.data = o.data;
  if (given(app, "--out")) c.out = o.out;
  if (given(app, "--layout")) c.layout = o.layout;
  if (given(app, "--checkpoint")) c.checkpoint = o.checkpoint;
  if (given(app, "--family")) c.family = o.family;
  if (given(app, "--d")) c.d = o.d;
  if (given(app, "--layers")) c.layers = o.layers;
  if (given(app, "--pairs")) c.pairs = o.pairs;
  if (given(app, "--min-count")) c.min_count = o.min_count;
  if (given(app, "--batch")) c.train.batch_size = o.batch;
  if (given(app, "--epochs")) c.train.epochs = o.epochs;
  if (given(app, "--patience")) c.train.patience = o.patience;
  if (given(app, "--lr")) c.train.learning_rate = o.lr;
  if (given(app, "--l2")) c.train.l2 = o.l2;
  if (given(app, "--dropout")) c.dropout = o.dropout;
  if (given(app, "--hidden")) c.hidden = o.hidden;
  if (given(app, "--fields")) c.fields = o.fields;
  if (given(app, "--categories")) c.categories = o.categories;
  if (given(app, "--sigma")) c.sigma = o.sigma;
  if (given(app, "--noise")) c.noise = o.noise;
  if (given(app, "--ratios")) {
    if (o.ratios.size() != 3) throw ConfigError("--ratios takes three values");
    c.ratios = {o.ratios[0], o.ratios[1], o.ratios[2]};
  }
  if (given(app, "--sizes")) {
    if (o.sizes.size() != 3) throw ConfigError("--sizes takes three values");
    c.sizes = {o.sizes[0], o.sizes[1], o.sizes[2]};
  }
  c.train.seed = c.seed;
  c.train.validate();
  return c;
}

void print_json(const nlohmann::json& j) { std::cout << j.dump(2) << '\n'; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"samctr: self-attention CTR model zoo"};
  app.require_subcommand(1);
  app.fallthrough();

  Overrides o;
  app.add_option("--config", o.config_path, "JSON run config; flags override it");
  app.add_option("--seed", o.seed, "Seed for every random stream");
  app.add_option("--model", o.model, "Model name");
  app.add_option("--data", o.data, "Data directory (raw or encoded file for prepare/evaluate)");
  app.add_option("--out", o.out, "Output directory");
  app.add_option("--d", o.d, "Embedding dimension");
  app.add_option("--layers", o.layers, "Interaction layers (SAM3, AutoInt)");
  app.add_option("--pairs", o.pairs, "SAM2 pair set: all (ordered, with i = j) or upper (i < j)");
  app.add_option("--min-count", o.min_count, "Vocabulary threshold");
  app.add_option("--lr", o.lr, "Adam learning rate");
  app.add_option("--batch", o.batch, "Mini-batch size");
  app.add_option("--l2", o.l2, "L2 coefficient");
  app.add_option("--dropout", o.dropout, "Dropout on MLP hidden layers");
  app.add_option("--hidden", o.hidden, "MLP hidden widths");
  app.add_option("--epochs", o.epochs, "Maximum epochs");
  app.add_option("--patience", o.patience, "Early-stop patience on validation AUC");

  auto* prepare = app.add_subcommand("prepare", "Build vocabulary and encoded splits from a raw file");
  prepare->add_option("--layout", o.layout, "Raw layout JSON (names, kinds, delimiter)");
  prepare->add_option("--ratios", o.ratios, "Train/validation/test ratios")->expected(3);

  auto* generate = app.add_subcommand("generate", "Synthetic discrete-choice benchmark");
  generate->add_option("--fields", o.fields, "Number of fields");
  generate->add_option("--categories", o.categories, "Categories per field");
  generate->add_option("--sigma", o.sigma, "Std of true parameters");
  generate->add_option("--noise", o.noise, "Logit noise scale k");
  generate->add_option("--sizes", o.sizes, "Train/validation/test record counts")->expected(3);
  generate->add_option("--family", o.family, "fm or linear");

  auto* train_cmd = app.add_subcommand("train", "Train a model with early stopping");
  auto* evaluate = app.add_subcommand("evaluate", "Score an encoded file with a checkpoint");
  evaluate->add_option("--checkpoint", o.checkpoint, "checkpoint.json")->required();

  std::size_t n = 5;
  bool corrupt = false, all_models = false;
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient check");
  gradcheck->add_option("--n", n, "Number of fields");
  gradcheck->add_flag("--corrupt", corrupt, "Perturb one analytic gradient (must fail)");
  gradcheck->add_flag("--all", all_models, "Check every catalog model");

  std::string prop = "all";
  std::size_t trials = 3;
  double tol = 1e-8;
  auto* equivalence = app.add_subcommand("equivalence", "Verify the expressiveness constructions");
  equivalence->add_option("--prop", prop, "Proposition id or 'all'");
  equivalence->add_option("--trials", trials, "Random source instances");
  equivalence->add_option("--tol", tol, "Logit tolerance");

  bool grid = false;
  std::size_t n_max = 8, d_max = 8, l_max = 3;
  auto* complexity = app.add_subcommand("complexity", "Parameter and operation counts");
  complexity->add_option("--n", n, "Number of fields");
  complexity->add_flag("--grid", grid, "Sweep n, d and L and write complexity_grid.csv");
  complexity->add_option("--n-max", n_max);
  complexity->add_option("--d-max", d_max);
  complexity->add_option("--l-max", l_max);

  std::size_t abl_min = 1, abl_max = 4;
  auto* ablation = app.add_subcommand("ablation-layers", "SAM3_A over a range of layer counts");
  ablation->add_option("--l-min", abl_min);
  ablation->add_option("--l-max", abl_max);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*prepare) {
      const auto parts = cmd_prepare(resolve(app, o, "prepare"));
      std::printf("train %zu, validation %zu, test %zu\n", parts.train.size(), parts.validation.size(),
                  parts.test.size());
    } else if (*generate) {
      const RunConfig c = resolve(app, o, "generate");
      cmd_generate(c);
      std::printf("wrote %s\n", c.out.c_str());
    } else if (*train_cmd) {
      const auto r = cmd_train(resolve(app, o, "train"));
      std::printf("best epoch %zu, validation AUC %.6f, logloss %.6f\n", r.history.best_epoch,
                  r.validation.auc, r.validation.logloss);
      if (r.has_test) std::printf("test AUC %.6f, logloss %.6f\n", r.test.auc, r.test.logloss);
    } else if (*evaluate) {
      print_json(cmd_evaluate(resolve(app, o, "evaluate")).to_json());
    } else if (*gradcheck) {
      const RunConfig c = resolve(app, o, "gradcheck");
      const std::size_t d = given(app, "--d") ? c.d : 4;
      std::vector<std::string> names = all_models ? catalog_models() : std::vector<std::string>{c.model};
      bool ok = true;
      for (const auto& name : names) {
        const auto r = cmd_gradcheck(name, n, d, c.seed, corrupt, c.layers);
        std::printf("%-12s %s  max rel err %.3e  (%zu entries, worst %s[%zu])\n", name.c_str(),
                    r.passed ? "PASS" : "FAIL", r.result.max_relative_error, r.result.checked,
                    r.result.worst_slot.c_str(), r.result.worst_index);
        ok = ok && r.passed;
      }
      if (!ok) return exit_code(ErrorKind::kVerification);
    } else if (*equivalence) {
      const RunConfig c = resolve(app, o, "equivalence");
      std::vector<std::string> ids = prop == "all" ? propositions() : std::vector<std::string>{prop};
      nlohmann::json reports = nlohmann::json::array();
      bool ok = true;
      for (const auto& id : ids) {
        const auto r = cmd_equivalence(id, trials, tol, c.seed);
        std::printf("%-12s %s  max |diff| %.3e over %zu records%s\n", id.c_str(),
                    r.ok() ? "PASS" : "FAIL", r.max_abs_diff, r.samples,
                    r.expect_difference ? " (expected to differ)" : "");
        nlohmann::json j = r.to_json();
        j["proposition"] = id;
        reports.push_back(j);
        ok = ok && r.ok();
      }
      std::filesystem::create_directories(c.out);
      std::ofstream(std::filesystem::path(c.out) / "equivalence.json") << reports.dump(2) << '\n';
      write_manifest(c, reports);
      if (!ok) return exit_code(ErrorKind::kVerification);
    } else if (*complexity) {
      const RunConfig c = resolve(app, o, "complexity");
      if (grid) {
        std::filesystem::create_directories(c.out);
        const std::vector<std::string> models = given(app, "--model")
                                                    ? std::vector<std::string>{c.model}
                                                    : catalog_models();
        std::ofstream(std::filesystem::path(c.out) / "complexity_grid.csv")
            << complexity_grid_csv(models, n_max, d_max, l_max);
        std::printf("wrote %s/complexity_grid.csv\n", c.out.c_str());
      } else {
        const bool layered = c.model == "SAM3_A" || c.model == "SAM3_E" || c.model == "AutoInt";
        if (!layered && c.layers != 1) {
          std::fprintf(stderr, "warning: --layers ignored for %s\n", c.model.c_str());
        }
        print_json(cmd_complexity(c.model, n, c.d, layered ? c.layers : 1).to_json());
      }
    } else if (*ablation) {
      const auto rows = cmd_ablation_layers(resolve(app, o, "ablation-layers"), abl_min, abl_max);
      std::fputs(ablation_csv(rows).c_str(), stdout);
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
