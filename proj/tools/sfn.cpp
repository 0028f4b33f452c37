// sfn: command-line front end over the skimfocus C API.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "skimfocus/skimfocus.h"

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

struct UsageError {
  std::string message;
};
struct RuntimeError {
  std::string message;
};

void check_usage(sfn_status s) {
  if (s != SFN_OK) throw UsageError{sfn_last_error()};
}

void check_run(sfn_status s) {
  if (s != SFN_OK) throw RuntimeError{sfn_last_error()};
}

struct ConfigDeleter {
  void operator()(sfn_config* c) const { sfn_config_destroy(c); }
};
struct ModelDeleter {
  void operator()(sfn_model* m) const { sfn_model_destroy(m); }
};
using ConfigPtr = std::unique_ptr<sfn_config, ConfigDeleter>;
using ModelPtr = std::unique_ptr<sfn_model, ModelDeleter>;

std::string fetch(sfn_status (*call)(char*, size_t, size_t*)) {
  size_t needed = 0;
  call(nullptr, 0, &needed);
  std::string out(needed, '\0');
  check_run(call(out.data(), out.size(), &needed));
  out.resize(needed - 1);
  return out;
}

std::string manifest_for(const std::string& data, const std::string& split) {
  size_t needed = 0;
  sfn_manifest_path(data.c_str(), split.c_str(), nullptr, 0, &needed);
  std::string out(needed, '\0');
  check_run(sfn_manifest_path(data.c_str(), split.c_str(), out.data(), out.size(), &needed));
  out.resize(needed - 1);
  return out;
}

/// Options shared by every subcommand.
struct Common {
  std::string config_file;
  std::string preset;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_file, "Flat key=value configuration file")->check(CLI::ExistingFile);
  cmd->add_option("--preset", c.preset, "Configuration preset: desk or full");
  cmd->add_option("--set", c.overrides, "Override one key, key=value (repeatable)");
  cmd->add_option("--seed", c.seed, "Seed (dataset seed for synth and compose-multirep)");
  cmd->add_option("--out", c.out, "Output directory (default $SFN_OUTPUT_ROOT/<command> or ./runs/<command>)");
}

std::string output_dir(const Common& c, const std::string& command) {
  if (!c.out.empty()) return c.out;
  const char* root = std::getenv("SFN_OUTPUT_ROOT");
  const std::filesystem::path base = root && *root ? std::filesystem::path(root) : std::filesystem::path("runs");
  return (base / command).string();
}

/// defaults < preset < checkpoint snapshot < file < --set < dedicated flags.
ConfigPtr resolve(const Common& c, const std::string& checkpoint, const std::string& seed_key,
                  const std::vector<std::pair<std::string, std::string>>& flags) {
  sfn_config* raw = nullptr;
  check_run(sfn_config_create(&raw));
  ConfigPtr cfg(raw);
  if (!c.preset.empty()) check_usage(sfn_config_apply_preset(cfg.get(), c.preset.c_str()));
  if (!checkpoint.empty()) check_run(sfn_config_load_checkpoint_snapshot(cfg.get(), checkpoint.c_str(), nullptr));
  if (!c.config_file.empty()) check_usage(sfn_config_load_file(cfg.get(), c.config_file.c_str()));
  for (const auto& o : c.overrides) check_usage(sfn_config_apply_override(cfg.get(), o.c_str()));
  if (c.seed) check_usage(sfn_config_set(cfg.get(), seed_key.c_str(), std::to_string(*c.seed).c_str()));
  for (const auto& [key, value] : flags) {
    if (!value.empty()) check_usage(sfn_config_set(cfg.get(), key.c_str(), value.c_str()));
  }
  return cfg;
}

ModelPtr load(const sfn_config* cfg, const std::string& checkpoint) {
  sfn_model* raw = nullptr;
  check_run(sfn_model_load(cfg, checkpoint.c_str(), &raw));
  return ModelPtr(raw);
}

std::string nan_text(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::string keys_help() {
  std::string text = "\nConfiguration keys (key, default, meaning):\n";
  std::string table = fetch(sfn_config_describe);
  std::size_t start = 0;
  while (start < table.size()) {
    const auto end = table.find('\n', start);
    std::string line = table.substr(start, end - start);
    const auto t1 = line.find('\t'), t2 = line.find('\t', t1 + 1);
    char buf[256];
    std::snprintf(buf, sizeof buf, "  %-36s %-10s %s\n", line.substr(0, t1).c_str(),
                  line.substr(t1 + 1, t2 - t1 - 1).c_str(), line.substr(t2 + 1).c_str());
    text += buf;
    start = end + 1;
  }
  return text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Repetition counting with a skim branch guiding a focus branch", "sfn"};
  app.require_subcommand(1);
  app.footer(keys_help() + "\nEnvironment: SFN_OUTPUT_ROOT sets the default output root.\n"
             "Exit status: 0 success, 1 usage error, 2 runtime failure.");
  app.set_version_flag("--version", std::string(sfn_version()));

  Common common;
  std::string data, checkpoint, split = "test", mode, sampling, n_instructive, grid, predictions;
  bool plot = false, quiet = false;
  double tolerance = 1e-4;

  auto* synth = app.add_subcommand("synth", "Generate a single-action synthetic dataset");
  add_common(synth, common);

  auto* compose = app.add_subcommand("compose-multirep", "Compose multi-action videos with class exemplars");
  add_common(compose, common);

  auto* train = app.add_subcommand("train", "Train both branches and keep the best validation checkpoint");
  add_common(train, common);
  train->add_option("--data", data, "Dataset directory with train.jsonl (and val.jsonl)")->required();
  train->add_option("--mode", mode, "standard or specified");
  train->add_option("--sampling", sampling, "random, uniform or top_nc");
  train->add_option("--n-instructive", n_instructive, "Instructive frames N_C");
  train->add_flag("--quiet", quiet, "Do not log epochs");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint (MAE, OBO, count-range buckets)");
  auto* predict = app.add_subcommand("predict", "Write per-video counts and density maps");
  for (auto* cmd : {eval, predict}) {
    add_common(cmd, common);
    cmd->add_option("--checkpoint", checkpoint, "Checkpoint file or training run directory")->required();
    cmd->add_option("--data", data, "Dataset directory or manifest")->required();
    cmd->add_option("--split", split, "Split used when --data is a directory")->capture_default_str();
    cmd->add_option("--mode", mode, "standard or specified");
    cmd->add_option("--sampling", sampling, "random, uniform or top_nc");
    cmd->add_option("--n-instructive", n_instructive, "Instructive frames N_C");
  }
  predict->add_flag("--plot", plot, "Also render SVG density plots");

  auto* plot_cmd = app.add_subcommand("plot", "Render ground-truth vs predicted density plots");
  add_common(plot_cmd, common);
  plot_cmd->add_option("--predictions", predictions, "predictions.jsonl written by predict, or its directory")
      ->required();

  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of every differentiable block");
  add_common(gradcheck, common);
  gradcheck->add_option("--tolerance", tolerance, "Maximum relative error")->capture_default_str();

  auto* ablate = app.add_subcommand("ablate", "Train and test every cell of a configuration grid");
  add_common(ablate, common);
  ablate->add_option("--data", data, "Dataset directory with train/val/test manifests")->required();
  ablate->add_option("--grid", grid, "key=v1,v2;key2=v3 (cartesian product)")->required();
  ablate->add_flag("--quiet", quiet, "Do not log epochs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitUsage;
  }

  const std::vector<std::pair<std::string, std::string>> model_flags{
      {"mode", mode}, {"hyperparams.sampling", sampling}, {"hyperparams.N_C", n_instructive}};
  try {
    if (synth->parsed() || compose->parsed()) {
      const std::string name = synth->parsed() ? "synth" : "compose-multirep";
      auto cfg = resolve(common, "", "synth.seed", {});
      const std::string out = output_dir(common, name);
      check_run(synth->parsed() ? sfn_synth(cfg.get(), out.c_str()) : sfn_compose_multirep(cfg.get(), out.c_str()));
      std::cout << "wrote dataset to " << out << '\n';
    } else if (train->parsed()) {
      auto cfg = resolve(common, "", "seed", model_flags);
      const std::string out = output_dir(common, "train");
      check_run(sfn_train(cfg.get(), data.c_str(), out.c_str(), quiet ? 0 : 1));
      std::cout << "wrote checkpoint and trace to " << out << '\n';
    } else if (eval->parsed()) {
      auto cfg = resolve(common, checkpoint, "seed", model_flags);
      auto model = load(cfg.get(), checkpoint);
      const std::string out = output_dir(common, "eval");
      double mae = 0.0, obo = 0.0;
      check_run(sfn_evaluate(model.get(), manifest_for(data, split).c_str(), out.c_str(), &mae, &obo));
      std::cout << "MAE " << nan_text(mae) << "  OBO " << nan_text(obo) << "  (report in " << out << ")\n";
    } else if (predict->parsed()) {
      auto cfg = resolve(common, checkpoint, "seed", model_flags);
      auto model = load(cfg.get(), checkpoint);
      const std::string out = output_dir(common, "predict");
      check_run(sfn_predict(model.get(), manifest_for(data, split).c_str(), out.c_str(), plot ? 1 : 0));
      std::cout << "wrote predictions to " << out << '\n';
    } else if (plot_cmd->parsed()) {
      auto cfg = resolve(common, "", "seed", {});
      std::filesystem::path source = predictions;
      if (std::filesystem::is_directory(source)) source /= "predictions.jsonl";
      const std::string out = output_dir(common, "plot");
      size_t rendered = 0;
      check_run(sfn_plot(source.string().c_str(), out.c_str(), &rendered));
      check_run(sfn_config_write_snapshot(cfg.get(), out.c_str()));
      std::cout << "rendered " << rendered << " plots under " << out << "/plots\n";
    } else if (gradcheck->parsed()) {
      auto cfg = resolve(common, "", "seed", {});
      size_t needed = 0;
      sfn_config_get(cfg.get(), "seed", nullptr, 0, &needed);
      std::string seed(needed, '\0');
      check_run(sfn_config_get(cfg.get(), "seed", seed.data(), seed.size(), &needed));
      const std::string out = output_dir(common, "gradcheck");
      int passed = 0;
      double worst = 0.0;
      check_run(sfn_gradcheck(tolerance, std::stoull(seed), out.c_str(), &passed, &worst));
      check_run(sfn_config_write_snapshot(cfg.get(), out.c_str()));
      std::ifstream in(std::filesystem::path(out) / "gradcheck.json");
      for (const auto& r : nlohmann::json::parse(in)) {
        std::printf("%s  %-56s max rel err %.3e\n", r.at("passed").get<bool>() ? "PASS" : "FAIL",
                    r.at("name").get<std::string>().c_str(), r.at("max_rel_error").get<double>());
      }
      std::printf("%s (worst %.3e, tolerance %.1e)\n", passed ? "all checks passed" : "gradient check FAILED", worst,
                  tolerance);
      if (!passed) return kExitRuntime;
    } else if (ablate->parsed()) {
      auto cfg = resolve(common, "", "seed", {});
      const std::string out = output_dir(common, "ablate");
      check_run(sfn_ablate(cfg.get(), data.c_str(), grid.c_str(), out.c_str(), quiet ? 0 : 1));
      std::ifstream in(std::filesystem::path(out) / "ablation.csv");
      std::cout << in.rdbuf();
    }
  } catch (const UsageError& e) {
    std::cerr << "sfn: " << e.message << '\n';
    return kExitUsage;
  } catch (const RuntimeError& e) {
    std::cerr << "sfn: " << e.message << '\n';
    return kExitRuntime;
  }
  return 0;
}
