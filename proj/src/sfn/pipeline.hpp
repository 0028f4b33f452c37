#pragma once

// End-to-end commands shared by the C API and the tests. Every command that
// writes artifacts also writes the resolved configuration next to them.

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "sfn/config.hpp"
#include "sfn/evaluation.hpp"
#include "sfn/gradcheck.hpp"
#include "sfn/model.hpp"
#include "sfn/training.hpp"

namespace sfn {

namespace fs = std::filesystem;

inline constexpr const char* kCheckpointName = "model.sfnc";

struct Model {
  RunConfig config;
  ParamStore<float> params;

  SkimFocusNet<float> net() const { return SkimFocusNet<float>(config.train.model, params); }
};

void write_snapshot(const RunConfig& cfg, const fs::path& out_dir);

/// `path` may be a checkpoint file or a run directory holding one.
fs::path checkpoint_file(const fs::path& path);
/// The snapshot next to a checkpoint, if present.
fs::path checkpoint_snapshot(const fs::path& path);

/// `data` may be a manifest or a dataset directory holding `<split>.jsonl`.
fs::path manifest_path(const fs::path& data, const std::string& split);

void run_synth(const RunConfig& cfg, const fs::path& out_dir);
void run_compose_multirep(const RunConfig& cfg, const fs::path& out_dir);

/// Trains on `<data>/train.jsonl`, validating on `<data>/val.jsonl` when it
/// exists. Writes model.sfnc (best validation epoch), trace.csv and
/// train_summary.json.
TrainResult run_train(const RunConfig& cfg, const fs::path& data_dir, const fs::path& out_dir,
                      std::ostream* log = nullptr);

Model init_model(const RunConfig& cfg);
Model load_model(const RunConfig& cfg, const fs::path& checkpoint);
void save_model(const Model& model, const fs::path& path);

/// Writes metrics.json and metrics.csv.
MetricsReport run_eval(const Model& model, const fs::path& manifest, const fs::path& out_dir);

/// Writes predictions.jsonl and, when `plot`, one SVG per video under plots/.
void run_predict(const Model& model, const fs::path& manifest, const fs::path& out_dir, bool plot);

/// Renders plots/<id>.svg for every record of a predictions.jsonl file.
std::size_t run_plot(const fs::path& predictions, const fs::path& out_dir);

/// Writes gradcheck.json; returns the reports.
std::vector<GradCheckReport> run_gradcheck(double tolerance, std::uint64_t seed, const fs::path& out_dir);

/// A grid is `key=v1,v2;key2=v3`; cells are the cartesian product with the
/// first key varying slowest.
std::vector<std::vector<std::pair<std::string, std::string>>> parse_grid(const std::string& grid);

/// Trains and tests every grid cell; writes ablation.csv with columns
/// cell, <grid keys>, MAE, OBO, best_epoch and returns its text.
std::string run_ablate(const RunConfig& base, const fs::path& data_dir, const std::string& grid,
                       const fs::path& out_dir, std::ostream* log = nullptr);

}  // namespace sfn
