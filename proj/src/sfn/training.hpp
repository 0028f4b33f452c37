#pragma once

// Joint optimisation of both branches: loss, Adam with a decaying learning
// rate, the epoch loop with per-epoch validation, and the trace CSV.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sfn/io.hpp"
#include "sfn/model.hpp"
#include "sfn/params.hpp"

namespace sfn {

enum class LrSchedule { cosine, constant };

std::string to_string(LrSchedule s);
LrSchedule parse_lr_schedule(const std::string& text);
std::string to_string(CountMode m);
CountMode parse_count_mode(const std::string& text);

struct TrainConfig {
  int epochs = 50;
  int batch_size = 8;
  double learning_rate = 1e-3;
  LrSchedule lr_schedule = LrSchedule::cosine;
  /// Global gradient-norm clip; 0 disables.
  double grad_clip = 5.0;
  std::uint64_t seed = 1;
  CountMode mode = CountMode::standard;
  ModelConfig model;
};

void validate(const TrainConfig& cfg);

struct LossBreakdown {
  double total = 0.0;
  double skim = 0.0;
  double focus = 0.0;
};

/// Mean squared error over positions where both masks are set. Throws on a
/// length or mask mismatch and on an all-masked map ("empty view").
double masked_mse(const DensityMap& pred, const DensityMap& gt);

/// Skim term from one map pair (0 when `skim_pred` is null), focus term
/// averaged over the view pairs; total = skim + focus.
LossBreakdown compute_loss(const DensityMap* skim_pred, const DensityMap* skim_gt,
                           std::span<const DensityMap> focus_pred, std::span<const DensityMap> focus_gt);

/// Learning rate at `step` of `total_steps`.
double learning_rate_at(const TrainConfig& cfg, std::int64_t step, std::int64_t total_steps);

class Adam {
 public:
  explicit Adam(const ParamStore<float>& params, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  /// Applies one update from `params.grads()`.
  void step(ParamStore<float>& params, double lr);

 private:
  double beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
  std::vector<Mat<float>> m_, v_;
};

/// One training example's forward pass with losses on the tape.
struct ItemLoss {
  Var total;
  double skim = 0.0;
  double focus = 0.0;
};

/// Skim loss on the contextual view (of the exemplar in specified mode) and
/// focus loss on one fine-grained view chosen by `view_seed`.
ItemLoss item_loss(const SkimFocusNet<float>& net, Tape<float>& tape, const AnnotatedSequence& seq,
                   const AnnotatedSequence* exemplar, CountMode mode, std::uint64_t view_seed);

struct EpochRecord {
  int epoch = 0;
  LossBreakdown loss;  // means over the epoch's steps
  double val_mae = 0.0;
  double val_obo = 0.0;
};

struct TrainResult {
  ParamStore<float> params;  // best validation epoch
  std::vector<EpochRecord> trace;
  std::vector<LossBreakdown> step_losses;
  int best_epoch = 0;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Trains from a seeded initialisation. Without a validation set the last
/// epoch is kept.
TrainResult train(const TrainConfig& cfg, const CountingSet& train_set, const CountingSet* val_set,
                  const EpochCallback& on_epoch = {});

/// Columns: epoch, L, L_S, L_F, val_MAE, val_OBO.
std::string trace_csv(const std::vector<EpochRecord>& trace);

}  // namespace sfn
