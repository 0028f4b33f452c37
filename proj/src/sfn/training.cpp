#include "sfn/training.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

#include "sfn/error.hpp"
#include "sfn/evaluation.hpp"
#include "sfn/random.hpp"

namespace sfn {

std::string to_string(LrSchedule s) { return s == LrSchedule::cosine ? "cosine" : "constant"; }

LrSchedule parse_lr_schedule(const std::string& text) {
  if (text == "cosine") return LrSchedule::cosine;
  if (text == "constant") return LrSchedule::constant;
  fail(ErrorCode::invalid_argument, "unknown lr schedule '" + text + "' (expected cosine or constant)");
}

std::string to_string(CountMode m) { return m == CountMode::standard ? "standard" : "specified"; }

CountMode parse_count_mode(const std::string& text) {
  if (text == "standard") return CountMode::standard;
  if (text == "specified") return CountMode::specified;
  fail(ErrorCode::invalid_argument, "unknown mode '" + text + "' (expected standard or specified)");
}

void validate(const TrainConfig& cfg) {
  if (cfg.epochs < 1) fail(ErrorCode::invalid_argument, "epochs must be >= 1");
  if (cfg.batch_size < 1) fail(ErrorCode::invalid_argument, "batch_size must be >= 1");
  if (!(cfg.learning_rate > 0.0) || !std::isfinite(cfg.learning_rate)) {
    fail(ErrorCode::invalid_argument, "learning_rate must be a positive finite number");
  }
  if (!(cfg.grad_clip >= 0.0)) fail(ErrorCode::invalid_argument, "grad_clip must be >= 0");
  validate(cfg.model);
}

double masked_mse(const DensityMap& pred, const DensityMap& gt) {
  if (pred.size() != gt.size() || pred.mask.size() != pred.size() || gt.mask.size() != gt.size()) {
    fail(ErrorCode::invalid_argument, "density maps differ in length (" + std::to_string(pred.size()) + " vs " +
                                          std::to_string(gt.size()) + ")");
  }
  if (pred.mask != gt.mask) fail(ErrorCode::invalid_argument, "mask mismatch between prediction and target");
  double total = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!pred.mask[i]) continue;
    const double diff = pred.values[i] - gt.values[i];
    total += diff * diff;
    ++n;
  }
  if (n == 0) fail(ErrorCode::invalid_argument, "empty view");
  return total / static_cast<double>(n);
}

LossBreakdown compute_loss(const DensityMap* skim_pred, const DensityMap* skim_gt,
                           std::span<const DensityMap> focus_pred, std::span<const DensityMap> focus_gt) {
  if (focus_pred.size() != focus_gt.size()) {
    fail(ErrorCode::invalid_argument, "focus prediction and target counts differ");
  }
  if (focus_pred.empty()) fail(ErrorCode::invalid_argument, "no focus views");
  if ((skim_pred == nullptr) != (skim_gt == nullptr)) {
    fail(ErrorCode::invalid_argument, "skim prediction and target must be given together");
  }
  LossBreakdown loss;
  if (skim_pred) loss.skim = masked_mse(*skim_pred, *skim_gt);
  for (std::size_t v = 0; v < focus_pred.size(); ++v) loss.focus += masked_mse(focus_pred[v], focus_gt[v]);
  loss.focus /= static_cast<double>(focus_pred.size());
  loss.total = loss.skim + loss.focus;
  return loss;
}

double learning_rate_at(const TrainConfig& cfg, std::int64_t step, std::int64_t total_steps) {
  if (cfg.lr_schedule == LrSchedule::constant || total_steps <= 0) return cfg.learning_rate;
  const double progress = std::clamp(static_cast<double>(step) / static_cast<double>(total_steps), 0.0, 1.0);
  return cfg.learning_rate * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

Adam::Adam(const ParamStore<float>& params, double beta1, double beta2, double eps)
    : beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_.push_back(Mat<float>::Zero(params.value(i).rows(), params.value(i).cols()));
    v_.push_back(m_.back());
  }
}

void Adam::step(ParamStore<float>& params, double lr) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  const float b1 = static_cast<float>(beta1_), b2 = static_cast<float>(beta2_);
  const float step_size = static_cast<float>(lr / c1);
  const float inv_c2 = static_cast<float>(1.0 / c2);
  const float eps = static_cast<float>(eps_);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Mat<float>& g = params.grads()[i];
    m_[i] = b1 * m_[i] + (1.0f - b1) * g;
    v_[i] = b2 * v_[i] + (1.0f - b2) * g.cwiseProduct(g);
    params.value(i).array() -= step_size * m_[i].array() / ((v_[i].array() * inv_c2).sqrt() + eps);
  }
}

namespace {

Mat<float> target_column(const DensityMap& gt, std::size_t rows) {
  Mat<float> target(static_cast<Eigen::Index>(rows), 1);
  for (std::size_t i = 0; i < rows; ++i) target(static_cast<Eigen::Index>(i), 0) = static_cast<float>(gt.values[i]);
  return target;
}

Var view_guidance(const SkimFocusNet<float>& net, Tape<float>& tape, const AnnotatedSequence& source,
                  const ViewPlan& plan, std::uint64_t seed, Var& skim_loss) {
  const ModelConfig& cfg = net.config();
  const PreparedView<float> context =
      prepare_view<float>(source.features, plan.contextual_indices, plan.context_mask, cfg.trim_padding);
  const auto skim = net.skim_forward(tape, context.features, context.mask);
  const DensityMap gt = build_gt_density(source, plan.contextual_indices, plan.context_mask);
  skim_loss = tape.masked_mse(skim.confidence, target_column(gt, context.mask.size()), context.mask);

  const ConfidenceMap confidence = to_density_map(tape.value(skim.confidence), plan.context_mask);
  const std::vector<Index> picked =
      sample_instructive(confidence, cfg.sampling, effective_instructive(cfg, plan.context_mask), seed);
  FeatureMatrix rows(static_cast<Eigen::Index>(picked.size()), source.feature_width());
  for (std::size_t i = 0; i < picked.size(); ++i) {
    rows.row(static_cast<Eigen::Index>(i)) =
        source.features.row(plan.contextual_indices[static_cast<std::size_t>(picked[i])]);
  }
  const Embedding<float> encoded = net.encode(tape, rows, Mask(picked.size(), true));
  return net.pool_guidance(tape, encoded);
}

}  // namespace

ItemLoss item_loss(const SkimFocusNet<float>& net, Tape<float>& tape, const AnnotatedSequence& seq,
                   const AnnotatedSequence* exemplar, CountMode mode, std::uint64_t view_seed) {
  const ModelConfig& cfg = net.config();
  if (mode == CountMode::specified && exemplar == nullptr) {
    fail(ErrorCode::invalid_argument, "specified training item '" + seq.id + "' has no exemplar");
  }
  const ViewPlan plan = decompose(seq, cfg.views);
  ItemLoss out;
  Var skim_loss;
  Var guidance;
  if (cfg.ablations.skim_enabled) {
    const AnnotatedSequence& source = mode == CountMode::specified ? *exemplar : seq;
    const ViewPlan skim_plan = mode == CountMode::specified ? decompose(source, cfg.views) : plan;
    guidance = view_guidance(net, tape, source, skim_plan, view_seed, skim_loss);
    out.skim = static_cast<double>(tape.value(skim_loss)(0, 0));
  } else {
    guidance = net.zero_guidance(tape);
  }

  Rng rng(view_seed);
  const std::size_t v = static_cast<std::size_t>(rng() % plan.num_views());
  const PreparedView<float> view =
      prepare_view<float>(seq.features, plan.fine_views[v], plan.fine_masks[v], cfg.trim_padding);
  const Var density = net.focus_view(tape, view.features, view.mask, guidance);
  const DensityMap gt = build_gt_density(seq, plan.fine_views[v], plan.fine_masks[v], plan.downsample_rate);
  const Var focus_loss = tape.masked_mse(density, target_column(gt, view.mask.size()), view.mask);
  out.focus = static_cast<double>(tape.value(focus_loss)(0, 0));
  out.total = skim_loss.valid() ? tape.add(skim_loss, focus_loss) : focus_loss;
  return out;
}

namespace {

void clip_gradients(ParamStore<float>& params, double max_norm) {
  if (max_norm <= 0.0) return;
  double sq = 0.0;
  for (const auto& g : params.grads()) sq += g.template cast<double>().squaredNorm();
  const double norm = std::sqrt(sq);
  if (norm <= max_norm) return;
  const float factor = static_cast<float>(max_norm / norm);
  for (auto& g : params.grads()) g *= factor;
}

bool better(const EpochRecord& a, const EpochRecord& best) {
  const double ma = std::isnan(a.val_mae) ? INFINITY : a.val_mae;
  const double mb = std::isnan(best.val_mae) ? INFINITY : best.val_mae;
  if (ma != mb) return ma < mb;
  return a.val_obo > best.val_obo;
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const CountingSet& train_set, const CountingSet* val_set,
                  const EpochCallback& on_epoch) {
  validate(cfg);
  if (train_set.size() == 0) fail(ErrorCode::invalid_argument, "training set is empty");
  for (const auto& seq : train_set.items) {
    if (seq.feature_width() != cfg.model.d_in) {
      fail(ErrorCode::invalid_argument, "sequence '" + seq.id + "' has " + std::to_string(seq.feature_width()) +
                                            " features, model expects " + std::to_string(cfg.model.d_in));
    }
  }
  const std::vector<ParamSpec> specs = model_param_specs(cfg.model);
  ParamStore<float> params = init_params<float>(specs, derive_seed(cfg.seed, fnv1a("init")));
  const SkimFocusNet<float> net(cfg.model, params);
  Adam adam(params);

  const std::size_t n = train_set.size();
  const std::size_t batch = static_cast<std::size_t>(cfg.batch_size);
  const std::int64_t steps_per_epoch = static_cast<std::int64_t>((n + batch - 1) / batch);
  const std::int64_t total_steps = steps_per_epoch * cfg.epochs;

  TrainResult result;
  std::int64_t step = 0;
  std::vector<std::size_t> order(n);
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(derive_seed(cfg.seed, fnv1a("shuffle"), static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    LossBreakdown epoch_loss;
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t stop = std::min(n, start + batch);
      const float weight = 1.0f / static_cast<float>(stop - start);
      params.zero_grads();
      LossBreakdown step_loss;
      for (std::size_t k = start; k < stop; ++k) {
        const std::size_t i = order[k];
        Tape<float> tape;
        const std::uint64_t item_seed =
            derive_seed(cfg.seed, fnv1a(train_set.items[i].id), static_cast<std::uint64_t>(epoch));
        const ItemLoss loss = item_loss(net, tape, train_set.items[i], train_set.exemplar(i), cfg.mode, item_seed);
        if (!std::isfinite(loss.skim) || !std::isfinite(loss.focus)) {
          fail(ErrorCode::numeric, "non-finite loss at epoch " + std::to_string(epoch) + ", step " +
                                       std::to_string(step) + " on '" + train_set.items[i].id + "' (L_S=" +
                                       format_real(loss.skim) + ", L_F=" + format_real(loss.focus) + ")");
        }
        tape.backward(loss.total, weight);
        tape.accumulate_param_grads(params.grads());
        step_loss.skim += loss.skim * weight;
        step_loss.focus += loss.focus * weight;
      }
      step_loss.total = step_loss.skim + step_loss.focus;
      result.step_losses.push_back(step_loss);
      epoch_loss.skim += step_loss.skim;
      epoch_loss.focus += step_loss.focus;

      clip_gradients(params, cfg.grad_clip);
      adam.step(params, learning_rate_at(cfg, step, total_steps));
      ++step;
    }
    epoch_loss.skim /= static_cast<double>(steps_per_epoch);
    epoch_loss.focus /= static_cast<double>(steps_per_epoch);
    epoch_loss.total = epoch_loss.skim + epoch_loss.focus;

    EpochRecord record{epoch, epoch_loss, std::nan(""), std::nan("")};
    if (val_set && val_set->size() > 0) {
      const MetricsReport report =
          make_report([&] {
            std::vector<VideoResult> rows;
            CountOptions options;
            options.mode = cfg.mode;
            options.seed = derive_seed(cfg.seed, fnv1a("val"));
            for (std::size_t i = 0; i < val_set->size(); ++i) {
              const VideoCount c = count_video(net, val_set->items[i], val_set->exemplar(i), options);
              rows.push_back({val_set->items[i].id, val_set->items[i].class_label,
                              static_cast<double>(val_set->items[i].count()), c.count});
            }
            return rows;
          }(), default_bucket_edges());
      record.val_mae = report.mae;
      record.val_obo = report.obo;
    }
    const bool keep = result.trace.empty() || !val_set || better(record, result.trace[static_cast<std::size_t>(result.best_epoch - 1)]);
    if (keep) {
      result.params = params;
      result.best_epoch = epoch;
    }
    result.trace.push_back(record);
    if (on_epoch) on_epoch(record);
  }
  return result;
}

std::string trace_csv(const std::vector<EpochRecord>& trace) {
  std::ostringstream os;
  os << "epoch,L,L_S,L_F,val_MAE,val_OBO\n";
  for (const auto& r : trace) {
    os << r.epoch << ',' << format_real(r.loss.total) << ',' << format_real(r.loss.skim) << ','
       << format_real(r.loss.focus) << ',' << format_real(r.val_mae) << ',' << format_real(r.val_obo) << '\n';
  }
  return os.str();
}

}  // namespace sfn
