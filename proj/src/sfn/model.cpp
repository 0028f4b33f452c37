#include "sfn/model.hpp"

#include <algorithm>
#include <sstream>

#include "sfn/error.hpp"
#include "sfn/random.hpp"

namespace sfn {

namespace {

std::atomic<std::uint64_t> g_skim_calls{0};

void require(bool ok, const std::string& message) {
  if (!ok) fail(ErrorCode::invalid_argument, message);
}

std::string block(const std::string& prefix, int i) {
  return prefix + "block" + std::to_string(i) + ".";
}

void declare_encoder(std::vector<ParamSpec>& specs, const ModelConfig& cfg, const std::string& prefix,
                     int blocks) {
  declare_linear(specs, prefix + "input.", cfg.d_in, cfg.d);
  for (int b = 0; b < blocks; ++b) {
    const std::string p = block(prefix, b);
    declare_conv1d(specs, p + "conv.", cfg.d, cfg.d, cfg.conv_kernel);
    declare_layer_norm(specs, p + "ln1.", cfg.d);
    declare_attention(specs, p + "attn.", cfg.d);
    declare_layer_norm(specs, p + "ln2.", cfg.d);
  }
}

void declare_decoder(std::vector<ParamSpec>& specs, const ModelConfig& cfg, const std::string& prefix,
                     Eigen::Index max_length, Eigen::Index width) {
  for (const char* proj : {"q", "k"}) {
    specs.push_back({prefix + "sim.w" + proj, {cfg.d, cfg.d}, ParamInit::fan_in_uniform, cfg.d});
    specs.push_back({prefix + "sim.b" + proj, {cfg.d}, ParamInit::zeros, cfg.d});
  }
  declare_linear(specs, prefix + "proj.", max_length * cfg.heads, width);
  declare_attention(specs, prefix + "tf.attn.", width);
  declare_layer_norm(specs, prefix + "tf.ln1.", width);
  declare_feed_forward(specs, prefix + "tf.ffn.", width, cfg.ffn_mult);
  declare_layer_norm(specs, prefix + "tf.ln2.", width);
  declare_linear(specs, prefix + "head.", width, 1);
}

}  // namespace

void validate(const ModelConfig& cfg) {
  require(cfg.d_in >= 1 && cfg.d >= 1, "model widths must be positive");
  require(cfg.heads >= 1 && cfg.d % cfg.heads == 0, "d must be divisible by the head count");
  require(cfg.decoder_width >= 1 && cfg.decoder_width % cfg.heads == 0,
          "decoder width must be divisible by the head count");
  require(cfg.skim_decoder_width >= 1 && cfg.skim_decoder_width % cfg.heads == 0,
          "skim decoder width must be divisible by the head count");
  require(cfg.ffn_mult >= 1 && cfg.conv_kernel >= 1, "ffn_mult and conv_kernel must be >= 1");
  require(cfg.encoder_blocks >= 1 && cfg.skim_encoder_blocks >= 1, "encoders need at least one block");
  require(cfg.views.downsample_rate >= 1 && cfg.views.context_length >= 1 && cfg.views.fine_length >= 1,
          "R, N_S and N_F must be >= 1");
  require(cfg.instructive_frames >= 1, "N_C must be >= 1");
  require(cfg.lsag.num_blocks >= 1 && cfg.lsag.bottleneck_ratio >= 1 && cfg.lsag.conv_kernel >= 1,
          "LSAG needs B >= 1, r >= 1 and a positive kernel");
  require((2 * cfg.d) % cfg.lsag.bottleneck_ratio == 0, "2d must be divisible by the bottleneck ratio");
  require(!cfg.ablations.lsag_enabled || cfg.ablations.feature_adaption_enabled ||
              cfg.ablations.long_short_enabled,
          "lsag_enabled requires feature adaption or long-short modelling");
}

std::vector<ParamSpec> model_param_specs(const ModelConfig& cfg) {
  validate(cfg);
  std::vector<ParamSpec> specs;
  const Ablations& ab = cfg.ablations;
  if (ab.skim_enabled) {
    declare_encoder(specs, cfg, "skim.encoder.", cfg.skim_encoder_blocks);
    declare_decoder(specs, cfg, "skim.decoder.", cfg.views.context_length, cfg.skim_decoder_width);
  }
  declare_encoder(specs, cfg, "focus.encoder.", cfg.encoder_blocks);
  if (ab.feature_adaption()) {
    const Eigen::Index hidden = 2 * cfg.d / cfg.lsag.bottleneck_ratio;
    declare_linear(specs, "focus.lsag.adapt.fc1.", 2 * cfg.d, hidden);
    declare_linear(specs, "focus.lsag.adapt.fc2.", hidden, cfg.d);
    declare_conv1d(specs, "focus.lsag.adapt.conv.", cfg.d, cfg.d, cfg.lsag.conv_kernel);
  } else {
    declare_linear(specs, "focus.fuse.", cfg.d, cfg.d);
  }
  for (int i = 0; i < cfg.lsag.num_blocks; ++i) {
    if (ab.long_short()) {
      const std::string p = block("focus.lsag.", i);
      declare_attention(specs, p + "attn.", cfg.d);
      declare_layer_norm(specs, p + "ln1.", cfg.d);
      declare_conv1d(specs, p + "conv.", cfg.d, cfg.d, cfg.lsag.conv_kernel);
      declare_layer_norm(specs, p + "ln2.", cfg.d);
    } else {
      const std::string p = block("focus.cnn.", i);
      declare_conv1d(specs, p + "conv.", cfg.d, cfg.d, cfg.lsag.conv_kernel);
      declare_layer_norm(specs, p + "ln.", cfg.d);
    }
  }
  declare_decoder(specs, cfg, "focus.decoder.", cfg.views.fine_length, cfg.decoder_width);
  return specs;
}

std::string shape_signature(const ModelConfig& cfg) {
  std::ostringstream os;
  os << "d_in=" << cfg.d_in << ";d=" << cfg.d << ";heads=" << cfg.heads << ";ffn=" << cfg.ffn_mult
     << ";k=" << cfg.conv_kernel << ";enc=" << cfg.encoder_blocks << ";skim_enc=" << cfg.skim_encoder_blocks
     << ";dec=" << cfg.decoder_width << ";skim_dec=" << cfg.skim_decoder_width
     << ";N_S=" << cfg.views.context_length << ";N_F=" << cfg.views.fine_length
     << ";B=" << cfg.lsag.num_blocks << ";r=" << cfg.lsag.bottleneck_ratio
     << ";lsag_k=" << cfg.lsag.conv_kernel << ";skim=" << cfg.ablations.skim_enabled
     << ";adapt=" << cfg.ablations.feature_adaption() << ";long_short=" << cfg.ablations.long_short();
  return os.str();
}

std::uint64_t config_digest(const ModelConfig& cfg) { return fnv1a(shape_signature(cfg)); }

std::uint64_t skim_forward_calls() { return g_skim_calls.load(); }

template <typename T>
SkimFocusNet<T>::SkimFocusNet(ModelConfig cfg, const ParamStore<T>& params)
    : cfg_(std::move(cfg)), params_(params) {
  validate(cfg_);
}

template <typename T>
Var SkimFocusNet<T>::encoder(const Binder<T>& p, const Matrix& frames, const Mask& mask,
                             int blocks) const {
  Tape<T>& t = p.tape;
  if (frames.cols() != cfg_.d_in) {
    fail(ErrorCode::invalid_argument, "shape mismatch: frames have " + std::to_string(frames.cols()) +
                                          " features, model expects " + std::to_string(cfg_.d_in));
  }
  if (static_cast<Eigen::Index>(mask.size()) != frames.rows()) {
    fail(ErrorCode::invalid_argument, "shape mismatch: mask length " + std::to_string(mask.size()) +
                                          " vs " + std::to_string(frames.rows()) + " frames");
  }
  if (count_valid(mask) == 0) fail(ErrorCode::invalid_argument, "empty view");
  Var x = t.mask_rows(linear(p.sub("input"), t.constant(frames)), mask);
  for (int b = 0; b < blocks; ++b) {
    const Binder<T> blk = p.sub("block" + std::to_string(b));
    x = layer_norm(blk.sub("ln1"), t.add(x, t.relu(conv1d_temporal(blk.sub("conv"), x, mask, cfg_.conv_kernel))),
                   mask);
    x = layer_norm(blk.sub("ln2"), t.add(x, multi_head_self_attention(blk.sub("attn"), x, mask, cfg_.heads)),
                   mask);
  }
  return x;
}

template <typename T>
Var SkimFocusNet<T>::transformer_layer(const Binder<T>& p, Var x, const Mask& mask) const {
  Tape<T>& t = p.tape;
  x = layer_norm(p.sub("ln1"), t.add(x, multi_head_self_attention(p.sub("attn"), x, mask, cfg_.heads)), mask);
  x = layer_norm(p.sub("ln2"), t.add(x, feed_forward(p.sub("ffn"), x, mask)), mask);
  return x;
}

template <typename T>
Var SkimFocusNet<T>::decoder(const Binder<T>& p, Var x, const Mask& mask, Eigen::Index max_length) const {
  Tape<T>& t = p.tape;
  const Eigen::Index length = t.rows(x);
  if (length > max_length) {
    fail(ErrorCode::invalid_argument, "view of " + std::to_string(length) + " frames exceeds decoder length " +
                                          std::to_string(max_length));
  }
  const std::vector<Var> maps = attention_maps(p.sub("sim"), x, mask, cfg_.heads);
  // Rows scaled by the valid length so a uniform row is all ones whatever
  // the view length.
  const Var stacked = t.scale(t.interleave_cols(maps), static_cast<T>(count_valid(mask)));
  Var weight = p("proj.w");
  if (length < max_length) weight = t.slice_rows(weight, 0, length * cfg_.heads);
  Var h = t.mask_rows(t.relu(t.add_row(t.matmul(stacked, weight), p("proj.b"))), mask);
  h = transformer_layer(p.sub("tf"), h, mask);
  return t.mask_rows(linear(p.sub("head"), h), mask);
}

template <typename T>
typename SkimFocusNet<T>::SkimResult SkimFocusNet<T>::skim_forward(Tape<T>& tape, const Matrix& view,
                                                                     const Mask& mask) const {
  if (!cfg_.ablations.skim_enabled) fail(ErrorCode::invalid_argument, "skim branch is disabled");
  g_skim_calls.fetch_add(1);
  const Binder<T> p = bind(tape, "skim.");
  const Var embedding = encoder(p.sub("encoder"), view, mask, cfg_.skim_encoder_blocks);
  const Var confidence = decoder(p.sub("decoder"), embedding, mask, cfg_.views.context_length);
  return SkimResult{confidence, Embedding<T>{embedding, mask}};
}

template <typename T>
Embedding<T> SkimFocusNet<T>::encode(Tape<T>& tape, const Matrix& frames, const Mask& mask) const {
  return Embedding<T>{encoder(bind(tape, "focus.encoder."), frames, mask, cfg_.encoder_blocks), mask};
}

template <typename T>
Var SkimFocusNet<T>::pool_guidance(Tape<T>& tape, const Embedding<T>& x) const {
  return max_pool_time(tape, x.values, x.mask);
}

template <typename T>
Var SkimFocusNet<T>::zero_guidance(Tape<T>& tape) const {
  return tape.constant(Matrix::Zero(1, cfg_.d));
}

template <typename T>
Var SkimFocusNet<T>::lsag(Tape<T>& tape, const Embedding<T>& x, Var guidance) const {
  Tape<T>& t = tape;
  const Eigen::Index length = t.rows(x.values);
  if (t.cols(guidance) != t.cols(x.values) || t.rows(guidance) != 1) {
    fail(ErrorCode::invalid_argument, "guidance width " + std::to_string(t.cols(guidance)) +
                                          " does not match embedding width " + std::to_string(t.cols(x.values)));
  }
  const Mask& mask = x.mask;
  Var y;
  if (cfg_.ablations.feature_adaption()) {
    const Binder<T> p = bind(tape, "focus.lsag.adapt.");
    const Var repeated = t.repeat_rows(guidance, length);
    const Var combined = t.concat_cols(std::vector<Var>{x.values, repeated});
    const Var attention = t.sigmoid(linear(p.sub("fc2"), t.relu(linear(p.sub("fc1"), combined))));
    const Var gated = t.mul(x.values, attention);
    y = t.add(conv1d_temporal(p.sub("conv"), gated, mask, cfg_.lsag.conv_kernel), x.values);
  } else {
    const Binder<T> p = bind(tape, "focus.fuse.");
    y = t.mask_rows(t.add(x.values, t.repeat_rows(linear(p, guidance), length)), mask);
  }
  for (int i = 0; i < cfg_.lsag.num_blocks; ++i) {
    if (cfg_.ablations.long_short()) {
      const Binder<T> p = bind(tape, block("focus.lsag.", i));
      y = layer_norm(p.sub("ln1"), t.add(y, multi_head_self_attention(p.sub("attn"), y, mask, cfg_.heads)), mask);
      y = layer_norm(p.sub("ln2"), t.add(y, conv1d_temporal(p.sub("conv"), y, mask, cfg_.lsag.conv_kernel)), mask);
    } else {
      const Binder<T> p = bind(tape, block("focus.cnn.", i));
      y = layer_norm(p.sub("ln"), t.add(y, t.relu(conv1d_temporal(p.sub("conv"), y, mask, cfg_.lsag.conv_kernel))),
                     mask);
    }
  }
  return y;
}

template <typename T>
Var SkimFocusNet<T>::decode_density(Tape<T>& tape, const Embedding<T>& x) const {
  return decoder(bind(tape, "focus.decoder."), x.values, x.mask, cfg_.views.fine_length);
}

template <typename T>
Var SkimFocusNet<T>::focus_view(Tape<T>& tape, const Matrix& frames, const Mask& mask, Var guidance) const {
  const Embedding<T> embedded = encode(tape, frames, mask);
  const Var adapted = lsag(tape, embedded, guidance);
  return decode_density(tape, Embedding<T>{adapted, mask});
}

template class SkimFocusNet<float>;
template class SkimFocusNet<double>;

namespace {

bool is_prefix_mask(const Mask& mask) {
  const auto first_pad = std::find(mask.begin(), mask.end(), false);
  return std::find(first_pad, mask.end(), true) == mask.end();
}

}  // namespace

template <typename T>
PreparedView<T> prepare_view(const FeatureMatrix& source, std::span<const Index> indices, const Mask& mask,
                             bool trim) {
  PreparedView<T> out;
  out.full_length = static_cast<Eigen::Index>(indices.size());
  std::size_t rows = indices.size();
  if (trim && is_prefix_mask(mask)) rows = count_valid(mask);
  out.features = Mat<T>::Zero(static_cast<Eigen::Index>(rows), source.cols());
  for (std::size_t i = 0; i < rows; ++i) {
    if (mask[i]) out.features.row(static_cast<Eigen::Index>(i)) = source.row(indices[i]).template cast<T>();
  }
  out.mask.assign(mask.begin(), mask.begin() + static_cast<std::ptrdiff_t>(rows));
  return out;
}

template <typename T>
DensityMap to_density_map(const Mat<T>& values, const Mask& full_mask) {
  DensityMap map;
  map.mask = full_mask;
  map.values.assign(full_mask.size(), 0.0);
  for (Eigen::Index r = 0; r < values.rows(); ++r) {
    if (full_mask[static_cast<std::size_t>(r)]) map.values[static_cast<std::size_t>(r)] = static_cast<double>(values(r, 0));
  }
  return map;
}

int effective_instructive(const ModelConfig& cfg, const Mask& context_mask) {
  return std::min<int>(cfg.instructive_frames, static_cast<int>(count_valid(context_mask)));
}

namespace {

template <typename T>
Var guidance_for(const SkimFocusNet<T>& net, Tape<T>& tape, const AnnotatedSequence& source,
                 const ViewPlan& plan, std::uint64_t seed, VideoCount& result) {
  const ModelConfig& cfg = net.config();
  const PreparedView<T> context =
      prepare_view<T>(source.features, plan.contextual_indices, plan.context_mask, cfg.trim_padding);
  const auto skim = net.skim_forward(tape, context.features, context.mask);
  ++result.skim_passes;
  result.skim_confidence = to_density_map(tape.value(skim.confidence), plan.context_mask);
  result.instructive = sample_instructive(result.skim_confidence, cfg.sampling,
                                          effective_instructive(cfg, plan.context_mask), seed);
  FeatureMatrix rows(static_cast<Eigen::Index>(result.instructive.size()), source.feature_width());
  for (std::size_t i = 0; i < result.instructive.size(); ++i) {
    rows.row(static_cast<Eigen::Index>(i)) =
        source.features.row(plan.contextual_indices[static_cast<std::size_t>(result.instructive[i])]);
  }
  const Mask all(result.instructive.size(), true);
  const Embedding<T> encoded = net.encode(tape, rows.template cast<T>(), all);
  return net.pool_guidance(tape, encoded);
}

}  // namespace

template <typename T>
VideoCount count_video(const SkimFocusNet<T>& net, const AnnotatedSequence& seq, const AnnotatedSequence* exemplar,
                       const CountOptions& options) {
  const ModelConfig& cfg = net.config();
  if (options.mode == CountMode::specified && exemplar == nullptr) {
    fail(ErrorCode::invalid_argument, "specified counting of '" + seq.id + "' needs an exemplar");
  }
  const ViewPlan plan = decompose(seq, cfg.views);
  const AnnotatedSequence& skim_source = options.mode == CountMode::specified ? *exemplar : seq;
  const ViewPlan skim_plan = options.mode == CountMode::specified ? decompose(*exemplar, cfg.views) : plan;
  const std::uint64_t seed = derive_seed(options.seed, fnv1a(seq.id));

  VideoCount result;
  Tape<T> tape;
  Var guidance;
  if (cfg.ablations.skim_enabled && options.reuse_skim) {
    guidance = guidance_for(net, tape, skim_source, skim_plan, seed, result);
  } else if (!cfg.ablations.skim_enabled) {
    guidance = net.zero_guidance(tape);
  }
  for (std::size_t v = 0; v < plan.num_views(); ++v) {
    Var view_guidance = guidance;
    if (!view_guidance.valid()) view_guidance = guidance_for(net, tape, skim_source, skim_plan, seed, result);
    const PreparedView<T> view =
        prepare_view<T>(seq.features, plan.fine_views[v], plan.fine_masks[v], cfg.trim_padding);
    const Var density = net.focus_view(tape, view.features, view.mask, view_guidance);
    DensityMap map = to_density_map(tape.value(density), plan.fine_masks[v]);
    const double sum = count_from_density(map);
    result.per_view_sums.push_back(sum);
    result.raw_count += sum;
    result.view_maps.push_back(std::move(map));
    result.view_indices.push_back(plan.fine_views[v]);
  }
  result.count = std::max(0.0, result.raw_count);
  return result;
}

template PreparedView<float> prepare_view<float>(const FeatureMatrix&, std::span<const Index>, const Mask&, bool);
template PreparedView<double> prepare_view<double>(const FeatureMatrix&, std::span<const Index>, const Mask&, bool);
template DensityMap to_density_map<float>(const Mat<float>&, const Mask&);
template DensityMap to_density_map<double>(const Mat<double>&, const Mask&);
template VideoCount count_video<float>(const SkimFocusNet<float>&, const AnnotatedSequence&,
                                       const AnnotatedSequence*, const CountOptions&);
template VideoCount count_video<double>(const SkimFocusNet<double>&, const AnnotatedSequence&,
                                        const AnnotatedSequence*, const CountOptions&);

}  // namespace sfn
