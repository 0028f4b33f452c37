#pragma once

// The dual-branch counting network.
//
// The skim branch encodes the contextual view with a shallow encoder and a
// tiny correlation decoder, producing a per-frame confidence map. The most
// informative frames are re-encoded by the focus encoder and max-pooled into
// a guidance vector, which conditions every fine-grained view through the
// long-short adaptive guidance (LSAG) block before density decoding.

#include <atomic>
#include <cstdint>
#include <string>
#include <vector>

#include "sfn/autograd.hpp"
#include "sfn/layers.hpp"
#include "sfn/params.hpp"
#include "sfn/sampling.hpp"
#include "sfn/sequence.hpp"

namespace sfn {

struct Ablations {
  bool skim_enabled = true;
  bool lsag_enabled = true;
  bool feature_adaption_enabled = true;
  bool long_short_enabled = true;

  bool feature_adaption() const { return lsag_enabled && feature_adaption_enabled; }
  bool long_short() const { return lsag_enabled && long_short_enabled; }
};

struct LsagConfig {
  int num_blocks = 3;        // B
  int bottleneck_ratio = 4;  // r
  int conv_kernel = 3;
};

struct ModelConfig {
  int d_in = 16;
  int d = 64;
  int heads = 4;
  int ffn_mult = 2;
  int conv_kernel = 3;
  int encoder_blocks = 3;       // focus encoder depth
  int skim_encoder_blocks = 1;  // skim encoder = first block(s) of that design
  int decoder_width = 64;
  int skim_decoder_width = 32;
  ViewConfig views;
  int instructive_frames = 32;  // N_C
  SamplingStrategy sampling = SamplingStrategy::top_nc;
  LsagConfig lsag;
  Ablations ablations;
  /// Run on the non-padded prefix of each view. Outputs are identical to the
  /// fully padded computation; only cost changes.
  bool trim_padding = true;
};

void validate(const ModelConfig& cfg);

/// Every parameter the configuration needs.
std::vector<ParamSpec> model_param_specs(const ModelConfig& cfg);

/// Canonical text of the fields that determine parameter shapes.
std::string shape_signature(const ModelConfig& cfg);
std::uint64_t config_digest(const ModelConfig& cfg);

template <typename T>
struct Embedding {
  Var values;  // T x d
  Mask mask;
};

/// Number of skim forward passes executed by this process.
std::uint64_t skim_forward_calls();

template <typename T>
class SkimFocusNet {
 public:
  using Matrix = Mat<T>;

  SkimFocusNet(ModelConfig cfg, const ParamStore<T>& params);

  const ModelConfig& config() const { return cfg_; }
  const ParamStore<T>& params() const { return params_; }

  struct SkimResult {
    Var confidence;  // T x 1, unconstrained
    Embedding<T> embedding;
  };

  /// Shallow encoder plus tiny decoder over the contextual view.
  SkimResult skim_forward(Tape<T>& tape, const Matrix& view, const Mask& mask) const;

  /// Focus encoder: per-frame projection followed by conv + attention blocks.
  Embedding<T> encode(Tape<T>& tape, const Matrix& frames, const Mask& mask) const;

  /// Element-wise max over non-masked frames.
  Var pool_guidance(Tape<T>& tape, const Embedding<T>& x) const;

  /// Guidance-conditioned feature adaption followed by B long-short blocks
  /// (or their ablation substitutes).
  Var lsag(Tape<T>& tape, const Embedding<T>& x, Var guidance) const;

  /// Attention-correlation maps, projection, one transformer layer and a
  /// linear head; T x 1 density.
  Var decode_density(Tape<T>& tape, const Embedding<T>& x) const;

  /// encode -> lsag -> decode for one fine-grained view.
  Var focus_view(Tape<T>& tape, const Matrix& frames, const Mask& mask, Var guidance) const;

  /// Zero guidance, used when the skim branch is disabled.
  Var zero_guidance(Tape<T>& tape) const;

 private:
  Binder<T> bind(Tape<T>& tape, const std::string& prefix) const {
    return Binder<T>{tape, params_, prefix};
  }
  Var encoder(const Binder<T>& p, const Matrix& frames, const Mask& mask, int blocks) const;
  Var decoder(const Binder<T>& p, Var x, const Mask& mask, Eigen::Index max_length) const;
  Var transformer_layer(const Binder<T>& p, Var x, const Mask& mask) const;

  ModelConfig cfg_;
  const ParamStore<T>& params_;
};

extern template class SkimFocusNet<float>;
extern template class SkimFocusNet<double>;

/// Trailing padding removed when `cfg.trim_padding` and the mask is a
/// prefix; otherwise returned unchanged.
template <typename T>
struct PreparedView {
  Mat<T> features;
  Mask mask;
  Eigen::Index full_length = 0;
};

template <typename T>
PreparedView<T> prepare_view(const FeatureMatrix& source, std::span<const Index> indices,
                             const Mask& mask, bool trim);

/// Copies a T x 1 prediction into a map of `full_length` with `mask`.
template <typename T>
DensityMap to_density_map(const Mat<T>& values, const Mask& full_mask);

enum class CountMode { standard, specified };

struct CountOptions {
  CountMode mode = CountMode::standard;
  /// Run the skim branch once per video. `false` is the per-view baseline.
  bool reuse_skim = true;
  std::uint64_t seed = 0;
};

struct VideoCount {
  double count = 0.0;      // clamped at 0
  double raw_count = 0.0;  // sum of view sums
  std::vector<double> per_view_sums;
  std::vector<DensityMap> view_maps;
  std::vector<std::vector<Index>> view_indices;
  ConfidenceMap skim_confidence;  // empty when skim is disabled
  std::vector<Index> instructive;
  std::size_t skim_passes = 0;
};

/// Number of instructive frames actually drawn: N_C capped at the non-masked
/// contextual frames.
int effective_instructive(const ModelConfig& cfg, const Mask& context_mask);

template <typename T>
VideoCount count_video(const SkimFocusNet<T>& net, const AnnotatedSequence& seq,
                       const AnnotatedSequence* exemplar, const CountOptions& options);

}  // namespace sfn
