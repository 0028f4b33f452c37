#pragma once

// Mask-aware network primitives on top of the tape. Every primitive returns
// zero rows at masked (padded) positions.

#include <string>
#include <vector>

#include "sfn/autograd.hpp"
#include "sfn/params.hpp"

namespace sfn {

/// Resolves parameter names relative to a scope prefix.
template <typename T>
struct Binder {
  Tape<T>& tape;
  const ParamStore<T>& store;
  std::string prefix;

  Var operator()(const std::string& name) const { return tape.param(store, prefix + name); }
  Binder sub(const std::string& scope) const { return {tape, store, prefix + scope + "."}; }
};

// Parameter declarations, appended to `specs` under `prefix`.
void declare_linear(std::vector<ParamSpec>& specs, const std::string& prefix, Eigen::Index in,
                    Eigen::Index out);
void declare_conv1d(std::vector<ParamSpec>& specs, const std::string& prefix, Eigen::Index channels_in,
                    Eigen::Index channels_out, int kernel);
void declare_attention(std::vector<ParamSpec>& specs, const std::string& prefix, Eigen::Index width);
void declare_layer_norm(std::vector<ParamSpec>& specs, const std::string& prefix, Eigen::Index width);
void declare_feed_forward(std::vector<ParamSpec>& specs, const std::string& prefix, Eigen::Index width,
                          int expansion);

/// x W + b, with params `w` (in x out) and `b` (out).
template <typename T>
Var linear(const Binder<T>& p, Var x);

/// Same-length temporal convolution with zero padding; params `w`
/// (kernel * c_in x c_out) and `b`.
template <typename T>
Var conv1d_temporal(const Binder<T>& p, Var x, const Mask& mask, int kernel);

/// Scaled dot-product self-attention with padded keys excluded; params
/// wq/bq, wk/bk, wv/bv, wo/bo.
template <typename T>
Var multi_head_self_attention(const Binder<T>& p, Var x, const Mask& mask, int heads);

/// Row-wise layer normalisation; params `gamma`, `beta`.
template <typename T>
Var layer_norm(const Binder<T>& p, Var x, const Mask& mask);

/// relu(x W1 + b1) W2 + b2.
template <typename T>
Var feed_forward(const Binder<T>& p, Var x, const Mask& mask);

/// Element-wise max over non-masked time steps (1 x d).
template <typename T>
Var max_pool_time(Tape<T>& tape, Var x, const Mask& mask);

/// Per-head attention probability maps softmax(Q_h K_h^T / sqrt(d_h)), each
/// T x T; params wq/bq, wk/bk.
template <typename T>
std::vector<Var> attention_maps(const Binder<T>& p, Var x, const Mask& mask, int heads);

}  // namespace sfn
