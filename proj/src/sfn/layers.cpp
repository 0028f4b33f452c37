#include "sfn/layers.hpp"

#include <cmath>

#include "sfn/error.hpp"

namespace sfn {

void declare_linear(std::vector<ParamSpec>& specs, const std::string& prefix, Eigen::Index in,
                    Eigen::Index out) {
  specs.push_back({prefix + "w", {in, out}, ParamInit::fan_in_uniform, in});
  specs.push_back({prefix + "b", {out}, ParamInit::zeros, in});
}

void declare_conv1d(std::vector<ParamSpec>& specs, const std::string& prefix, Eigen::Index channels_in,
                    Eigen::Index channels_out, int kernel) {
  declare_linear(specs, prefix, channels_in * kernel, channels_out);
}

void declare_attention(std::vector<ParamSpec>& specs, const std::string& prefix, Eigen::Index width) {
  for (const char* proj : {"q", "k", "v", "o"}) {
    specs.push_back({prefix + "w" + proj, {width, width}, ParamInit::fan_in_uniform, width});
    specs.push_back({prefix + "b" + proj, {width}, ParamInit::zeros, width});
  }
}

void declare_layer_norm(std::vector<ParamSpec>& specs, const std::string& prefix, Eigen::Index width) {
  specs.push_back({prefix + "gamma", {width}, ParamInit::ones, width});
  specs.push_back({prefix + "beta", {width}, ParamInit::zeros, width});
}

void declare_feed_forward(std::vector<ParamSpec>& specs, const std::string& prefix, Eigen::Index width,
                          int expansion) {
  declare_linear(specs, prefix + "fc1.", width, width * expansion);
  declare_linear(specs, prefix + "fc2.", width * expansion, width);
}

template <typename T>
Var linear(const Binder<T>& p, Var x) {
  return p.tape.add_row(p.tape.matmul(x, p("w")), p("b"));
}

template <typename T>
Var conv1d_temporal(const Binder<T>& p, Var x, const Mask& mask, int kernel) {
  Tape<T>& t = p.tape;
  if (kernel < 1) fail(ErrorCode::invalid_argument, "conv kernel must be >= 1");
  const Var input = t.mask_rows(x, mask);
  std::vector<Var> taps;
  const int first = -(kernel - 1) / 2;
  for (int k = 0; k < kernel; ++k) taps.push_back(t.shift_rows(input, first + k));
  const Var unfolded = kernel == 1 ? taps[0] : t.concat_cols(taps);
  return t.mask_rows(linear(p, unfolded), mask);
}

template <typename T>
std::vector<Var> attention_maps(const Binder<T>& p, Var x, const Mask& mask, int heads) {
  Tape<T>& t = p.tape;
  const Eigen::Index width = t.cols(x);
  if (heads < 1 || width % heads != 0) {
    fail(ErrorCode::invalid_argument, "width " + std::to_string(width) + " not divisible by " +
                                          std::to_string(heads) + " heads");
  }
  const Eigen::Index head_width = width / heads;
  const Var q = t.add_row(t.matmul(x, p("wq")), p("bq"));
  const Var k = t.add_row(t.matmul(x, p("wk")), p("bk"));
  const T scale = T(1) / std::sqrt(static_cast<T>(head_width));
  std::vector<Var> maps;
  for (int h = 0; h < heads; ++h) {
    const Var qh = heads == 1 ? q : t.slice_cols(q, h * head_width, head_width);
    const Var kh = heads == 1 ? k : t.slice_cols(k, h * head_width, head_width);
    maps.push_back(t.softmax_rows(t.scale(t.matmul_nt(qh, kh), scale), mask));
  }
  return maps;
}

template <typename T>
Var multi_head_self_attention(const Binder<T>& p, Var x, const Mask& mask, int heads) {
  Tape<T>& t = p.tape;
  const std::vector<Var> maps = attention_maps(p, x, mask, heads);
  const Eigen::Index head_width = t.cols(x) / heads;
  const Var v = t.add_row(t.matmul(x, p("wv")), p("bv"));
  std::vector<Var> outputs;
  for (int h = 0; h < heads; ++h) {
    const Var vh = heads == 1 ? v : t.slice_cols(v, h * head_width, head_width);
    outputs.push_back(t.matmul(maps[static_cast<std::size_t>(h)], vh));
  }
  const Var merged = heads == 1 ? outputs[0] : t.concat_cols(outputs);
  return t.mask_rows(t.add_row(t.matmul(merged, p("wo")), p("bo")), mask);
}

template <typename T>
Var layer_norm(const Binder<T>& p, Var x, const Mask& mask) {
  return p.tape.mask_rows(p.tape.layer_norm_rows(x, p("gamma"), p("beta"), T(1e-5)), mask);
}

template <typename T>
Var feed_forward(const Binder<T>& p, Var x, const Mask& mask) {
  const Var hidden = p.tape.relu(linear(p.sub("fc1"), x));
  return p.tape.mask_rows(linear(p.sub("fc2"), hidden), mask);
}

template <typename T>
Var max_pool_time(Tape<T>& tape, Var x, const Mask& mask) {
  return tape.max_pool_rows(x, mask);
}

#define SFN_INSTANTIATE_LAYERS(T)                                                       \
  template Var linear<T>(const Binder<T>&, Var);                                        \
  template Var conv1d_temporal<T>(const Binder<T>&, Var, const Mask&, int);             \
  template std::vector<Var> attention_maps<T>(const Binder<T>&, Var, const Mask&, int); \
  template Var multi_head_self_attention<T>(const Binder<T>&, Var, const Mask&, int);   \
  template Var layer_norm<T>(const Binder<T>&, Var, const Mask&);                       \
  template Var feed_forward<T>(const Binder<T>&, Var, const Mask&);                     \
  template Var max_pool_time<T>(Tape<T>&, Var, const Mask&);

SFN_INSTANTIATE_LAYERS(float)
SFN_INSTANTIATE_LAYERS(double)

}  // namespace sfn
