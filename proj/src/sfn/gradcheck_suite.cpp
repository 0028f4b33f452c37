#include <functional>
#include <random>

#include "sfn/gradcheck.hpp"
#include "sfn/layers.hpp"
#include "sfn/model.hpp"
#include "sfn/random.hpp"

namespace sfn {

namespace {

using Matrix = Mat<double>;

Matrix uniform(Rng& rng, Eigen::Index rows, Eigen::Index cols, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

/// Values bounded away from zero, so kinks stay out of the difference stencil.
Matrix away_from_zero(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  Matrix m = uniform(rng, rows, cols, 0.1, 1.0);
  std::bernoulli_distribution flip(0.5);
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    if (flip(rng)) m.data()[i] = -m.data()[i];
  }
  return m;
}

struct Case {
  std::string name;
  std::vector<ParamSpec> specs;
  std::vector<std::pair<std::string, Matrix>> values;  // overrides of the seeded init
  LossClosure loss;
};

ParamSpec input_spec(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
  return ParamSpec{name, {rows, cols}, ParamInit::fan_in_uniform, 1};
}

/// Scalarises an arbitrary output with fixed random weights.
LossClosure projected(std::function<Var(Tape<double>&, const ParamStore<double>&)> body, Matrix weights) {
  return [body = std::move(body), weights = std::move(weights)](Tape<double>& t, const ParamStore<double>& s) {
    return t.weighted_sum(body(t, s), weights);
  };
}

std::vector<Case> primitive_cases(Rng& rng) {
  std::vector<Case> cases;
  auto unary = [&](const std::string& name, std::function<Var(Tape<double>&, Var)> op, Matrix x,
                   Eigen::Index out_rows, Eigen::Index out_cols) {
    const Eigen::Index r = x.rows(), c = x.cols();
    cases.push_back({name, {input_spec("a", r, c)}, {{"a", std::move(x)}},
                     projected([op](Tape<double>& t, const ParamStore<double>& s) { return op(t, t.param(s, "a")); },
                               uniform(rng, out_rows, out_cols))});
  };
  auto binary = [&](const std::string& name, std::function<Var(Tape<double>&, Var, Var)> op, Matrix a, Matrix b,
                    Eigen::Index out_rows, Eigen::Index out_cols) {
    const Eigen::Index ar = a.rows(), ac = a.cols(), br = b.rows(), bc = b.cols();
    cases.push_back({name, {input_spec("a", ar, ac), input_spec("b", br, bc)}, {{"a", std::move(a)}, {"b", std::move(b)}},
                     projected([op](Tape<double>& t, const ParamStore<double>& s) {
                       return op(t, t.param(s, "a"), t.param(s, "b"));
                     }, uniform(rng, out_rows, out_cols))});
  };

  binary("matmul", [](Tape<double>& t, Var a, Var b) { return t.matmul(a, b); }, uniform(rng, 3, 5),
         uniform(rng, 5, 4), 3, 4);
  binary("matmul_nt", [](Tape<double>& t, Var a, Var b) { return t.matmul_nt(a, b); }, uniform(rng, 3, 5),
         uniform(rng, 4, 5), 3, 4);
  binary("add", [](Tape<double>& t, Var a, Var b) { return t.add(a, b); }, uniform(rng, 3, 5), uniform(rng, 3, 5), 3,
         5);
  binary("add_row", [](Tape<double>& t, Var a, Var b) { return t.add_row(a, b); }, uniform(rng, 3, 5),
         uniform(rng, 1, 5), 3, 5);
  binary("mul", [](Tape<double>& t, Var a, Var b) { return t.mul(a, b); }, uniform(rng, 3, 5), uniform(rng, 3, 5), 3,
         5);
  unary("scale", [](Tape<double>& t, Var a) { return t.scale(a, 0.7); }, uniform(rng, 3, 5), 3, 5);
  unary("relu", [](Tape<double>& t, Var a) { return t.relu(a); }, away_from_zero(rng, 3, 5), 3, 5);
  unary("sigmoid", [](Tape<double>& t, Var a) { return t.sigmoid(a); }, uniform(rng, 3, 5, -3, 3), 3, 5);
  unary("softmax_rows", [](Tape<double>& t, Var a) { return t.softmax_rows(a, Mask{true, false, true, true, true}); },
        uniform(rng, 3, 5, -2, 2), 3, 5);
  {
    cases.push_back({"layer_norm_rows",
                     {input_spec("x", 3, 5), input_spec("gamma", 1, 5), input_spec("beta", 1, 5)},
                     {{"x", uniform(rng, 3, 5, -2, 2)}, {"gamma", uniform(rng, 1, 5, 0.5, 1.5)}, {"beta", uniform(rng, 1, 5)}},
                     projected([](Tape<double>& t, const ParamStore<double>& s) {
                       return t.layer_norm_rows(t.param(s, "x"), t.param(s, "gamma"), t.param(s, "beta"), 1e-5);
                     }, uniform(rng, 3, 5))});
  }
  binary("concat_cols", [](Tape<double>& t, Var a, Var b) { return t.concat_cols(std::vector<Var>{a, b}); },
         uniform(rng, 3, 5), uniform(rng, 3, 2), 3, 7);
  binary("interleave_cols", [](Tape<double>& t, Var a, Var b) { return t.interleave_cols(std::vector<Var>{a, b}); },
         uniform(rng, 3, 5), uniform(rng, 3, 5), 3, 10);
  unary("slice_cols", [](Tape<double>& t, Var a) { return t.slice_cols(a, 1, 3); }, uniform(rng, 3, 5), 3, 3);
  unary("slice_rows", [](Tape<double>& t, Var a) { return t.slice_rows(a, 1, 2); }, uniform(rng, 3, 5), 2, 5);
  unary("shift_rows+1", [](Tape<double>& t, Var a) { return t.shift_rows(a, 1); }, uniform(rng, 3, 5), 3, 5);
  unary("shift_rows-1", [](Tape<double>& t, Var a) { return t.shift_rows(a, -1); }, uniform(rng, 3, 5), 3, 5);
  unary("repeat_rows", [](Tape<double>& t, Var a) { return t.repeat_rows(a, 3); }, uniform(rng, 1, 5), 3, 5);
  unary("pad_rows", [](Tape<double>& t, Var a) { return t.pad_rows(a, 5); }, uniform(rng, 3, 5), 5, 5);
  unary("mask_rows", [](Tape<double>& t, Var a) { return t.mask_rows(a, Mask{true, false, true}); },
        uniform(rng, 3, 5), 3, 5);
  unary("max_pool_rows", [](Tape<double>& t, Var a) { return t.max_pool_rows(a, Mask{true, true, false}); },
        uniform(rng, 3, 5), 1, 5);
  cases.push_back({"sum", {input_spec("a", 3, 5)}, {{"a", uniform(rng, 3, 5)}},
                   [](Tape<double>& t, const ParamStore<double>& s) { return t.sum(t.param(s, "a")); }});
  {
    const Matrix w = uniform(rng, 3, 5);
    cases.push_back({"weighted_sum", {input_spec("a", 3, 5)}, {{"a", uniform(rng, 3, 5)}},
                     [w](Tape<double>& t, const ParamStore<double>& s) { return t.weighted_sum(t.param(s, "a"), w); }});
  }
  {
    const Matrix target = uniform(rng, 3, 1);
    cases.push_back({"masked_mse", {input_spec("a", 3, 1)}, {{"a", uniform(rng, 3, 1)}},
                     [target](Tape<double>& t, const ParamStore<double>& s) {
                       return t.masked_mse(t.param(s, "a"), target, Mask{true, false, true});
                     }});
  }
  return cases;
}

std::vector<Case> layer_cases(Rng& rng) {
  std::vector<Case> cases;
  const Mask mask{true, true, false};
  auto layer = [&](const std::string& name, std::vector<ParamSpec> specs, Eigen::Index in_cols, Eigen::Index out_rows,
                   Eigen::Index out_cols, std::function<Var(const Binder<double>&, Var)> body) {
    specs.push_back(input_spec("x", 3, in_cols));
    cases.push_back({name, std::move(specs), {{"x", uniform(rng, 3, in_cols)}},
                     projected([body](Tape<double>& t, const ParamStore<double>& s) {
                       const Binder<double> p{t, s, "l."};
                       return body(p, t.param(s, "x"));
                     }, uniform(rng, out_rows, out_cols))});
  };
  std::vector<ParamSpec> specs;
  declare_linear(specs, "l.", 5, 4);
  layer("linear", specs, 5, 3, 4, [](const Binder<double>& p, Var x) { return linear(p, x); });
  specs.clear();
  declare_conv1d(specs, "l.", 5, 4, 3);
  layer("conv1d_temporal", specs, 5, 3, 4,
        [mask](const Binder<double>& p, Var x) { return conv1d_temporal(p, x, mask, 3); });
  specs.clear();
  declare_attention(specs, "l.", 4);
  layer("multi_head_self_attention", specs, 4, 3, 4,
        [mask](const Binder<double>& p, Var x) { return multi_head_self_attention(p, x, mask, 2); });
  specs.clear();
  declare_layer_norm(specs, "l.", 5);
  layer("layer_norm", specs, 5, 3, 5, [mask](const Binder<double>& p, Var x) { return layer_norm(p, x, mask); });
  specs.clear();
  declare_feed_forward(specs, "l.", 5, 2);
  layer("feed_forward", specs, 5, 3, 5, [mask](const Binder<double>& p, Var x) { return feed_forward(p, x, mask); });
  specs.clear();
  layer("max_pool_time", specs, 5, 1, 5,
        [mask](const Binder<double>& p, Var x) { return max_pool_time(p.tape, x, mask); });
  return cases;
}

ModelConfig tiny_config() {
  ModelConfig cfg;
  cfg.d_in = 4;
  cfg.d = 8;
  cfg.heads = 2;
  cfg.decoder_width = 8;
  cfg.skim_decoder_width = 8;
  cfg.encoder_blocks = 1;
  cfg.views = ViewConfig{1, 16, 8};
  cfg.instructive_frames = 4;
  cfg.lsag = LsagConfig{1, 4, 3};
  return cfg;
}

std::vector<ParamSpec> with_prefixes(const std::vector<ParamSpec>& all, const std::vector<std::string>& prefixes) {
  std::vector<ParamSpec> out;
  for (const auto& s : all) {
    for (const auto& p : prefixes) {
      if (s.name.rfind(p, 0) == 0) {
        out.push_back(s);
        break;
      }
    }
  }
  return out;
}

std::vector<Case> composite_cases(Rng& rng) {
  std::vector<Case> cases;
  const Mask view_mask{true, true, true, true, true, true, false, false};
  const Matrix target = uniform(rng, 8, 1, 0.0, 0.3);

  auto lsag_decoder = [&](const std::string& name, ModelConfig cfg) {
    std::vector<ParamSpec> specs =
        with_prefixes(model_param_specs(cfg), {"focus.lsag.", "focus.fuse.", "focus.cnn.", "focus.decoder."});
    specs.push_back(input_spec("x", 8, cfg.d));
    specs.push_back(input_spec("z", 1, cfg.d));
    Matrix x = uniform(rng, 8, cfg.d);
    x.bottomRows(2).setZero();
    cases.push_back({name, std::move(specs), {{"x", x}, {"z", uniform(rng, 1, cfg.d)}},
                     [cfg, view_mask, target](Tape<double>& t, const ParamStore<double>& s) {
                       const SkimFocusNet<double> net(cfg, s);
                       const Var y = net.lsag(t, Embedding<double>{t.param(s, "x"), view_mask}, t.param(s, "z"));
                       const Var density = net.decode_density(t, Embedding<double>{y, view_mask});
                       return t.masked_mse(density, target, view_mask);
                     }});
  };
  ModelConfig cfg = tiny_config();
  lsag_decoder("lsag+decoder", cfg);
  ModelConfig adapt_only = cfg;
  adapt_only.ablations.long_short_enabled = false;
  lsag_decoder("lsag(adaption only)+decoder", adapt_only);
  ModelConfig long_short_only = cfg;
  long_short_only.ablations.feature_adaption_enabled = false;
  lsag_decoder("lsag(long-short only)+decoder", long_short_only);
  ModelConfig no_lsag = cfg;
  no_lsag.ablations.lsag_enabled = false;
  lsag_decoder("plain fusion+decoder", no_lsag);

  {
    const Matrix instructive = uniform(rng, 4, cfg.d_in);
    Matrix frames = uniform(rng, 8, cfg.d_in);
    frames.bottomRows(2).setZero();
    cases.push_back({"focus path (encode C, pool, encode view, lsag, decode)",
                     with_prefixes(model_param_specs(cfg), {"focus."}),
                     {},
                     [cfg, view_mask, target, instructive, frames](Tape<double>& t, const ParamStore<double>& s) {
                       const SkimFocusNet<double> net(cfg, s);
                       const Var z = net.pool_guidance(t, net.encode(t, instructive, Mask(4, true)));
                       return t.masked_mse(net.focus_view(t, frames, view_mask, z), target, view_mask);
                     }});
  }
  {
    Mask context_mask(16, true);
    for (int i = 12; i < 16; ++i) context_mask[static_cast<std::size_t>(i)] = false;
    Matrix context = uniform(rng, 16, cfg.d_in);
    context.bottomRows(4).setZero();
    const Matrix skim_target = uniform(rng, 16, 1, 0.0, 0.3);
    cases.push_back({"skim branch", with_prefixes(model_param_specs(cfg), {"skim."}), {},
                     [cfg, context_mask, context, skim_target](Tape<double>& t, const ParamStore<double>& s) {
                       const SkimFocusNet<double> net(cfg, s);
                       return t.masked_mse(net.skim_forward(t, context, context_mask).confidence, skim_target,
                                           context_mask);
                     }});
  }
  return cases;
}

}  // namespace

std::vector<GradCheckReport> gradcheck_suite(double tolerance, std::uint64_t seed) {
  Rng rng(derive_seed(seed, fnv1a("gradcheck")));
  std::vector<Case> cases = primitive_cases(rng);
  for (auto& c : layer_cases(rng)) cases.push_back(std::move(c));
  for (auto& c : composite_cases(rng)) cases.push_back(std::move(c));

  std::vector<GradCheckReport> reports;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    Case& c = cases[i];
    ParamStore<double> params = init_params<double>(c.specs, derive_seed(seed, i));
    for (auto& [name, value] : c.values) params.value(name) = value;
    reports.push_back(grad_check(c.name, c.loss, params, tolerance));
  }
  return reports;
}

}  // namespace sfn
