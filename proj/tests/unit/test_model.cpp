#include <doctest.h>

#include <random>

#include "sfn/error.hpp"
#include "sfn/layers.hpp"
#include "sfn/model.hpp"
#include "sfn/synthetic.hpp"

using namespace sfn;

namespace {

ModelConfig small_config() {
  ModelConfig cfg;
  cfg.d_in = 6;
  cfg.d = 8;
  cfg.heads = 2;
  cfg.ffn_mult = 2;
  cfg.encoder_blocks = 2;
  cfg.decoder_width = 8;
  cfg.skim_decoder_width = 4;
  cfg.views = ViewConfig{2, 24, 10};
  cfg.instructive_frames = 5;
  cfg.lsag = LsagConfig{2, 4, 3};
  return cfg;
}

// Parameter count written out layer by layer.
std::size_t expected_count(const ModelConfig& c) {
  const std::size_t d = c.d, k = c.conv_kernel, kl = c.lsag.conv_kernel, h = c.heads;
  auto lin = [](std::size_t i, std::size_t o) { return i * o + o; };
  auto attn = [&](std::size_t w) { return 4 * lin(w, w); };
  auto ln = [](std::size_t w) { return 2 * w; };
  auto encoder = [&](int blocks) { return lin(c.d_in, d) + blocks * (lin(k * d, d) + ln(d) + attn(d) + ln(d)); };
  auto decoder = [&](std::size_t len, std::size_t w) {
    return 2 * lin(d, d) + lin(len * h, w) + attn(w) + ln(w) + lin(w, w * c.ffn_mult) + lin(w * c.ffn_mult, w) +
           ln(w) + lin(w, 1);
  };
  std::size_t n = encoder(c.encoder_blocks) + decoder(c.views.fine_length, c.decoder_width);
  if (c.ablations.skim_enabled) n += encoder(c.skim_encoder_blocks) + decoder(c.views.context_length, c.skim_decoder_width);
  const std::size_t hidden = 2 * d / c.lsag.bottleneck_ratio;
  n += c.ablations.feature_adaption() ? lin(2 * d, hidden) + lin(hidden, d) + lin(kl * d, d) : lin(d, d);
  n += c.lsag.num_blocks * (c.ablations.long_short() ? attn(d) + ln(d) + lin(kl * d, d) + ln(d) : lin(kl * d, d) + ln(d));
  return n;
}

Mat<double> random_rows(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> n(0.0, 1.0);
  Mat<double> m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

AnnotatedSequence sequence_of(Index frames, int d_in, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  AnnotatedSequence s;
  s.id = "s" + std::to_string(seed);
  s.features = random_rows(rng, frames, d_in).cast<float>();
  return s;
}

}  // namespace

TEST_SUITE("model") {
  TEST_CASE("parameter counts match the layer-by-layer formula") {
    ModelConfig c = small_config();
    CHECK(ParamStore<float>(model_param_specs(c)).parameter_count() == expected_count(c));
    c.ablations.skim_enabled = false;
    const ParamStore<float> no_skim(model_param_specs(c));
    CHECK(no_skim.parameter_count() == expected_count(c));
    CHECK(no_skim.parameter_count("skim.") == 0);
    c = small_config();
    c.ablations.lsag_enabled = false;
    const ParamStore<float> no_lsag(model_param_specs(c));
    CHECK(no_lsag.parameter_count() == expected_count(c));
    CHECK(no_lsag.parameter_count("focus.lsag.") == 0);
    CHECK(no_lsag.parameter_count("focus.cnn.") > 0);
    c = small_config();
    c.ablations.long_short_enabled = false;
    CHECK(ParamStore<float>(model_param_specs(c)).parameter_count() == expected_count(c));
  }

  TEST_CASE("config digest tracks shape-relevant fields only") {
    ModelConfig a = small_config(), b = small_config();
    b.instructive_frames = 3;
    b.trim_padding = false;
    CHECK(config_digest(a) == config_digest(b));
    b.d = 16;
    CHECK(config_digest(a) != config_digest(b));
  }

  TEST_CASE("invalid model configs are rejected") {
    ModelConfig c = small_config();
    c.heads = 3;
    CHECK_THROWS_AS(validate(c), Error);
    c = small_config();
    c.lsag.bottleneck_ratio = 3;
    CHECK_THROWS_AS(validate(c), Error);
    c = small_config();
    c.ablations.feature_adaption_enabled = false;
    c.ablations.long_short_enabled = false;
    CHECK_THROWS_AS(validate(c), Error);
  }

  TEST_CASE("conv1d matches a direct sum with zero padding") {
    std::mt19937_64 rng(2);
    std::vector<ParamSpec> specs;
    declare_conv1d(specs, "c.", 2, 3, 3);
    ParamStore<double> store = init_params<double>(specs, 4);
    store.value("c.b") = random_rows(rng, 1, 3);
    const Mat<double> x = random_rows(rng, 5, 2);
    Tape<double> t;
    const Mask mask{true, true, true, true, false};
    const Mat<double> y = t.value(conv1d_temporal(Binder<double>{t, store, "c."}, t.constant(x), mask, 3));
    const Mat<double>& w = store.value("c.w");  // rows: tap-major, channel-minor
    for (Eigen::Index r = 0; r < 5; ++r) {
      for (Eigen::Index o = 0; o < 3; ++o) {
        double want = 0.0;
        if (mask[r]) {
          want = store.value("c.b")(0, o);
          for (int k = 0; k < 3; ++k) {
            const Eigen::Index src = r + k - 1;
            if (src < 0 || src >= 5 || !mask[src]) continue;
            for (Eigen::Index ch = 0; ch < 2; ++ch) want += x(src, ch) * w(k * 2 + ch, o);
          }
        }
        CHECK(y(r, o) == doctest::Approx(want).epsilon(1e-12));
      }
    }
  }

  TEST_CASE("padded frames never influence real ones") {
    const ModelConfig cfg = small_config();
    const auto params = init_params<double>(model_param_specs(cfg), 8);
    const SkimFocusNet<double> net(cfg, params);
    std::mt19937_64 rng(1);
    const Mat<double> real = random_rows(rng, 7, cfg.d_in);
    Mask mask(10, false);
    std::fill(mask.begin(), mask.begin() + 7, true);
    Mat<double> a = Mat<double>::Zero(10, cfg.d_in), b = random_rows(rng, 10, cfg.d_in) * 50.0;
    a.topRows(7) = real;
    b.topRows(7) = real;

    Tape<double> t;
    const Var g = net.pool_guidance(t, net.encode(t, random_rows(rng, 4, cfg.d_in), Mask(4, true)));
    const Mat<double> da = t.value(net.focus_view(t, a, mask, g));
    const Mat<double> db = t.value(net.focus_view(t, b, mask, g));
    const Mat<double> trimmed = t.value(net.focus_view(t, real, Mask(7, true), g));
    CHECK((da - db).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((da.topRows(7) - trimmed).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(da.bottomRows(3).isZero());
  }

  TEST_CASE("LSAG keeps the embedding shape for every variant") {
    for (int variant = 0; variant < 4; ++variant) {
      ModelConfig cfg = small_config();
      cfg.ablations.lsag_enabled = variant != 1;
      cfg.ablations.feature_adaption_enabled = variant != 2;
      cfg.ablations.long_short_enabled = variant != 3;
      const auto params = init_params<double>(model_param_specs(cfg), 3);
      const SkimFocusNet<double> net(cfg, params);
      std::mt19937_64 rng(variant);
      Tape<double> t;
      const Embedding<double> x = net.encode(t, random_rows(rng, 9, cfg.d_in), Mask(9, true));
      const Var y = net.lsag(t, x, net.zero_guidance(t));
      CHECK(t.rows(y) == 9);
      CHECK(t.cols(y) == cfg.d);
      CHECK_THROWS_AS(net.lsag(t, x, t.constant(Mat<double>::Zero(1, 3))), Error);
    }
  }

  TEST_CASE("guidance changes the adapted features") {
    const ModelConfig cfg = small_config();
    const auto params = init_params<double>(model_param_specs(cfg), 3);
    const SkimFocusNet<double> net(cfg, params);
    std::mt19937_64 rng(5);
    Tape<double> t;
    const Embedding<double> x = net.encode(t, random_rows(rng, 6, cfg.d_in), Mask(6, true));
    const Mat<double> a = t.value(net.lsag(t, x, net.zero_guidance(t)));
    const Mat<double> b = t.value(net.lsag(t, x, t.constant(random_rows(rng, 1, cfg.d))));
    CHECK((a - b).cwiseAbs().maxCoeff() > 1e-6);
  }

  TEST_CASE("counting: views, trimming and skim reuse") {
    ModelConfig cfg = small_config();
    const auto params = init_params<float>(model_param_specs(cfg), 1);
    const SkimFocusNet<float> net(cfg, params);
    const AnnotatedSequence seq = sequence_of(57, cfg.d_in, 3);  // L = 29 -> 3 views of 10

    const std::uint64_t before = skim_forward_calls();
    const VideoCount once = count_video(net, seq, nullptr, CountOptions{});
    CHECK(skim_forward_calls() - before == 1);
    CHECK(once.skim_passes == 1);
    CHECK(once.per_view_sums.size() == 3);
    CHECK(once.instructive.size() == 5);
    CHECK(once.skim_confidence.size() == 24);
    double sum = 0.0;
    for (double v : once.per_view_sums) sum += v;
    CHECK(once.raw_count == doctest::Approx(sum));
    CHECK(once.count == std::max(0.0, once.raw_count));

    CountOptions baseline;
    baseline.reuse_skim = false;
    const VideoCount per_view = count_video(net, seq, nullptr, baseline);
    CHECK(per_view.skim_passes == 3);
    CHECK(per_view.raw_count == doctest::Approx(once.raw_count).epsilon(1e-6));

    ModelConfig untrimmed_cfg = cfg;
    untrimmed_cfg.trim_padding = false;
    const SkimFocusNet<float> untrimmed(untrimmed_cfg, params);
    CHECK(count_video(untrimmed, seq, nullptr, CountOptions{}).raw_count ==
          doctest::Approx(once.raw_count).epsilon(1e-4));
  }

  TEST_CASE("N_C is capped by the real contextual frames") {
    ModelConfig cfg = small_config();
    cfg.instructive_frames = 50;
    const auto params = init_params<float>(model_param_specs(cfg), 1);
    const SkimFocusNet<float> net(cfg, params);
    const AnnotatedSequence seq = sequence_of(9, cfg.d_in, 4);  // 5 downsampled frames
    CHECK(count_video(net, seq, nullptr, CountOptions{}).instructive.size() == 5);
  }

  TEST_CASE("specified mode skims the exemplar, not the video") {
    const ModelConfig cfg = small_config();
    const auto params = init_params<float>(model_param_specs(cfg), 1);
    const SkimFocusNet<float> net(cfg, params);
    const AnnotatedSequence seq = sequence_of(40, cfg.d_in, 5);
    const AnnotatedSequence ex1 = sequence_of(30, cfg.d_in, 6), ex2 = sequence_of(30, cfg.d_in, 7);
    CountOptions opt;
    opt.mode = CountMode::specified;
    CHECK_THROWS_AS(count_video(net, seq, nullptr, opt), Error);
    const VideoCount a = count_video(net, seq, &ex1, opt);
    const VideoCount b = count_video(net, seq, &ex2, opt);
    CHECK(a.skim_confidence.size() == 24);
    CHECK(a.raw_count != b.raw_count);
  }

  TEST_CASE("skim-disabled model counts with zero guidance") {
    ModelConfig cfg = small_config();
    cfg.ablations.skim_enabled = false;
    const auto params = init_params<float>(model_param_specs(cfg), 1);
    const SkimFocusNet<float> net(cfg, params);
    const std::uint64_t before = skim_forward_calls();
    const VideoCount r = count_video(net, sequence_of(30, cfg.d_in, 2), nullptr, CountOptions{});
    CHECK(skim_forward_calls() == before);
    CHECK(r.skim_passes == 0);
    CHECK(r.skim_confidence.size() == 0);
    Tape<float> t;
    CHECK_THROWS_AS(net.skim_forward(t, Mat<float>::Zero(4, cfg.d_in), Mask(4, true)), Error);
  }

  TEST_CASE("input width mismatches are reported") {
    const ModelConfig cfg = small_config();
    const auto params = init_params<float>(model_param_specs(cfg), 1);
    const SkimFocusNet<float> net(cfg, params);
    CHECK_THROWS_AS(count_video(net, sequence_of(30, cfg.d_in + 1, 2), nullptr, CountOptions{}), Error);
  }
}
