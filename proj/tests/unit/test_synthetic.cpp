#include <doctest.h>

#include <filesystem>
#include <set>

#include "sfn/error.hpp"
#include "sfn/io.hpp"
#include "sfn/synthetic.hpp"
#include "temp_dir.hpp"

using namespace sfn;

namespace {

std::vector<AnnotatedSequence> pool(const SynthConfig& cfg, int per_class, std::uint64_t salt) {
  std::vector<AnnotatedSequence> out;
  for (int c = 0; c < cfg.num_classes; ++c) {
    for (int k = 0; k < per_class; ++k) {
      AnnotatedSequence s = generate_sequence(c, 4, cfg, salt * 1000 + c * 10 + k);
      s.id = "p" + std::to_string(c) + "_" + std::to_string(k);
      out.push_back(std::move(s));
    }
  }
  return out;
}

}  // namespace

TEST_SUITE("synthetic") {
  TEST_CASE("generated sequences are annotated consistently") {
    SynthConfig cfg;
    for (int n : {0, 1, 5, 12}) {
      const AnnotatedSequence s = generate_sequence(2, n, cfg, 99);
      CHECK(s.count() == static_cast<std::size_t>(n));
      CHECK(s.feature_width() == cfg.d_in);
      CHECK(s.class_label == "action_02");
      CHECK_NOTHROW(validate(s));
      for (const Cycle& c : s.cycles) {
        CHECK(c.end - c.start >= cfg.cycle_len_min);
        CHECK(c.end - c.start <= cfg.cycle_len_max);
      }
      CHECK(s.length() > 0);
    }
  }

  TEST_CASE("same seed, same sequence; different seed, different sequence") {
    SynthConfig cfg;
    const auto a = generate_sequence(1, 6, cfg, 7);
    const auto b = generate_sequence(1, 6, cfg, 7);
    const auto c = generate_sequence(1, 6, cfg, 8);
    CHECK(a.features == b.features);
    CHECK(a.cycles == b.cycles);
    CHECK(a.features.rows() * a.features.cols() > 0);
    CHECK_FALSE((a.features.rows() == c.features.rows() && a.features == c.features));
  }

  TEST_CASE("noise-free cycles repeat the class template exactly") {
    SynthConfig cfg;
    cfg.noise_std = 0.0;
    cfg.cycle_len_min = cfg.cycle_len_max = 20;
    const auto s = generate_sequence(3, 4, cfg, 1);
    const Eigen::MatrixXd tmpl = ClassTemplate(3, cfg).render(20);
    for (const Cycle& c : s.cycles) {
      const Eigen::MatrixXd got = s.features.middleRows(c.start, 20).cast<double>();
      CHECK((got - tmpl).cwiseAbs().maxCoeff() < 1e-5);
    }
  }

  TEST_CASE("templates have unit rms and differ between classes") {
    SynthConfig cfg;
    const ClassTemplate a(0, cfg), b(1, cfg);
    const Eigen::MatrixXd ra = a.render(64), rb = b.render(64);
    CHECK(std::sqrt(ra.squaredNorm() / 64) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK((ra - rb).norm() > 1.0);
  }

  TEST_CASE("invalid synth configs are rejected") {
    SynthConfig cfg;
    cfg.cycle_len_min = 50;
    CHECK_THROWS_AS(validate(cfg), Error);
    cfg = SynthConfig{};
    cfg.idle_gap_prob = 1.5;
    CHECK_THROWS_AS(validate(cfg), Error);
  }

  TEST_CASE("composer interleaves target segments without cutting cycles") {
    SynthConfig cfg;
    const auto distractors = pool(cfg, 2, 1);
    const auto exemplars = pool(cfg, 2, 2);
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
      AnnotatedSequence target = generate_sequence(static_cast<int>(seed % 8), 6, cfg, seed + 500);
      target.id = "t" + std::to_string(seed);
      const MultiRepUnit u = compose_multirep(target, distractors, exemplars, ComposeConfig{}, seed);
      CHECK(u.exemplar.class_label == target.class_label);
      CHECK(u.composite.count() == target.count());
      CHECK(u.distinct_classes() >= 4);
      CHECK_NOTHROW(validate(u.composite));

      // Target frames appear in order and unchanged.
      Index read = 0;
      Index covered = 0;
      for (const Segment& s : u.segment_layout) {
        CHECK(s.start == covered);
        covered = s.end;
        if (s.class_label != target.class_label) continue;
        const Index len = s.end - s.start;
        CHECK(u.composite.features.middleRows(s.start, len) == target.features.middleRows(read, len));
        read += len;
      }
      CHECK(covered == u.composite.length());
      CHECK(read == target.length());
      // Cycles keep their lengths.
      for (std::size_t i = 0; i < target.cycles.size(); ++i) {
        CHECK(u.composite.cycles[i].end - u.composite.cycles[i].start ==
              target.cycles[i].end - target.cycles[i].start);
      }
    }
  }

  TEST_CASE("composer needs distractors and a matching exemplar") {
    SynthConfig cfg;
    cfg.num_classes = 3;
    AnnotatedSequence target = generate_sequence(0, 3, cfg, 1);
    const auto few = pool(cfg, 1, 1);
    CHECK_THROWS_AS(compose_multirep(target, few, few, ComposeConfig{}, 1), Error);
    SynthConfig wide;
    const auto distractors = pool(wide, 1, 3);
    std::vector<AnnotatedSequence> other;
    for (const auto& s : distractors) {
      if (s.class_label != target.class_label) other.push_back(s);
    }
    CHECK_THROWS_AS(compose_multirep(target, distractors, other, ComposeConfig{}, 1), Error);
  }

  TEST_CASE("datasets round-trip through manifests") {
    TempDir dir("synth");
    SynthConfig cfg;
    build_dataset(dir.path, SplitSpec{6, 2, 3}, cfg);
    const Dataset train = load_dataset(dir.path / "train.jsonl");
    REQUIRE(train.sequences.size() == 6);
    CHECK(load_dataset(dir.path / "test.jsonl").sequences.size() == 3);
    const AnnotatedSequence& s = train.sequences[1];
    CHECK(s.id == "train_00001");
    CHECK(s.class_label == "action_01");
    CHECK_NOTHROW(validate(s));
  }

  TEST_CASE("multirep datasets carry class-matched exemplars") {
    TempDir dir("multi");
    SynthConfig cfg;
    build_multirep_dataset(dir.path, SplitSpec{8, 2, 2}, cfg, MultiRepConfig{});
    CHECK_NOTHROW(check_exemplars(dir.path / "train.jsonl"));
    const CountingSet set = load_counting_set(dir.path / "train.jsonl");
    REQUIRE(set.size() == 8);
    for (std::size_t i = 0; i < set.size(); ++i) {
      REQUIRE(set.exemplar(i) != nullptr);
      CHECK(set.exemplar(i)->class_label == set.items[i].class_label);
    }
  }
}
