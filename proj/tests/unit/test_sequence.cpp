#include <doctest.h>

#include <cmath>
#include <numeric>

#include "generators.hpp"
#include "sfn/error.hpp"
#include "sfn/sequence.hpp"

using namespace sfn;

namespace {

// Straight from the definition: per-cycle Gaussian weights at frame centres,
// normalised to one.
std::vector<double> oracle_raw_mass(const AnnotatedSequence& seq) {
  std::vector<double> out(static_cast<std::size_t>(seq.length()), 0.0);
  for (const Cycle& c : seq.cycles) {
    const double mu = (c.start + c.end) / 2.0;
    const double sigma = (c.end - c.start) / 6.0;
    double z = 0.0;
    for (Index f = c.start; f < c.end; ++f) z += std::exp(-std::pow((f + 0.5 - mu) / sigma, 2) / 2.0);
    for (Index f = c.start; f < c.end; ++f) {
      out[f] += std::exp(-std::pow((f + 0.5 - mu) / sigma, 2) / 2.0) / z;
    }
  }
  return out;
}

// Nearest-grid-point assignment by exhaustive search, with the outer
// catchment expressed as a real-valued half spacing.
std::vector<double> oracle_rebin(const AnnotatedSequence& seq, const std::vector<Index>& grid, Index spacing) {
  const auto mass = oracle_raw_mass(seq);
  std::vector<double> out(grid.size(), 0.0);
  const Index n = static_cast<Index>(grid.size());
  const Index L = seq.length();
  const double left = n >= 2 ? grid[1] - grid[0] : spacing;
  const double right = n >= 2 ? grid[n - 1] - grid[n - 2] : spacing;
  for (Index f = 0; f < L; ++f) {
    if (left > 0 && grid[0] - left >= 0 && grid[0] - f >= left / 2.0) continue;
    if (right > 0 && grid[n - 1] + right <= L - 1 && f - grid[n - 1] > right / 2.0) continue;
    std::size_t best = 0;
    for (std::size_t j = 1; j < grid.size(); ++j) {
      if (std::abs(f - grid[j]) < std::abs(f - grid[best])) best = j;
    }
    out[best] += mass[f];
  }
  return out;
}

double total(const DensityMap& m) { return count_from_density(m); }

}  // namespace

TEST_SUITE("sequence") {
  TEST_CASE("validate rejects bad cycles") {
    AnnotatedSequence seq;
    seq.features = FeatureMatrix::Zero(10, 1);
    seq.cycles = {{0, 4}, {4, 10}};
    CHECK_NOTHROW(validate(seq));
    seq.cycles = {{0, 4}, {3, 8}};
    CHECK_THROWS_AS(validate(seq), Error);
    seq.cycles = {{2, 2}};
    CHECK_THROWS_AS(validate(seq), Error);
    seq.cycles = {{5, 11}};
    CHECK_THROWS_AS(validate(seq), Error);
  }

  TEST_CASE("short sequence decomposes into one padded view per N_F frames") {
    const ViewConfig cfg{4, 8, 4};
    const ViewPlan plan = decompose(21, cfg);  // L = ceil(21 / 4) = 6
    CHECK(plan.downsampled_length() == 6);
    CHECK(plan.contextual_indices == std::vector<Index>{0, 4, 8, 12, 16, 20, 20, 20});
    CHECK(plan.context_mask == Mask{true, true, true, true, true, true, false, false});
    REQUIRE(plan.num_views() == 2);
    CHECK(plan.fine_views[0] == std::vector<Index>{0, 4, 8, 12});
    CHECK(plan.fine_views[1] == std::vector<Index>{16, 20, 20, 20});
    CHECK(plan.fine_masks[1] == Mask{true, true, false, false});
  }

  TEST_CASE("long sequence subsamples the contextual view") {
    const ViewPlan plan = decompose(400, ViewConfig{1, 100, 64});
    REQUIRE(plan.contextual_indices.size() == 100);
    for (Index k = 0; k < 100; ++k) CHECK(plan.contextual_indices[k] == k * 400 / 100);
    CHECK(count_valid(plan.context_mask) == 100);
    CHECK(plan.num_views() == 7);
  }

  TEST_CASE("decompose rejects empty input and bad configs") {
    CHECK_THROWS_AS(decompose(0, ViewConfig{}), Error);
    CHECK_THROWS_AS(decompose(10, ViewConfig{0, 8, 4}), Error);
  }

  TEST_CASE("raw density matches the closed form") {
    AnnotatedSequence seq;
    seq.features = FeatureMatrix::Zero(30, 1);
    seq.cycles = {{0, 6}, {10, 22}};
    const auto got = raw_frame_density(seq);
    const auto want = oracle_raw_mass(seq);
    for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
    // Symmetric about the cycle midpoint; zero between cycles.
    CHECK(got[2] == doctest::Approx(got[3]).epsilon(1e-12));
    CHECK(got[7] == 0.0);
    CHECK(std::accumulate(got.begin(), got.end(), 0.0) == doctest::Approx(2.0).epsilon(1e-12));
  }

  TEST_CASE("three-frame cycle: hand values") {
    // sigma = 0.5, frame centres at offsets -1, 0, 1 -> weights e^-2, 1, e^-2.
    AnnotatedSequence seq;
    seq.features = FeatureMatrix::Zero(3, 1);
    seq.cycles = {{0, 3}};
    const auto m = raw_frame_density(seq);
    const double e = std::exp(-2.0);
    CHECK(m[0] == doctest::Approx(e / (1 + 2 * e)).epsilon(1e-14));
    CHECK(m[1] == doctest::Approx(1 / (1 + 2 * e)).epsilon(1e-14));
  }

  TEST_CASE("rebinned density agrees with the exhaustive oracle") {
    gen::Source s(11);
    for (int trial = 0; trial < 200; ++trial) {
      const AnnotatedSequence seq = gen::annotated(s, 8, 300);
      const Index rate = s.integer(1, 6);
      const Index down = (seq.length() + rate - 1) / rate;
      const Index a = s.integer(0, down - 1), b = s.integer(a, down - 1);
      std::vector<Index> grid;
      for (Index k = a; k <= b; ++k) grid.push_back(k * rate);
      const DensityMap got = build_gt_density(seq, grid, Mask(grid.size(), true), rate);
      const auto want = oracle_rebin(seq, grid, rate);
      for (std::size_t i = 0; i < grid.size(); ++i) REQUIRE(got.values[i] == doctest::Approx(want[i]).epsilon(1e-12));
    }
  }

  TEST_CASE("full grid conserves the cycle count") {
    gen::Source s(5);
    for (int trial = 0; trial < 100; ++trial) {
      const AnnotatedSequence seq = gen::annotated(s);
      const ViewPlan plan = decompose(seq, ViewConfig{static_cast<int>(s.integer(1, 8)), 4096, 64});
      const DensityMap m = build_gt_density(seq, plan.contextual_indices, plan.context_mask);
      CHECK(total(m) == doctest::Approx(static_cast<double>(seq.count())).epsilon(1e-9));
    }
  }

  TEST_CASE("a one-frame trailing view keeps only its own catchment") {
    // 65 downsampled frames at R = 4: the second fine view holds index 256 only.
    AnnotatedSequence seq;
    seq.features = FeatureMatrix::Zero(257, 1);
    for (Index t = 0; t + 16 <= 257; t += 16) seq.cycles.push_back({t, t + 16});
    const ViewPlan plan = decompose(seq, ViewConfig{4, 256, 64});
    REQUIRE(plan.num_views() == 2);
    const DensityMap first = build_gt_density(seq, plan.fine_views[0], plan.fine_masks[0], 4);
    const DensityMap last = build_gt_density(seq, plan.fine_views[1], plan.fine_masks[1], 4);
    CHECK(total(last) < 0.05);
    CHECK(total(first) + total(last) == doctest::Approx(16.0).epsilon(1e-9));
    // Without the spacing a lone index would absorb the whole sequence.
    const DensityMap unbounded = build_gt_density(seq, plan.fine_views[1], plan.fine_masks[1]);
    CHECK(total(unbounded) == doctest::Approx(16.0).epsilon(1e-9));
  }

  TEST_CASE("padded slots receive no mass") {
    AnnotatedSequence seq;
    seq.features = FeatureMatrix::Zero(20, 1);
    seq.cycles = {{0, 10}, {10, 20}};
    const std::vector<Index> idx{0, 4, 8, 12, 16, 16, 16};
    const Mask mask{true, true, true, true, true, false, false};
    const DensityMap m = build_gt_density(seq, idx, mask);
    CHECK(m.values[5] == 0.0);
    CHECK(m.values[6] == 0.0);
    CHECK(total(m) == doctest::Approx(2.0).epsilon(1e-12));
  }

  TEST_CASE("build_gt_density argument checks") {
    AnnotatedSequence seq;
    seq.features = FeatureMatrix::Zero(20, 1);
    const std::vector<Index> idx{0, 4};
    CHECK_THROWS_AS(build_gt_density(seq, idx, Mask{true}), Error);
    CHECK_THROWS_AS(build_gt_density(seq, std::vector<Index>{}, Mask{}), Error);
    CHECK_THROWS_AS(build_gt_density(seq, std::vector<Index>{8, 4}, Mask{true, true}), Error);
    CHECK_THROWS_AS(build_gt_density(seq, std::vector<Index>{0, 40}, Mask{true, true}), Error);
  }

  TEST_CASE("gather_rows zeroes masked rows") {
    FeatureMatrix f(3, 2);
    f << 1, 2, 3, 4, 5, 6;
    const FeatureMatrix g = gather_rows(f, std::vector<Index>{2, 0, 0}, Mask{true, true, false});
    CHECK(g(0, 0) == 5);
    CHECK(g(1, 1) == 2);
    CHECK(g.row(2).isZero());
  }
}
