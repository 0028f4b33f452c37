#include <doctest.h>

#include <set>

#include "sampling_oracles.hpp"
#include "sfn/error.hpp"

using namespace sfn;

TEST_SUITE("sampling") {
  TEST_CASE("top N_C on a hand example") {
    ConfidenceMap c{{0.1, 0.9, 0.5, 0.9, 0.7, 2.0}, {true, true, true, true, true, false}};
    CHECK(sample_instructive(c, SamplingStrategy::top_nc, 2, 0) == std::vector<Index>{1, 3});
    CHECK(sample_instructive(c, SamplingStrategy::top_nc, 3, 0) == std::vector<Index>{1, 3, 4});
    ConfidenceMap tied{{1, 1, 1, 1}, {true, true, true, true}};
    CHECK(sample_instructive(tied, SamplingStrategy::top_nc, 2, 0) == std::vector<Index>{0, 1});
  }

  TEST_CASE("uniform picks floor(k L / N_C) of the real frames") {
    ConfidenceMap c{std::vector<double>(10, 0.0), Mask{true, false, true, true, true, true, true, true, false, false}};
    // Real frames: 0 2 3 4 5 6 7 (L = 7); N_C = 3 -> k L / 3 = 0, 2, 4.
    CHECK(sample_instructive(c, SamplingStrategy::uniform, 3, 0) == std::vector<Index>{0, 3, 5});
  }

  TEST_CASE("random draws are seeded, distinct and unpadded") {
    gen::Source s(3);
    for (int trial = 0; trial < 100; ++trial) {
      const auto c = oracle::random_confidence(s, s.integer(1, 40), false);
      const int n = static_cast<int>(s.integer(1, static_cast<Index>(count_valid(c.mask))));
      const auto a = sample_instructive(c, SamplingStrategy::random, n, 77 + trial);
      CHECK(a == sample_instructive(c, SamplingStrategy::random, n, 77 + trial));
      CHECK(std::set<Index>(a.begin(), a.end()).size() == static_cast<std::size_t>(n));
      CHECK(std::is_sorted(a.begin(), a.end()));
      for (Index i : a) CHECK(c.mask[i]);
    }
  }

  TEST_CASE("properties over random maps") {
    gen::Source s(4);
    for (int trial = 0; trial < 200; ++trial) {
      const auto c = oracle::random_confidence(s, s.integer(1, 64), s.coin());
      const int n = static_cast<int>(s.integer(1, static_cast<Index>(count_valid(c.mask))));
      CHECK(oracle::top_nc_optimal(c, sample_instructive(c, SamplingStrategy::top_nc, n, 0), n) == "");
      CHECK(oracle::uniform_formula(c, sample_instructive(c, SamplingStrategy::uniform, n, 0), n) == "");
      const Index len = s.integer(1, 48);
      CHECK(oracle::permutation_equivariant(s, len, static_cast<int>(s.integer(1, len))) == "");
    }
  }

  TEST_CASE("invalid requests") {
    ConfidenceMap c{{1, 2, 3}, {true, false, true}};
    CHECK_THROWS_AS(sample_instructive(c, SamplingStrategy::top_nc, 3, 0), Error);
    CHECK_THROWS_AS(sample_instructive(c, SamplingStrategy::top_nc, 0, 0), Error);
    c.mask.pop_back();
    CHECK_THROWS_AS(sample_instructive(c, SamplingStrategy::uniform, 1, 0), Error);
    CHECK(parse_sampling("top_nc") == SamplingStrategy::top_nc);
    CHECK(to_string(SamplingStrategy::uniform) == "uniform");
    CHECK_THROWS_AS(parse_sampling("best"), Error);
  }
}
