#pragma once

// Random case generators for the property tests.

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

#include "sfn/sequence.hpp"

namespace gen {

using sfn::Index;

struct Source {
  std::mt19937_64 rng;
  explicit Source(std::uint64_t seed) : rng(seed) {}

  Index integer(Index lo, Index hi) { return std::uniform_int_distribution<Index>(lo, hi)(rng); }
  double real(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
  bool coin(double p = 0.5) { return std::bernoulli_distribution(p)(rng); }
};

/// A sequence of `length` frames (zero features) with random sorted,
/// non-overlapping cycles of 2..max_cycle frames and random gaps.
inline sfn::AnnotatedSequence annotated(Source& s, Index min_length = 8, Index max_length = 600,
                                        Index max_cycle = 40) {
  sfn::AnnotatedSequence seq;
  seq.id = "gen";
  const Index length = s.integer(min_length, max_length);
  seq.features = sfn::FeatureMatrix::Zero(length, 2);
  Index t = s.integer(0, 5);
  while (true) {
    const Index len = s.integer(2, max_cycle);
    if (t + len > length) break;
    seq.cycles.push_back({t, t + len});
    t += len + (s.coin(0.3) ? s.integer(1, 12) : 0);
  }
  return seq;
}

/// Cut points splitting [0, n) into contiguous non-empty chunks.
inline std::vector<Index> tiling(Source& s, Index n) {
  std::vector<Index> cuts{0};
  Index at = 0;
  while (at < n) {
    at = std::min(n, at + s.integer(1, std::max<Index>(1, n / 2)));
    cuts.push_back(at);
  }
  return cuts;
}

}  // namespace gen
