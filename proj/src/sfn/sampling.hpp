#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sfn/sequence.hpp"

namespace sfn {

enum class SamplingStrategy { random, uniform, top_nc };

std::string to_string(SamplingStrategy s);
SamplingStrategy parse_sampling(const std::string& text);

/// Per-frame confidence over the contextual view.
using ConfidenceMap = DensityMap;

struct InstructiveFrames {
  std::vector<Index> indices;  // positions into the contextual view
  FeatureMatrix features;      // raw-input rows at those positions
};

/// Selects `count` distinct non-masked positions, returned in increasing
/// order.
///  - random:  seeded draw without replacement;
///  - uniform: floor(k * L / count) over the L non-masked positions;
///  - top_nc:  the `count` highest confidences, ties toward lower index.
/// Throws if `count` exceeds the non-masked frames or is < 1.
std::vector<Index> sample_instructive(const ConfidenceMap& confidence, SamplingStrategy strategy,
                                      int count, std::uint64_t seed);

}  // namespace sfn
