#include "sfn/sampling.hpp"

#include <algorithm>
#include <numeric>

#include "sfn/error.hpp"
#include "sfn/random.hpp"

namespace sfn {

std::string to_string(SamplingStrategy s) {
  switch (s) {
    case SamplingStrategy::random: return "random";
    case SamplingStrategy::uniform: return "uniform";
    case SamplingStrategy::top_nc: return "top_nc";
  }
  return "?";
}

SamplingStrategy parse_sampling(const std::string& text) {
  if (text == "random") return SamplingStrategy::random;
  if (text == "uniform") return SamplingStrategy::uniform;
  if (text == "top_nc") return SamplingStrategy::top_nc;
  fail(ErrorCode::invalid_argument, "unknown sampling strategy '" + text +
                                        "' (expected random, uniform or top_nc)");
}

std::vector<Index> sample_instructive(const ConfidenceMap& confidence, SamplingStrategy strategy,
                                      int count, std::uint64_t seed) {
  if (confidence.mask.size() != confidence.values.size()) {
    fail(ErrorCode::invalid_argument, "confidence mask does not match values");
  }
  std::vector<Index> valid;
  for (std::size_t i = 0; i < confidence.mask.size(); ++i) {
    if (confidence.mask[i]) valid.push_back(static_cast<Index>(i));
  }
  if (count < 1) fail(ErrorCode::invalid_argument, "N_C must be >= 1");
  if (static_cast<std::size_t>(count) > valid.size()) {
    fail(ErrorCode::invalid_argument, "N_C=" + std::to_string(count) + " exceeds the " +
                                          std::to_string(valid.size()) + " available frames");
  }

  std::vector<Index> picked;
  const auto n = static_cast<Index>(count);
  const auto available = static_cast<Index>(valid.size());
  switch (strategy) {
    case SamplingStrategy::random: {
      Rng rng(seed);
      std::vector<Index> pool = valid;
      // Partial Fisher-Yates.
      for (Index k = 0; k < n; ++k) {
        const Index j = std::uniform_int_distribution<Index>(k, available - 1)(rng);
        std::swap(pool[static_cast<std::size_t>(k)], pool[static_cast<std::size_t>(j)]);
      }
      picked.assign(pool.begin(), pool.begin() + n);
      break;
    }
    case SamplingStrategy::uniform:
      for (Index k = 0; k < n; ++k) picked.push_back(valid[static_cast<std::size_t>(k * available / n)]);
      break;
    case SamplingStrategy::top_nc: {
      picked = valid;
      std::stable_sort(picked.begin(), picked.end(), [&](Index a, Index b) {
        return confidence.values[static_cast<std::size_t>(a)] > confidence.values[static_cast<std::size_t>(b)];
      });
      picked.resize(static_cast<std::size_t>(n));
      break;
    }
  }
  std::sort(picked.begin(), picked.end());
  return picked;
}

}  // namespace sfn
