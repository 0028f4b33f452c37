#include "sfn/sequence.hpp"

#include <algorithm>
#include <cmath>

#include "sfn/error.hpp"

namespace sfn {

void validate(const AnnotatedSequence& seq) {
  const Index length = seq.length();
  Index previous_end = 0;
  for (std::size_t i = 0; i < seq.cycles.size(); ++i) {
    const Cycle& c = seq.cycles[i];
    if (c.start < 0 || c.start >= c.end || c.end > length) {
      fail(ErrorCode::invalid_argument,
           "sequence '" + seq.id + "': cycle " + std::to_string(i) + " [" +
               std::to_string(c.start) + "," + std::to_string(c.end) +
               ") outside [0," + std::to_string(length) + ")");
    }
    if (c.start < previous_end) {
      fail(ErrorCode::invalid_argument,
           "sequence '" + seq.id + "': cycles overlap or are unsorted at " +
               std::to_string(i));
    }
    previous_end = c.end;
  }
}

Index ViewPlan::downsampled_length() const {
  if (raw_length == 0) return 0;
  return (raw_length + downsample_rate - 1) / downsample_rate;
}

namespace {

void pad_to(std::vector<Index>& indices, Mask& mask, std::size_t length) {
  const Index fill = indices.empty() ? 0 : indices.back();
  while (indices.size() < length) {
    indices.push_back(fill);
    mask.push_back(false);
  }
}

}  // namespace

ViewPlan decompose(Index raw_length, const ViewConfig& cfg) {
  if (cfg.downsample_rate < 1 || cfg.context_length < 1 || cfg.fine_length < 1) {
    fail(ErrorCode::invalid_argument,
         "view config requires R >= 1, N_S >= 1, N_F >= 1");
  }
  if (raw_length <= 0) fail(ErrorCode::invalid_argument, "empty sequence");

  ViewPlan plan;
  plan.downsample_rate = cfg.downsample_rate;
  plan.raw_length = raw_length;
  const Index rate = cfg.downsample_rate;
  const Index down = plan.downsampled_length();

  const auto context_length = static_cast<Index>(cfg.context_length);
  if (down <= context_length) {
    for (Index k = 0; k < down; ++k) {
      plan.contextual_indices.push_back(k * rate);
      plan.context_mask.push_back(true);
    }
    pad_to(plan.contextual_indices, plan.context_mask, cfg.context_length);
  } else {
    for (Index k = 0; k < context_length; ++k) {
      plan.contextual_indices.push_back((k * down / context_length) * rate);
      plan.context_mask.push_back(true);
    }
  }

  const auto fine_length = static_cast<Index>(cfg.fine_length);
  for (Index begin = 0; begin < down; begin += fine_length) {
    std::vector<Index> view;
    Mask mask;
    for (Index k = begin; k < std::min(begin + fine_length, down); ++k) {
      view.push_back(k * rate);
      mask.push_back(true);
    }
    pad_to(view, mask, cfg.fine_length);
    plan.fine_views.push_back(std::move(view));
    plan.fine_masks.push_back(std::move(mask));
  }
  return plan;
}

ViewPlan decompose(const AnnotatedSequence& seq, const ViewConfig& cfg) {
  return decompose(seq.length(), cfg);
}

std::vector<double> raw_frame_density(const AnnotatedSequence& seq) {
  std::vector<double> mass(static_cast<std::size_t>(seq.length()), 0.0);
  std::vector<double> weights;
  for (const Cycle& c : seq.cycles) {
    const double centre = 0.5 * static_cast<double>(c.start + c.end);
    const double sigma = static_cast<double>(c.end - c.start) / 6.0;
    weights.clear();
    double total = 0.0;
    for (Index f = c.start; f < c.end; ++f) {
      const double z = (static_cast<double>(f) + 0.5 - centre) / sigma;
      weights.push_back(std::exp(-0.5 * z * z));
      total += weights.back();
    }
    for (Index f = c.start; f < c.end; ++f) {
      mass[static_cast<std::size_t>(f)] +=
          weights[static_cast<std::size_t>(f - c.start)] / total;
    }
  }
  return mass;
}

DensityMap build_gt_density(const AnnotatedSequence& seq,
                            std::span<const Index> target_indices,
                            const Mask& mask, Index grid_spacing) {
  if (target_indices.empty()) fail(ErrorCode::invalid_argument, "empty view");
  if (grid_spacing < 0) fail(ErrorCode::invalid_argument, "grid spacing must be >= 0");
  if (mask.size() != target_indices.size()) {
    fail(ErrorCode::invalid_argument,
         "mask length " + std::to_string(mask.size()) +
             " does not match index count " +
             std::to_string(target_indices.size()));
  }
  const Index length = seq.length();

  // Distinct grid points (first occurrence wins; padding repeats are skipped).
  std::vector<Index> grid;
  std::vector<std::size_t> slot;
  for (std::size_t i = 0; i < target_indices.size(); ++i) {
    const Index idx = target_indices[i];
    if (idx < 0 || idx >= length) {
      if (mask[i]) {
        fail(ErrorCode::invalid_argument,
             "target index " + std::to_string(idx) + " outside sequence");
      }
      continue;
    }
    if (!grid.empty() && idx <= grid.back()) {
      if (idx < grid.back()) {
        fail(ErrorCode::invalid_argument, "target indices must be sorted");
      }
      continue;
    }
    grid.push_back(idx);
    slot.push_back(i);
  }

  DensityMap map;
  map.values.assign(target_indices.size(), 0.0);
  map.mask = mask;
  if (grid.empty()) return map;

  const std::vector<double> mass = raw_frame_density(seq);
  const std::size_t n = grid.size();

  // Outer catchment limits, in raw frames, inclusive.
  Index lower = 0;
  Index upper = length - 1;
  if (n >= 2 || grid_spacing > 0) {
    const Index left_spacing = n >= 2 ? grid[1] - grid[0] : grid_spacing;
    if (grid[0] - left_spacing >= 0) {
      // f is kept iff grid[0] - f < spacing / 2
      lower = grid[0] - (left_spacing - 1) / 2;
    }
    const Index right_spacing = n >= 2 ? grid[n - 1] - grid[n - 2] : grid_spacing;
    if (grid[n - 1] + right_spacing <= length - 1) {
      // f is kept iff f - grid[n-1] <= spacing / 2
      upper = grid[n - 1] + right_spacing / 2;
    }
  }

  std::size_t j = 0;
  for (Index f = std::max<Index>(lower, 0); f <= std::min(upper, length - 1); ++f) {
    // Advance while the next grid point is strictly closer.
    while (j + 1 < n && (grid[j + 1] - f) < (f - grid[j])) ++j;
    const std::size_t target = slot[j];
    if (mask[target]) map.values[target] += mass[static_cast<std::size_t>(f)];
  }
  return map;
}

double count_from_density(const DensityMap& map) {
  double total = 0.0;
  for (std::size_t i = 0; i < map.values.size(); ++i) {
    if (map.mask[i]) total += map.values[i];
  }
  return total;
}

FeatureMatrix gather_rows(const FeatureMatrix& features,
                          std::span<const Index> indices, const Mask& mask) {
  FeatureMatrix out = FeatureMatrix::Zero(static_cast<Index>(indices.size()),
                                          features.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (mask[i]) out.row(static_cast<Index>(i)) = features.row(indices[i]);
  }
  return out;
}

std::size_t count_valid(const Mask& mask) {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true));
}

}  // namespace sfn
