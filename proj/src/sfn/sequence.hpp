#pragma once

// Annotated frame-feature sequences, view decomposition and ground-truth
// density construction.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace sfn {

using Index = std::int64_t;
using FeatureMatrix =
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// A boolean frame mask. `true` marks a real frame, `false` a padded one.
using Mask = std::vector<bool>;

/// Half-open raw-frame interval [start, end) of one repetition.
struct Cycle {
  Index start = 0;
  Index end = 0;

  friend bool operator==(const Cycle&, const Cycle&) = default;
};

struct AnnotatedSequence {
  std::string id;
  std::string class_label;
  FeatureMatrix features;  // T_raw x d_in
  std::vector<Cycle> cycles;
  std::string source;

  Index length() const { return features.rows(); }
  Index feature_width() const { return features.cols(); }
  std::size_t count() const { return cycles.size(); }
};

/// Throws `Error(invalid_argument)` if cycles are out of range, unsorted,
/// empty or overlapping.
void validate(const AnnotatedSequence& seq);

struct ViewConfig {
  int downsample_rate = 4;  // R
  int context_length = 256;  // N_S
  int fine_length = 64;      // N_F
};

/// Decomposition of a downsampled sequence into one contextual view and M
/// fine-grained views. Padded slots repeat the last real index and are
/// flagged `false` in the corresponding mask.
struct ViewPlan {
  int downsample_rate = 1;
  Index raw_length = 0;
  std::vector<Index> contextual_indices;
  Mask context_mask;
  std::vector<std::vector<Index>> fine_views;
  std::vector<Mask> fine_masks;

  std::size_t num_views() const { return fine_views.size(); }
  /// Number of downsampled frames L.
  Index downsampled_length() const;
};

ViewPlan decompose(Index raw_length, const ViewConfig& cfg);
ViewPlan decompose(const AnnotatedSequence& seq, const ViewConfig& cfg);

struct DensityMap {
  std::vector<double> values;
  Mask mask;

  std::size_t size() const { return values.size(); }
};

/// Per-raw-frame ground-truth mass: each cycle contributes a truncated
/// Gaussian of total mass 1 centred on its midpoint with sigma = len / 6.
std::vector<double> raw_frame_density(const AnnotatedSequence& seq);

/// Re-bins the raw-frame mass onto `target_indices`. Every raw frame goes to
/// its nearest target index (ties to the lower one); frames beyond the outer
/// half-spacing of the first/last index are dropped unless no further grid
/// point could exist inside the sequence. Masked slots receive 0.
/// `grid_spacing` is the outer spacing used when only one distinct index is
/// given (a one-frame view of a strided grid); 0 means unbounded.
DensityMap build_gt_density(const AnnotatedSequence& seq,
                            std::span<const Index> target_indices,
                            const Mask& mask, Index grid_spacing = 0);

/// Sum of values over non-masked positions. Not clamped.
double count_from_density(const DensityMap& map);

/// Gathers rows of `features` at `indices`; masked rows are zero.
FeatureMatrix gather_rows(const FeatureMatrix& features,
                          std::span<const Index> indices, const Mask& mask);

std::size_t count_valid(const Mask& mask);

}  // namespace sfn
