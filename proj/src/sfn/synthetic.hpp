#pragma once

// Synthetic repetitive feature sequences and multi-action composites.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "sfn/sequence.hpp"

namespace sfn {

struct SynthConfig {
  int num_classes = 8;
  int d_in = 16;
  int cycle_len_min = 16;  // raw frames
  int cycle_len_max = 40;
  int cycles_min = 2;  // per generated segment
  int cycles_max = 12;
  double noise_std = 0.05;
  int idle_max = 16;          // longest idle stretch, raw frames
  double idle_gap_prob = 0.15;  // chance of an idle gap between two cycles
  std::uint64_t seed = 1;
};

void validate(const SynthConfig& cfg);

std::string class_name(int class_id);

/// Fixed per-class waveform: a truncated Fourier series in feature space,
/// scaled to unit RMS norm over one period.
class ClassTemplate {
 public:
  ClassTemplate(int class_id, const SynthConfig& cfg);

  /// Feature vector at phase in [0, 1).
  Eigen::VectorXd at(double phase) const;
  /// The template rendered over `length` frames, frame j at phase j / length.
  Eigen::MatrixXd render(Index length) const;

 private:
  static constexpr int kHarmonics = 3;
  Eigen::MatrixXd cos_terms_;  // (kHarmonics + 1) x d_in, row 0 is the offset
  Eigen::MatrixXd sin_terms_;
};

AnnotatedSequence generate_sequence(int class_id, int n_cycles,
                                    const SynthConfig& cfg, std::uint64_t seed);

struct Segment {
  std::string class_label;
  Index start = 0;
  Index end = 0;
};

struct MultiRepUnit {
  AnnotatedSequence composite;
  AnnotatedSequence exemplar;
  std::string target_class;
  std::vector<Segment> segment_layout;

  double target_fraction() const;
  std::size_t distinct_classes() const;
};

struct ComposeConfig {
  int distractor_classes_min = 3;
  int distractor_classes_max = 5;
  double target_fraction_min = 0.45;
  double target_fraction_max = 0.55;
};

/// Splits `target` at cycle boundaries and interleaves clips from at least
/// three other classes at random insertion points. Only the target's cycles
/// are annotated in the composite.
MultiRepUnit compose_multirep(const AnnotatedSequence& target,
                              const std::vector<AnnotatedSequence>& distractor_pool,
                              const std::vector<AnnotatedSequence>& exemplar_pool,
                              const ComposeConfig& cfg, std::uint64_t seed);

struct SplitSpec {
  int train = 200;
  int val = 50;
  int test = 50;
};

struct MultiRepConfig {
  ComposeConfig compose;
  int exemplars_per_class = 3;
  int pool_per_class = 4;
};

/// Writes train/val/test manifests and feature files of single-action
/// sequences under `dir`. Classes are assigned round-robin.
void build_dataset(const std::filesystem::path& dir, const SplitSpec& split,
                   const SynthConfig& cfg);

/// Same layout, plus `exemplars.jsonl`; every item carries an exemplar id.
void build_multirep_dataset(const std::filesystem::path& dir, const SplitSpec& split,
                            const SynthConfig& cfg, const MultiRepConfig& multi);

/// Checks that every exemplar id in `manifest` resolves, through the
/// sibling `exemplars.jsonl`, to a sequence of the same class.
void check_exemplars(const std::filesystem::path& manifest);

}  // namespace sfn
