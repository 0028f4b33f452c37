#pragma once

// Counting metrics, per-count-range breakdown and report writers.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sfn/io.hpp"
#include "sfn/model.hpp"

namespace sfn {

/// Fraction of items with |pred - gt| <= 1, on raw (unrounded) predictions.
double obo(std::span<const double> preds, std::span<const double> gts);

/// Mean of |pred - gt| / gt over items with gt > 0. Zero-count items are
/// skipped and their positions appended to `excluded` when given. Returns NaN
/// when every item is excluded.
double mae(std::span<const double> preds, std::span<const double> gts,
           std::vector<std::size_t>* excluded = nullptr);

struct VideoResult {
  std::string id;
  std::string class_label;
  double gt = 0.0;
  double pred = 0.0;
};

struct BucketStats {
  std::string label;
  double mae = 0.0;  // NaN when the bucket has no positive ground truth
  double obo = 0.0;
  std::size_t n = 0;
};

struct MetricsReport {
  std::vector<VideoResult> per_video;
  double mae = 0.0;
  double obo = 0.0;
  std::vector<BucketStats> buckets;
  std::vector<std::size_t> excluded_from_mae;
};

/// Buckets are "0", "[1,e0]", "(e0,e1]", ..., "(e_last,inf)".
MetricsReport make_report(std::vector<VideoResult> results, const std::vector<double>& bucket_edges);

std::vector<double> default_bucket_edges();

MetricsReport evaluate(const SkimFocusNet<float>& net, const CountingSet& set, CountMode mode,
                       std::uint64_t seed, const std::vector<double>& bucket_edges);

std::string report_json(const MetricsReport& report);
/// Columns: id, class, gt, pred, abs_err, rel_err, obo_hit.
std::string report_csv(const MetricsReport& report);

/// Fixed-format real used by every CSV writer (byte-stable across runs).
std::string format_real(double value);

}  // namespace sfn
