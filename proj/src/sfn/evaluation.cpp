#include "sfn/evaluation.hpp"

#include <cmath>
#include <cstdio>
#include <iostream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "sfn/error.hpp"

namespace sfn {

namespace {

void check_inputs(std::span<const double> preds, std::span<const double> gts) {
  if (preds.empty()) fail(ErrorCode::invalid_argument, "empty input");
  if (preds.size() != gts.size()) {
    fail(ErrorCode::invalid_argument, "predictions (" + std::to_string(preds.size()) +
                                          ") and ground truths (" + std::to_string(gts.size()) +
                                          ") differ in length");
  }
  for (double g : gts) {
    if (!(g >= 0.0)) fail(ErrorCode::invalid_argument, "ground-truth counts must be >= 0");
  }
}

}  // namespace

double obo(std::span<const double> preds, std::span<const double> gts) {
  check_inputs(preds, gts);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (std::abs(preds[i] - gts[i]) <= 1.0) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(preds.size());
}

double mae(std::span<const double> preds, std::span<const double> gts, std::vector<std::size_t>* excluded) {
  check_inputs(preds, gts);
  double total = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (gts[i] <= 0.0) {
      if (excluded) excluded->push_back(i);
      continue;
    }
    total += std::abs(preds[i] - gts[i]) / gts[i];
    ++n;
  }
  return n == 0 ? std::numeric_limits<double>::quiet_NaN() : total / static_cast<double>(n);
}

std::vector<double> default_bucket_edges() { return {5.0, 10.0, 20.0}; }

namespace {

std::string edge_text(double e) {
  std::ostringstream os;
  os << e;
  return os.str();
}

}  // namespace

MetricsReport make_report(std::vector<VideoResult> results, const std::vector<double>& bucket_edges) {
  MetricsReport report;
  report.per_video = std::move(results);
  std::vector<double> preds, gts;
  for (const auto& r : report.per_video) {
    preds.push_back(r.pred);
    gts.push_back(r.gt);
  }
  report.obo = obo(preds, gts);
  report.mae = mae(preds, gts, &report.excluded_from_mae);

  std::vector<std::string> labels{"0"};
  for (std::size_t b = 0; b < bucket_edges.size(); ++b) {
    const std::string lo = b == 0 ? "[1," : "(" + edge_text(bucket_edges[b - 1]) + ",";
    labels.push_back(lo + edge_text(bucket_edges[b]) + "]");
  }
  labels.push_back("(" + (bucket_edges.empty() ? std::string("0") : edge_text(bucket_edges.back())) + ",inf)");

  std::vector<std::vector<std::size_t>> members(labels.size());
  for (std::size_t i = 0; i < gts.size(); ++i) {
    std::size_t bucket = 0;
    if (gts[i] > 0.0) {
      bucket = bucket_edges.size() + 1;
      for (std::size_t b = 0; b < bucket_edges.size(); ++b) {
        if (gts[i] <= bucket_edges[b]) {
          bucket = b + 1;
          break;
        }
      }
    }
    members[bucket].push_back(i);
  }
  for (std::size_t b = 0; b < labels.size(); ++b) {
    BucketStats stats{labels[b], std::numeric_limits<double>::quiet_NaN(), 0.0, members[b].size()};
    if (!members[b].empty()) {
      std::vector<double> p, g;
      for (std::size_t i : members[b]) {
        p.push_back(preds[i]);
        g.push_back(gts[i]);
      }
      stats.obo = obo(p, g);
      stats.mae = mae(p, g);
    }
    report.buckets.push_back(std::move(stats));
  }
  return report;
}

MetricsReport evaluate(const SkimFocusNet<float>& net, const CountingSet& set, CountMode mode,
                       std::uint64_t seed, const std::vector<double>& bucket_edges) {
  std::vector<VideoResult> results;
  CountOptions options;
  options.mode = mode;
  options.seed = seed;
  for (std::size_t i = 0; i < set.size(); ++i) {
    const AnnotatedSequence* exemplar = set.exemplar(i);
    if (mode == CountMode::specified && exemplar == nullptr) {
      fail(ErrorCode::invalid_argument, "item '" + set.items[i].id + "' has no exemplar for specified counting");
    }
    const VideoCount count = count_video(net, set.items[i], exemplar, options);
    results.push_back({set.items[i].id, set.items[i].class_label, static_cast<double>(set.items[i].count()),
                       count.count});
  }
  MetricsReport report = make_report(std::move(results), bucket_edges);
  for (std::size_t i : report.excluded_from_mae) {
    std::cerr << "warning: '" << report.per_video[i].id << "' has zero ground-truth count; excluded from MAE\n";
  }
  return report;
}

std::string format_real(double value) {
  if (std::isnan(value)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", value);
  return buf;
}

namespace {

nlohmann::ordered_json real_or_null(double v) {
  return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr);
}

}  // namespace

std::string report_json(const MetricsReport& report) {
  nlohmann::ordered_json j;
  j["n"] = report.per_video.size();
  j["mae"] = real_or_null(report.mae);
  j["obo"] = report.obo;
  j["excluded_from_mae"] = report.excluded_from_mae.size();
  auto buckets = nlohmann::ordered_json::array();
  for (const auto& b : report.buckets) {
    buckets.push_back({{"range", b.label}, {"n", b.n}, {"mae", real_or_null(b.mae)}, {"obo", b.obo}});
  }
  j["buckets"] = std::move(buckets);
  auto videos = nlohmann::ordered_json::array();
  for (const auto& v : report.per_video) {
    videos.push_back({{"id", v.id}, {"class", v.class_label}, {"gt", v.gt}, {"pred", v.pred}});
  }
  j["per_video"] = std::move(videos);
  return j.dump(2) + "\n";
}

std::string report_csv(const MetricsReport& report) {
  std::ostringstream os;
  os << "id,class,gt,pred,abs_err,rel_err,obo_hit\n";
  for (const auto& v : report.per_video) {
    const double abs_err = std::abs(v.pred - v.gt);
    const double rel_err = v.gt > 0.0 ? abs_err / v.gt : std::numeric_limits<double>::quiet_NaN();
    os << v.id << ',' << v.class_label << ',' << format_real(v.gt) << ',' << format_real(v.pred) << ','
       << format_real(abs_err) << ',' << format_real(rel_err) << ',' << (abs_err <= 1.0 ? 1 : 0) << '\n';
  }
  return os.str();
}

}  // namespace sfn
