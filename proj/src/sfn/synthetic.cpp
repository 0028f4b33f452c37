#include "sfn/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>
#include <set>

#include "sfn/error.hpp"
#include "sfn/io.hpp"
#include "sfn/random.hpp"

namespace sfn {

namespace fs = std::filesystem;

void validate(const SynthConfig& cfg) {
  if (cfg.num_classes < 1 || cfg.d_in < 1) {
    fail(ErrorCode::invalid_argument, "synth: num_classes and d_in must be positive");
  }
  if (cfg.cycle_len_min < 1 || cfg.cycle_len_min > cfg.cycle_len_max) {
    fail(ErrorCode::invalid_argument, "synth: cycle length range is empty");
  }
  if (cfg.cycles_min < 0 || cfg.cycles_min > cfg.cycles_max) {
    fail(ErrorCode::invalid_argument, "synth: cycle count range is empty");
  }
  if (!(cfg.noise_std >= 0.0)) fail(ErrorCode::invalid_argument, "synth: noise_std < 0");
  if (cfg.idle_max < 0 || cfg.idle_gap_prob < 0.0 || cfg.idle_gap_prob > 1.0) {
    fail(ErrorCode::invalid_argument, "synth: invalid idle settings");
  }
}

std::string class_name(int class_id) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "action_%02d", class_id);
  return buf;
}

ClassTemplate::ClassTemplate(int class_id, const SynthConfig& cfg)
    : cos_terms_(kHarmonics + 1, cfg.d_in), sin_terms_(kHarmonics + 1, cfg.d_in) {
  Rng rng(derive_seed(cfg.seed, 0x7e3f1a11ULL, static_cast<std::uint64_t>(class_id)));
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int k = 0; k <= kHarmonics; ++k) {
    const double scale = k == 0 ? 1.0 : 1.0 / k;
    for (int c = 0; c < cfg.d_in; ++c) {
      cos_terms_(k, c) = scale * normal(rng);
      sin_terms_(k, c) = k == 0 ? 0.0 : scale * normal(rng);
    }
  }
  constexpr int kProbe = 64;
  double energy = 0.0;
  for (int j = 0; j < kProbe; ++j) energy += at(static_cast<double>(j) / kProbe).squaredNorm();
  const double rms = std::sqrt(energy / kProbe);
  cos_terms_ /= rms;
  sin_terms_ /= rms;
}

Eigen::VectorXd ClassTemplate::at(double phase) const {
  Eigen::VectorXd out = cos_terms_.row(0).transpose();
  for (int k = 1; k <= kHarmonics; ++k) {
    const double angle = 2.0 * std::numbers::pi * k * phase;
    out += std::cos(angle) * cos_terms_.row(k).transpose() +
           std::sin(angle) * sin_terms_.row(k).transpose();
  }
  return out;
}

Eigen::MatrixXd ClassTemplate::render(Index length) const {
  Eigen::MatrixXd out(length, cos_terms_.cols());
  for (Index j = 0; j < length; ++j) {
    out.row(j) = at(static_cast<double>(j) / static_cast<double>(length)).transpose();
  }
  return out;
}

AnnotatedSequence generate_sequence(int class_id, int n_cycles, const SynthConfig& cfg,
                                    std::uint64_t seed) {
  validate(cfg);
  if (n_cycles < 0) fail(ErrorCode::invalid_argument, "n_cycles must be >= 0");
  const ClassTemplate tmpl(class_id, cfg);
  Rng rng(derive_seed(seed, static_cast<std::uint64_t>(class_id) + 1));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform_int = [&rng](int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(rng);
  };

  std::vector<Eigen::VectorXd> rows;
  Eigen::VectorXd drift = Eigen::VectorXd::Zero(cfg.d_in);
  auto idle = [&](int frames) {
    for (int t = 0; t < frames; ++t) {
      for (int c = 0; c < cfg.d_in; ++c) drift(c) = 0.95 * drift(c) + 0.1 * normal(rng);
      rows.push_back(drift);
    }
  };

  AnnotatedSequence seq;
  seq.class_label = class_name(class_id);
  seq.source = "synthetic";

  const int base_length = uniform_int(cfg.cycle_len_min, cfg.cycle_len_max);
  idle(uniform_int(0, cfg.idle_max));
  for (int i = 0; i < n_cycles; ++i) {
    if (i > 0 && cfg.idle_max > 0 && unit(rng) < cfg.idle_gap_prob) {
      idle(uniform_int(1, std::max(1, cfg.idle_max / 2)));
    }
    const double jitter = 0.85 + 0.3 * unit(rng);
    const int length = std::clamp(static_cast<int>(std::lround(base_length * jitter)),
                                  cfg.cycle_len_min, cfg.cycle_len_max);
    const Index start = static_cast<Index>(rows.size());
    const Eigen::MatrixXd cycle = tmpl.render(length);
    for (Index j = 0; j < length; ++j) rows.push_back(cycle.row(j).transpose());
    seq.cycles.push_back({start, start + length});
  }
  idle(uniform_int(0, cfg.idle_max));
  if (n_cycles == 0) idle(2 * base_length);

  seq.features.resize(static_cast<Index>(rows.size()), cfg.d_in);
  for (std::size_t t = 0; t < rows.size(); ++t) {
    for (int c = 0; c < cfg.d_in; ++c) {
      const double noise = cfg.noise_std > 0.0 ? cfg.noise_std * normal(rng) : 0.0;
      seq.features(static_cast<Index>(t), c) = static_cast<float>(rows[t](c) + noise);
    }
  }
  return seq;
}

double MultiRepUnit::target_fraction() const {
  Index target = 0;
  for (const Segment& s : segment_layout) {
    if (s.class_label == target_class) target += s.end - s.start;
  }
  return static_cast<double>(target) / static_cast<double>(composite.length());
}

std::size_t MultiRepUnit::distinct_classes() const {
  std::set<std::string> classes;
  for (const Segment& s : segment_layout) {
    if (s.end > s.start) classes.insert(s.class_label);
  }
  return classes.size();
}

namespace {

// Contiguous window of `length` frames of one class, concatenating pool
// sequences when a single one is too short.
FeatureMatrix draw_clip(const std::vector<const AnnotatedSequence*>& sources, Index length,
                        Rng& rng) {
  FeatureMatrix clip(length, sources.front()->feature_width());
  Index filled = 0;
  while (filled < length) {
    const auto& src =
        *sources[std::uniform_int_distribution<std::size_t>(0, sources.size() - 1)(rng)];
    const Index take = std::min(length - filled, src.length());
    const Index offset =
        std::uniform_int_distribution<Index>(0, src.length() - take)(rng);
    clip.middleRows(filled, take) = src.features.middleRows(offset, take);
    filled += take;
  }
  return clip;
}

}  // namespace

MultiRepUnit compose_multirep(const AnnotatedSequence& target,
                              const std::vector<AnnotatedSequence>& distractor_pool,
                              const std::vector<AnnotatedSequence>& exemplar_pool,
                              const ComposeConfig& cfg, std::uint64_t seed) {
  validate(target);
  if (target.length() == 0) fail(ErrorCode::invalid_argument, "empty sequence");
  std::map<std::string, std::vector<const AnnotatedSequence*>> by_class;
  for (const auto& s : distractor_pool) {
    if (s.class_label != target.class_label && s.length() > 0) {
      if (s.feature_width() != target.feature_width()) {
        fail(ErrorCode::invalid_argument, "distractor feature width mismatch");
      }
      by_class[s.class_label].push_back(&s);
    }
  }
  if (static_cast<int>(by_class.size()) < std::max(3, cfg.distractor_classes_min)) {
    fail(ErrorCode::invalid_argument, "insufficient distractors");
  }
  std::vector<const AnnotatedSequence*> exemplars;
  for (const auto& s : exemplar_pool) {
    if (s.class_label == target.class_label) exemplars.push_back(&s);
  }
  if (exemplars.empty()) {
    fail(ErrorCode::invalid_argument, "no exemplar for class '" + target.class_label + "'");
  }

  Rng rng(derive_seed(seed, fnv1a(target.id)));
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  // Distractor classes and their order.
  std::vector<std::string> classes;
  for (const auto& [name, _] : by_class) classes.push_back(name);
  std::shuffle(classes.begin(), classes.end(), rng);
  const int max_classes = std::min<int>(cfg.distractor_classes_max, static_cast<int>(classes.size()));
  const int n_clips = std::uniform_int_distribution<int>(
      std::min(cfg.distractor_classes_min, max_classes), max_classes)(rng);
  classes.resize(static_cast<std::size_t>(n_clips));

  // Total distractor frames from the drawn target fraction, split with
  // each clip getting at least half an equal share.
  const double fraction = cfg.target_fraction_min +
                          (cfg.target_fraction_max - cfg.target_fraction_min) * unit(rng);
  const Index target_frames = target.length();
  const Index distractor_frames = std::max<Index>(
      n_clips, std::llround(static_cast<double>(target_frames) * (1.0 - fraction) / fraction));
  std::vector<double> shares(static_cast<std::size_t>(n_clips));
  double share_total = 0.0;
  for (double& s : shares) share_total += (s = 0.5 + unit(rng));
  std::vector<Index> clip_lengths(static_cast<std::size_t>(n_clips));
  Index assigned = 0;
  for (int i = 0; i < n_clips; ++i) {
    const Index len = i + 1 == n_clips
                          ? distractor_frames - assigned
                          : std::max<Index>(1, std::llround(static_cast<double>(distractor_frames) *
                                                             shares[i] / share_total));
    clip_lengths[static_cast<std::size_t>(i)] = len;
    assigned += len;
  }

  // Cut points: positions not strictly inside any cycle.
  std::vector<Index> candidates{0, target_frames};
  for (const Cycle& c : target.cycles) {
    candidates.push_back(c.start);
    candidates.push_back(c.end);
  }
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  std::vector<Index> cuts;
  for (int i = 0; i < n_clips; ++i) {
    cuts.push_back(candidates[std::uniform_int_distribution<std::size_t>(
        0, candidates.size() - 1)(rng)]);
  }
  std::sort(cuts.begin(), cuts.end());

  MultiRepUnit unit_out;
  unit_out.target_class = target.class_label;
  AnnotatedSequence& composite = unit_out.composite;
  composite.class_label = target.class_label;
  composite.source = "multirep:" + target.id;
  composite.features.resize(target_frames + assigned, target.feature_width());

  Index write = 0;
  Index read = 0;
  std::size_t next_cycle = 0;
  auto copy_target = [&](Index until) {
    if (until <= read) return;
    composite.features.middleRows(write, until - read) =
        target.features.middleRows(read, until - read);
    unit_out.segment_layout.push_back({target.class_label, write, write + until - read});
    while (next_cycle < target.cycles.size() && target.cycles[next_cycle].end <= until) {
      const Cycle& c = target.cycles[next_cycle++];
      composite.cycles.push_back({c.start - read + write, c.end - read + write});
    }
    write += until - read;
    read = until;
  };
  for (int i = 0; i < n_clips; ++i) {
    copy_target(cuts[static_cast<std::size_t>(i)]);
    const Index len = clip_lengths[static_cast<std::size_t>(i)];
    composite.features.middleRows(write, len) = draw_clip(by_class[classes[i]], len, rng);
    unit_out.segment_layout.push_back({classes[i], write, write + len});
    write += len;
  }
  copy_target(target_frames);

  unit_out.exemplar =
      *exemplars[std::uniform_int_distribution<std::size_t>(0, exemplars.size() - 1)(rng)];
  return unit_out;
}

namespace {

constexpr const char* kSplitNames[] = {"train", "val", "test"};

std::string item_id(const char* split, int index) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%05d", split, index);
  return buf;
}

int draw_cycles(const SynthConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  return std::uniform_int_distribution<int>(cfg.cycles_min, cfg.cycles_max)(rng);
}

}  // namespace

void build_dataset(const fs::path& dir, const SplitSpec& split, const SynthConfig& cfg) {
  validate(cfg);
  const int counts[] = {split.train, split.val, split.test};
  for (int s = 0; s < 3; ++s) {
    std::vector<ManifestEntry> entries;
    for (int i = 0; i < counts[s]; ++i) {
      const int class_id = i % cfg.num_classes;
      const std::uint64_t seed = derive_seed(cfg.seed, 100 + s, static_cast<std::uint64_t>(i));
      AnnotatedSequence seq =
          generate_sequence(class_id, draw_cycles(cfg, seed ^ 0xc0ffeeULL), cfg, seed);
      seq.id = item_id(kSplitNames[s], i);
      entries.push_back(store_sequence(dir, seq));
    }
    write_manifest(dir / (std::string(kSplitNames[s]) + ".jsonl"), entries);
  }
}

void build_multirep_dataset(const fs::path& dir, const SplitSpec& split,
                            const SynthConfig& cfg, const MultiRepConfig& multi) {
  validate(cfg);
  if (cfg.num_classes < 4) {
    fail(ErrorCode::invalid_argument, "multirep needs at least 4 classes");
  }
  if (multi.exemplars_per_class < 1 || multi.pool_per_class < 1) {
    fail(ErrorCode::invalid_argument, "multirep pool sizes must be positive");
  }

  // Held-out exemplar candidates.
  std::vector<AnnotatedSequence> exemplars;
  std::vector<ManifestEntry> exemplar_entries;
  for (int c = 0; c < cfg.num_classes; ++c) {
    for (int k = 0; k < multi.exemplars_per_class; ++k) {
      const std::uint64_t seed = derive_seed(cfg.seed, 900, static_cast<std::uint64_t>(c * 1000 + k));
      AnnotatedSequence seq =
          generate_sequence(c, draw_cycles(cfg, seed ^ 0xc0ffeeULL), cfg, seed);
      seq.id = "exemplar_" + class_name(c) + "_" + std::to_string(k);
      exemplar_entries.push_back(store_sequence(dir, seq));
      exemplars.push_back(std::move(seq));
    }
  }
  write_manifest(dir / "exemplars.jsonl", exemplar_entries);

  const int counts[] = {split.train, split.val, split.test};
  for (int s = 0; s < 3; ++s) {
    std::vector<AnnotatedSequence> pool;
    for (int c = 0; c < cfg.num_classes; ++c) {
      for (int k = 0; k < multi.pool_per_class; ++k) {
        const std::uint64_t seed =
            derive_seed(cfg.seed, 800 + s, static_cast<std::uint64_t>(c * 1000 + k));
        pool.push_back(generate_sequence(c, cfg.cycles_max, cfg, seed));
      }
    }
    std::vector<ManifestEntry> entries;
    for (int i = 0; i < counts[s]; ++i) {
      const int class_id = i % cfg.num_classes;
      const std::uint64_t seed = derive_seed(cfg.seed, 200 + s, static_cast<std::uint64_t>(i));
      AnnotatedSequence target =
          generate_sequence(class_id, draw_cycles(cfg, seed ^ 0xc0ffeeULL), cfg, seed);
      target.id = item_id(kSplitNames[s], i);
      MultiRepUnit unit_out = compose_multirep(target, pool, exemplars, multi.compose, seed);
      unit_out.composite.id = target.id;
      entries.push_back(store_sequence(dir, unit_out.composite, unit_out.exemplar.id));
    }
    write_manifest(dir / (std::string(kSplitNames[s]) + ".jsonl"), entries);
  }
}

void check_exemplars(const fs::path& manifest) {
  const fs::path exemplar_path = manifest.parent_path() / "exemplars.jsonl";
  std::map<std::string, std::string> classes;
  bool have_exemplars = fs::exists(exemplar_path);
  if (have_exemplars) {
    for (const auto& e : read_manifest(exemplar_path)) classes[e.id] = e.class_label;
  }
  for (const auto& e : read_manifest(manifest)) {
    if (!e.exemplar_id) continue;
    const auto it = classes.find(*e.exemplar_id);
    if (it == classes.end()) {
      fail(ErrorCode::format, "exemplar '" + *e.exemplar_id + "' of '" + e.id + "' not found");
    }
    if (it->second != e.class_label) {
      fail(ErrorCode::format, "exemplar '" + *e.exemplar_id + "' has class '" + it->second +
                                  "' but '" + e.id + "' is '" + e.class_label + "'");
    }
  }
}

}  // namespace sfn
