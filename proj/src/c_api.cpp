#include "skimfocus/skimfocus.h"

#include <cmath>
#include <cstring>
#include <exception>
#include <filesystem>
#include <iostream>
#include <new>
#include <string>

#include "sfn/config.hpp"
#include "sfn/error.hpp"
#include "sfn/evaluation.hpp"
#include "sfn/pipeline.hpp"

struct sfn_config {
  sfn::RunConfig value;
};

struct sfn_model {
  sfn::Model value;
};

namespace {

thread_local std::string g_last_error;

sfn_status record(sfn_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

template <typename F>
sfn_status guarded(F&& body) {
  try {
    body();
    g_last_error.clear();
    return SFN_OK;
  } catch (const sfn::Error& e) {
    return record(static_cast<sfn_status>(e.code()), e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return record(SFN_ERR_IO, e.what());
  } catch (const std::bad_alloc&) {
    return record(SFN_ERR_RUNTIME, "out of memory");
  } catch (const std::exception& e) {
    return record(SFN_ERR_RUNTIME, e.what());
  }
}

void require(bool ok, const char* what) {
  if (!ok) sfn::fail(sfn::ErrorCode::invalid_argument, what);
}

void copy_out(const std::string& text, char* buf, std::size_t cap, std::size_t* needed) {
  if (needed) *needed = text.size() + 1;
  if (buf == nullptr || cap < text.size() + 1) {
    sfn::fail(sfn::ErrorCode::invalid_argument,
              "output buffer too small (" + std::to_string(text.size() + 1) + " bytes needed)");
  }
  std::memcpy(buf, text.c_str(), text.size() + 1);
}

sfn::FeatureMatrix to_features(const float* data, std::size_t frames, std::size_t width) {
  sfn::FeatureMatrix m(static_cast<Eigen::Index>(frames), static_cast<Eigen::Index>(width));
  std::memcpy(m.data(), data, frames * width * sizeof(float));
  return m;
}

}  // namespace

extern "C" {

const char* sfn_last_error(void) { return g_last_error.c_str(); }

const char* sfn_version(void) { return "0.1.0"; }

sfn_status sfn_config_create(sfn_config** out) {
  return guarded([&] {
    require(out != nullptr, "null output handle");
    *out = new sfn_config{};
  });
}

void sfn_config_destroy(sfn_config* cfg) { delete cfg; }

sfn_status sfn_config_apply_preset(sfn_config* cfg, const char* name) {
  return guarded([&] {
    require(cfg && name, "null argument");
    sfn::apply_preset(cfg->value, name);
  });
}

sfn_status sfn_config_load_file(sfn_config* cfg, const char* path) {
  return guarded([&] {
    require(cfg && path, "null argument");
    sfn::load_config_file(cfg->value, path);
  });
}

sfn_status sfn_config_load_checkpoint_snapshot(sfn_config* cfg, const char* checkpoint, int* loaded) {
  return guarded([&] {
    require(cfg && checkpoint, "null argument");
    const auto snapshot = sfn::checkpoint_snapshot(checkpoint);
    const bool found = std::filesystem::exists(snapshot);
    if (found) sfn::load_config_file(cfg->value, snapshot);
    if (loaded) *loaded = found ? 1 : 0;
  });
}

sfn_status sfn_config_set(sfn_config* cfg, const char* key, const char* value) {
  return guarded([&] {
    require(cfg && key && value, "null argument");
    sfn::set_key(cfg->value, key, value);
  });
}

sfn_status sfn_config_apply_override(sfn_config* cfg, const char* assignment) {
  return guarded([&] {
    require(cfg && assignment, "null argument");
    sfn::apply_override(cfg->value, assignment);
  });
}

sfn_status sfn_config_get(const sfn_config* cfg, const char* key, char* buf, size_t cap, size_t* needed) {
  return guarded([&] {
    require(cfg && key, "null argument");
    copy_out(sfn::get_key(cfg->value, key), buf, cap, needed);
  });
}

sfn_status sfn_config_snapshot(const sfn_config* cfg, char* buf, size_t cap, size_t* needed) {
  return guarded([&] {
    require(cfg != nullptr, "null argument");
    copy_out(sfn::snapshot(cfg->value), buf, cap, needed);
  });
}

sfn_status sfn_config_write_snapshot(const sfn_config* cfg, const char* out_dir) {
  return guarded([&] {
    require(cfg && out_dir, "null argument");
    sfn::write_snapshot(cfg->value, out_dir);
  });
}

sfn_status sfn_config_describe(char* buf, size_t cap, size_t* needed) {
  return guarded([&] {
    std::string text;
    for (const auto& k : sfn::config_keys()) text += k.name + "\t" + k.default_value + "\t" + k.description + "\n";
    copy_out(text, buf, cap, needed);
  });
}

sfn_status sfn_synth(const sfn_config* cfg, const char* out_dir) {
  return guarded([&] {
    require(cfg && out_dir, "null argument");
    sfn::run_synth(cfg->value, out_dir);
  });
}

sfn_status sfn_compose_multirep(const sfn_config* cfg, const char* out_dir) {
  return guarded([&] {
    require(cfg && out_dir, "null argument");
    sfn::run_compose_multirep(cfg->value, out_dir);
  });
}

sfn_status sfn_manifest_path(const char* data, const char* split, char* buf, size_t cap, size_t* needed) {
  return guarded([&] {
    require(data && split, "null argument");
    copy_out(sfn::manifest_path(data, split).string(), buf, cap, needed);
  });
}

sfn_status sfn_train(const sfn_config* cfg, const char* data_dir, const char* out_dir, int verbose) {
  return guarded([&] {
    require(cfg && data_dir && out_dir, "null argument");
    sfn::run_train(cfg->value, data_dir, out_dir, verbose ? &std::cerr : nullptr);
  });
}

sfn_status sfn_model_create(const sfn_config* cfg, sfn_model** out) {
  return guarded([&] {
    require(cfg && out, "null argument");
    *out = new sfn_model{sfn::init_model(cfg->value)};
  });
}

sfn_status sfn_model_load(const sfn_config* cfg, const char* checkpoint, sfn_model** out) {
  return guarded([&] {
    require(cfg && checkpoint && out, "null argument");
    *out = new sfn_model{sfn::load_model(cfg->value, checkpoint)};
  });
}

sfn_status sfn_model_save(const sfn_model* model, const char* path) {
  return guarded([&] {
    require(model && path, "null argument");
    sfn::save_model(model->value, path);
  });
}

void sfn_model_destroy(sfn_model* model) { delete model; }

sfn_status sfn_model_count(const sfn_model* model, const float* features, size_t frames, size_t width,
                           const float* exemplar, size_t exemplar_frames, double* count) {
  return guarded([&] {
    require(model && features && count, "null argument");
    require(frames > 0 && width > 0, "empty sequence");
    sfn::AnnotatedSequence seq;
    seq.id = "input";
    seq.features = to_features(features, frames, width);
    sfn::AnnotatedSequence ex;
    const sfn::AnnotatedSequence* ex_ptr = nullptr;
    if (exemplar) {
      require(exemplar_frames > 0, "empty exemplar");
      ex.id = "exemplar";
      ex.features = to_features(exemplar, exemplar_frames, width);
      ex_ptr = &ex;
    }
    sfn::CountOptions options;
    options.mode = model->value.config.train.mode;
    options.seed = model->value.config.train.seed;
    *count = sfn::count_video(model->value.net(), seq, ex_ptr, options).count;
  });
}

sfn_status sfn_evaluate(const sfn_model* model, const char* manifest, const char* out_dir, double* mae,
                        double* obo) {
  return guarded([&] {
    require(model && manifest && out_dir, "null argument");
    const sfn::MetricsReport report = sfn::run_eval(model->value, manifest, out_dir);
    if (mae) *mae = report.mae;
    if (obo) *obo = report.obo;
  });
}

sfn_status sfn_predict(const sfn_model* model, const char* manifest, const char* out_dir, int plot) {
  return guarded([&] {
    require(model && manifest && out_dir, "null argument");
    sfn::run_predict(model->value, manifest, out_dir, plot != 0);
  });
}

sfn_status sfn_plot(const char* predictions, const char* out_dir, size_t* rendered) {
  return guarded([&] {
    require(predictions && out_dir, "null argument");
    const std::size_t n = sfn::run_plot(predictions, out_dir);
    if (rendered) *rendered = n;
  });
}

sfn_status sfn_gradcheck(double tolerance, uint64_t seed, const char* out_dir, int* passed, double* worst_rel_error) {
  return guarded([&] {
    require(out_dir != nullptr, "null argument");
    const auto reports = sfn::run_gradcheck(tolerance, seed, out_dir);
    bool ok = true;
    double worst = 0.0;
    for (const auto& r : reports) {
      ok = ok && r.passed;
      worst = std::max(worst, r.failure.empty() ? r.max_rel_error() : INFINITY);
    }
    if (passed) *passed = ok ? 1 : 0;
    if (worst_rel_error) *worst_rel_error = worst;
  });
}

sfn_status sfn_ablate(const sfn_config* cfg, const char* data_dir, const char* grid, const char* out_dir,
                      int verbose) {
  return guarded([&] {
    require(cfg && data_dir && grid && out_dir, "null argument");
    sfn::run_ablate(cfg->value, data_dir, grid, out_dir, verbose ? &std::cerr : nullptr);
  });
}

sfn_status sfn_metrics(const double* preds, const double* gts, size_t n, double* mae, double* obo) {
  return guarded([&] {
    require(n == 0 || (preds && gts), "null argument");
    const std::span<const double> p(preds, n), g(gts, n);
    if (obo) *obo = sfn::obo(p, g);
    if (mae) *mae = sfn::mae(p, g);
  });
}

uint64_t sfn_skim_forward_calls(void) { return sfn::skim_forward_calls(); }

}  // extern "C"
