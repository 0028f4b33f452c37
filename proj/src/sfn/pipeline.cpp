#include "sfn/pipeline.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "sfn/error.hpp"
#include "sfn/io.hpp"
#include "sfn/plot.hpp"
#include "sfn/random.hpp"
#include "sfn/synthetic.hpp"

namespace sfn {

using json = nlohmann::ordered_json;

void write_snapshot(const RunConfig& cfg, const fs::path& out_dir) {
  write_text(out_dir / kSnapshotName, snapshot(cfg));
}

fs::path checkpoint_file(const fs::path& path) {
  if (fs::is_directory(path)) return path / kCheckpointName;
  return path;
}

fs::path checkpoint_snapshot(const fs::path& path) {
  return checkpoint_file(path).parent_path() / kSnapshotName;
}

fs::path manifest_path(const fs::path& data, const std::string& split) {
  if (fs::is_directory(data)) return data / (split + ".jsonl");
  return data;
}

void run_synth(const RunConfig& cfg, const fs::path& out_dir) {
  validate(cfg);
  build_dataset(out_dir, cfg.split, cfg.synth);
  write_snapshot(cfg, out_dir);
}

void run_compose_multirep(const RunConfig& cfg, const fs::path& out_dir) {
  validate(cfg);
  build_multirep_dataset(out_dir, cfg.split, cfg.synth, cfg.multirep);
  for (const char* split : {"train", "val", "test"}) check_exemplars(out_dir / (std::string(split) + ".jsonl"));
  write_snapshot(cfg, out_dir);
}

TrainResult run_train(const RunConfig& cfg, const fs::path& data_dir, const fs::path& out_dir, std::ostream* log) {
  validate(cfg);
  const CountingSet train_set = load_counting_set(manifest_path(data_dir, "train"));
  const fs::path val_path = manifest_path(data_dir, "val");
  const bool have_val = fs::is_directory(data_dir) && fs::exists(val_path);
  CountingSet val_set;
  if (have_val) val_set = load_counting_set(val_path);

  write_snapshot(cfg, out_dir);
  TrainResult result = train(cfg.train, train_set, have_val ? &val_set : nullptr, [&](const EpochRecord& r) {
    if (log) {
      *log << "epoch " << r.epoch << "  L=" << format_real(r.loss.total) << "  L_S=" << format_real(r.loss.skim)
           << "  L_F=" << format_real(r.loss.focus) << "  val_MAE=" << format_real(r.val_mae)
           << "  val_OBO=" << format_real(r.val_obo) << '\n';
    }
  });
  save_checkpoint(out_dir / kCheckpointName, result.params, config_digest(cfg.train.model));
  write_text(out_dir / "trace.csv", trace_csv(result.trace));
  json summary;
  summary["best_epoch"] = result.best_epoch;
  summary["epochs"] = cfg.train.epochs;
  summary["train_items"] = train_set.size();
  summary["val_items"] = val_set.size();
  summary["parameters"] = result.params.parameter_count();
  const EpochRecord& best = result.trace[static_cast<std::size_t>(result.best_epoch - 1)];
  summary["best_val_mae"] = std::isfinite(best.val_mae) ? json(best.val_mae) : json(nullptr);
  summary["best_val_obo"] = std::isfinite(best.val_obo) ? json(best.val_obo) : json(nullptr);
  write_text(out_dir / "train_summary.json", summary.dump(2) + "\n");
  return result;
}

Model init_model(const RunConfig& cfg) {
  validate(cfg);
  const std::vector<ParamSpec> specs = model_param_specs(cfg.train.model);
  return Model{cfg, init_params<float>(specs, derive_seed(cfg.train.seed, fnv1a("init")))};
}

Model load_model(const RunConfig& cfg, const fs::path& checkpoint) {
  validate(cfg);
  const fs::path file = checkpoint_file(checkpoint);
  return Model{cfg, load_checkpoint(file, model_param_specs(cfg.train.model), config_digest(cfg.train.model))};
}

void save_model(const Model& model, const fs::path& path) {
  save_checkpoint(path, model.params, config_digest(model.config.train.model));
}

MetricsReport run_eval(const Model& model, const fs::path& manifest, const fs::path& out_dir) {
  const CountingSet set = load_counting_set(manifest);
  const MetricsReport report =
      evaluate(model.net(), set, model.config.train.mode, model.config.train.seed, model.config.bucket_edges);
  write_snapshot(model.config, out_dir);
  write_text(out_dir / "metrics.json", report_json(report));
  write_text(out_dir / "metrics.csv", report_csv(report));
  return report;
}

namespace {

json valid_values(const DensityMap& map) {
  json out = json::array();
  for (std::size_t i = 0; i < map.size(); ++i) {
    if (map.mask[i]) out.push_back(map.values[i]);
  }
  return out;
}

DensityPlot plot_from_record(const json& record) {
  DensityPlot plot;
  plot.title = record.at("id").get<std::string>() + " (" + record.at("class").get<std::string>() + ")";
  plot.gt_count = record.at("gt").get<double>();
  plot.pred_count = record.at("count").get<double>();
  for (const auto& view : record.at("views")) {
    plot.view_starts.push_back(plot.predicted.size());
    for (const auto& v : view.at("density")) plot.predicted.push_back(v.get<double>());
    for (const auto& v : view.at("gt_density")) plot.ground_truth.push_back(v.get<double>());
  }
  return plot;
}

std::string plot_name(const std::string& id) {
  std::string out;
  for (char c : id) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-') ? c : '_';
  return out + ".svg";
}

}  // namespace

void run_predict(const Model& model, const fs::path& manifest, const fs::path& out_dir, bool plot) {
  const CountingSet set = load_counting_set(manifest);
  const SkimFocusNet<float> net = model.net();
  const ModelConfig& mc = model.config.train.model;
  CountOptions options;
  options.mode = model.config.train.mode;
  options.seed = model.config.train.seed;
  std::ostringstream lines;
  write_snapshot(model.config, out_dir);
  for (std::size_t i = 0; i < set.size(); ++i) {
    const AnnotatedSequence& seq = set.items[i];
    const VideoCount c = count_video(net, seq, set.exemplar(i), options);
    json record;
    record["id"] = seq.id;
    record["class"] = seq.class_label;
    record["gt"] = seq.count();
    record["count"] = c.count;
    record["raw_count"] = c.raw_count;
    record["per_view_sums"] = c.per_view_sums;
    const ViewPlan plan = decompose(seq, mc.views);
    json views = json::array();
    for (std::size_t v = 0; v < c.view_maps.size(); ++v) {
      json indices = json::array();
      for (std::size_t k = 0; k < plan.fine_views[v].size(); ++k) {
        if (plan.fine_masks[v][k]) indices.push_back(plan.fine_views[v][k]);
      }
      const DensityMap gt = build_gt_density(seq, plan.fine_views[v], plan.fine_masks[v], plan.downsample_rate);
      views.push_back({{"indices", indices}, {"density", valid_values(c.view_maps[v])}, {"gt_density", valid_values(gt)}});
    }
    record["views"] = std::move(views);
    record["skim_confidence"] = c.skim_confidence.size() ? valid_values(c.skim_confidence) : json::array();
    record["instructive"] = c.instructive;
    lines << record.dump() << '\n';
    if (plot) write_text(out_dir / "plots" / plot_name(seq.id), render_density_svg(plot_from_record(record)));
  }
  write_text(out_dir / "predictions.jsonl", lines.str());
}

std::size_t run_plot(const fs::path& predictions, const fs::path& out_dir) {
  std::istringstream in(read_text(predictions));
  std::string line;
  std::size_t n = 0, line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json record = json::parse(line);
      write_text(out_dir / "plots" / plot_name(record.at("id").get<std::string>()),
                 render_density_svg(plot_from_record(record)));
    } catch (const json::exception& e) {
      fail(ErrorCode::format, predictions.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    ++n;
  }
  return n;
}

std::vector<GradCheckReport> run_gradcheck(double tolerance, std::uint64_t seed, const fs::path& out_dir) {
  if (!(tolerance > 0.0)) fail(ErrorCode::invalid_argument, "tolerance must be positive");
  std::vector<GradCheckReport> reports = gradcheck_suite(tolerance, seed);
  json out = json::array();
  for (const auto& r : reports) {
    json entries = json::array();
    for (const auto& e : r.entries) {
      entries.push_back({{"parameter", e.parameter}, {"max_rel_error", e.max_rel_error}, {"max_abs_error", e.max_abs_error}});
    }
    out.push_back({{"name", r.name},
                   {"passed", r.passed},
                   {"tolerance", r.tolerance},
                   {"max_rel_error", r.max_rel_error()},
                   {"failure", r.failure},
                   {"parameters", entries}});
  }
  write_text(out_dir / "gradcheck.json", out.dump(2) + "\n");
  return reports;
}

std::vector<std::vector<std::pair<std::string, std::string>>> parse_grid(const std::string& grid) {
  std::vector<std::pair<std::string, std::vector<std::string>>> axes;
  std::stringstream in(grid);
  std::string axis;
  while (std::getline(in, axis, ';')) {
    if (axis.find_first_not_of(" \t") == std::string::npos) continue;
    const auto eq = axis.find('=');
    if (eq == std::string::npos) fail(ErrorCode::invalid_argument, "grid axis '" + axis + "' is not key=v1,v2");
    std::string key = axis.substr(0, eq);
    key.erase(0, key.find_first_not_of(" \t"));
    key.erase(key.find_last_not_of(" \t") + 1);
    std::vector<std::string> values;
    std::stringstream vs(axis.substr(eq + 1));
    std::string v;
    while (std::getline(vs, v, ',')) {
      v.erase(0, v.find_first_not_of(" \t"));
      v.erase(v.find_last_not_of(" \t") + 1);
      if (!v.empty()) values.push_back(v);
    }
    if (values.empty()) fail(ErrorCode::invalid_argument, "grid axis '" + key + "' has no values");
    RunConfig probe;
    get_key(probe, key);  // rejects unknown keys up front
    axes.emplace_back(key, values);
  }
  if (axes.empty()) fail(ErrorCode::invalid_argument, "empty grid");
  std::vector<std::vector<std::pair<std::string, std::string>>> cells{{}};
  for (const auto& [key, values] : axes) {
    std::vector<std::vector<std::pair<std::string, std::string>>> next;
    for (const auto& cell : cells) {
      for (const auto& v : values) {
        auto extended = cell;
        extended.emplace_back(key, v);
        next.push_back(std::move(extended));
      }
    }
    cells = std::move(next);
  }
  return cells;
}

std::string run_ablate(const RunConfig& base, const fs::path& data_dir, const std::string& grid,
                       const fs::path& out_dir, std::ostream* log) {
  const auto cells = parse_grid(grid);
  const fs::path test_manifest = manifest_path(data_dir, "test");
  std::vector<RunConfig> configs;
  for (const auto& cell : cells) {
    RunConfig cfg = base;
    for (const auto& [k, v] : cell) set_key(cfg, k, v);
    validate(cfg);
    configs.push_back(std::move(cfg));
  }
  write_snapshot(base, out_dir);
  std::ostringstream csv;
  csv << "cell";
  for (const auto& [k, v] : cells.front()) csv << ',' << k;
  csv << ",MAE,OBO,best_epoch\n";
  for (std::size_t i = 0; i < cells.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "cell_%03zu", i);
    const fs::path cell_dir = out_dir / name;
    if (log) *log << name << ":";
    if (log) {
      for (const auto& [k, v] : cells[i]) *log << ' ' << k << '=' << v;
      *log << '\n';
    }
    TrainResult trained = run_train(configs[i], data_dir, cell_dir, log);
    const Model model{configs[i], std::move(trained.params)};
    const MetricsReport report = run_eval(model, test_manifest, cell_dir);
    csv << i;
    for (const auto& [k, v] : cells[i]) csv << ',' << v;
    csv << ',' << format_real(report.mae) << ',' << format_real(report.obo) << ',' << trained.best_epoch << '\n';
    if (log) *log << "  MAE=" << format_real(report.mae) << " OBO=" << format_real(report.obo) << '\n';
  }
  write_text(out_dir / "ablation.csv", csv.str());
  return csv.str();
}

}  // namespace sfn
