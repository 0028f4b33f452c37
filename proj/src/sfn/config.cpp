#include "sfn/config.hpp"

#include <charconv>
#include <cmath>
#include <functional>
#include <sstream>

#include "sfn/error.hpp"
#include "sfn/io.hpp"

namespace sfn {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const std::string& expected) {
  fail(ErrorCode::invalid_argument, "invalid value '" + value + "' for " + key + " (expected " + expected + ")");
}

template <typename I>
I parse_integer(const std::string& key, const std::string& value) {
  I out{};
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc{} || ptr != end || value.empty()) bad_value(key, value, "an integer");
  return out;
}

double parse_real(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double out = std::stod(value, &used);
    if (used != value.size() || !std::isfinite(out)) bad_value(key, value, "a finite number");
    return out;
  } catch (const std::logic_error&) {
    bad_value(key, value, "a finite number");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  bad_value(key, value, "true or false");
}

std::string real_text(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::vector<double> parse_edges(const std::string& key, const std::string& value) {
  std::vector<double> edges;
  std::stringstream in(value);
  std::string item;
  while (std::getline(in, item, ',')) edges.push_back(parse_real(key, trim(item)));
  if (edges.empty()) bad_value(key, value, "a comma-separated list of increasing counts");
  for (std::size_t i = 0; i < edges.size(); ++i) {
    if (edges[i] < 1.0 || (i > 0 && edges[i] <= edges[i - 1])) {
      bad_value(key, value, "a comma-separated list of increasing counts >= 1");
    }
  }
  return edges;
}

std::string edges_text(const std::vector<double>& edges) {
  std::string out;
  for (std::size_t i = 0; i < edges.size(); ++i) out += (i ? "," : "") + real_text(edges[i]);
  return out;
}

struct Key {
  std::string name;
  std::string description;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

template <typename Field>
Key int_field(std::string name, std::string description, Field field) {
  return Key{name, std::move(description),
             [field](const RunConfig& c) {
               RunConfig copy = c;
               return std::to_string(field(copy));
             },
             [field, name](RunConfig& c, const std::string& v) { field(c) = parse_integer<int>(name, v); }};
}

template <typename Field>
Key real_field(std::string name, std::string description, Field field) {
  return Key{name, std::move(description),
             [field](const RunConfig& c) {
               RunConfig copy = c;
               return real_text(field(copy));
             },
             [field, name](RunConfig& c, const std::string& v) { field(c) = parse_real(name, v); }};
}

template <typename Field>
Key bool_field(std::string name, std::string description, Field field) {
  return Key{name, std::move(description),
             [field](const RunConfig& c) {
               RunConfig copy = c;
               return std::string(field(copy) ? "true" : "false");
             },
             [field, name](RunConfig& c, const std::string& v) { field(c) = parse_bool(name, v); }};
}

const std::vector<Key>& registry() {
  static const std::vector<Key> keys = [] {
    std::vector<Key> k;
    k.push_back(int_field("epochs", "training epochs", [](RunConfig& c) -> int& { return c.train.epochs; }));
    k.push_back(int_field("batch_size", "sequences per optimiser step",
                          [](RunConfig& c) -> int& { return c.train.batch_size; }));
    k.push_back(real_field("learning_rate", "peak Adam learning rate",
                           [](RunConfig& c) -> double& { return c.train.learning_rate; }));
    k.push_back(Key{"lr_schedule", "cosine or constant",
                    [](const RunConfig& c) { return to_string(c.train.lr_schedule); },
                    [](RunConfig& c, const std::string& v) { c.train.lr_schedule = parse_lr_schedule(v); }});
    k.push_back(real_field("grad_clip", "global gradient-norm clip (0 disables)",
                           [](RunConfig& c) -> double& { return c.train.grad_clip; }));
    k.push_back(Key{"seed", "seed for initialisation, data order and sampling",
                    [](const RunConfig& c) { return std::to_string(c.train.seed); },
                    [](RunConfig& c, const std::string& v) { c.train.seed = parse_integer<std::uint64_t>("seed", v); }});
    k.push_back(Key{"mode", "standard or specified (exemplar-guided) counting",
                    [](const RunConfig& c) { return to_string(c.train.mode); },
                    [](RunConfig& c, const std::string& v) { c.train.mode = parse_count_mode(v); }});

    k.push_back(bool_field("ablations.skim_enabled", "run the skim branch (off: zero guidance)",
                           [](RunConfig& c) -> bool& { return c.train.model.ablations.skim_enabled; }));
    k.push_back(bool_field("ablations.lsag_enabled", "use LSAG (off: additive guidance and plain conv blocks)",
                           [](RunConfig& c) -> bool& { return c.train.model.ablations.lsag_enabled; }));
    k.push_back(bool_field("ablations.feature_adaption_enabled", "LSAG guidance-conditioned channel gating",
                           [](RunConfig& c) -> bool& { return c.train.model.ablations.feature_adaption_enabled; }));
    k.push_back(bool_field("ablations.long_short_enabled", "LSAG attention + conv blocks",
                           [](RunConfig& c) -> bool& { return c.train.model.ablations.long_short_enabled; }));

    k.push_back(int_field("hyperparams.R", "downsampling rate",
                          [](RunConfig& c) -> int& { return c.train.model.views.downsample_rate; }));
    k.push_back(int_field("hyperparams.N_S", "contextual view length",
                          [](RunConfig& c) -> int& { return c.train.model.views.context_length; }));
    k.push_back(int_field("hyperparams.N_C", "instructive frames",
                          [](RunConfig& c) -> int& { return c.train.model.instructive_frames; }));
    k.push_back(int_field("hyperparams.N_F", "fine-grained view length",
                          [](RunConfig& c) -> int& { return c.train.model.views.fine_length; }));
    k.push_back(int_field("hyperparams.B", "LSAG blocks",
                          [](RunConfig& c) -> int& { return c.train.model.lsag.num_blocks; }));
    k.push_back(Key{"hyperparams.sampling", "random, uniform or top_nc",
                    [](const RunConfig& c) { return to_string(c.train.model.sampling); },
                    [](RunConfig& c, const std::string& v) { c.train.model.sampling = parse_sampling(v); }});
    k.push_back(int_field("hyperparams.d", "embedding width", [](RunConfig& c) -> int& { return c.train.model.d; }));

    k.push_back(int_field("model.heads", "attention heads", [](RunConfig& c) -> int& { return c.train.model.heads; }));
    k.push_back(int_field("model.ffn_mult", "feed-forward expansion",
                          [](RunConfig& c) -> int& { return c.train.model.ffn_mult; }));
    k.push_back(int_field("model.conv_kernel", "encoder temporal kernel",
                          [](RunConfig& c) -> int& { return c.train.model.conv_kernel; }));
    k.push_back(int_field("model.lsag_kernel", "LSAG temporal kernel",
                          [](RunConfig& c) -> int& { return c.train.model.lsag.conv_kernel; }));
    k.push_back(int_field("model.bottleneck_ratio", "LSAG gating bottleneck ratio r",
                          [](RunConfig& c) -> int& { return c.train.model.lsag.bottleneck_ratio; }));
    k.push_back(int_field("model.encoder_blocks", "focus encoder blocks",
                          [](RunConfig& c) -> int& { return c.train.model.encoder_blocks; }));
    k.push_back(int_field("model.skim_encoder_blocks", "skim encoder blocks",
                          [](RunConfig& c) -> int& { return c.train.model.skim_encoder_blocks; }));
    k.push_back(int_field("model.decoder_width", "focus decoder width",
                          [](RunConfig& c) -> int& { return c.train.model.decoder_width; }));
    k.push_back(int_field("model.skim_decoder_width", "skim decoder width",
                          [](RunConfig& c) -> int& { return c.train.model.skim_decoder_width; }));
    k.push_back(bool_field("model.trim_padding", "skip trailing padded frames (same outputs, less work)",
                           [](RunConfig& c) -> bool& { return c.train.model.trim_padding; }));

    k.push_back(int_field("synth.num_classes", "synthetic action classes",
                          [](RunConfig& c) -> int& { return c.synth.num_classes; }));
    k.push_back(Key{"synth.d_in", "feature width per frame (also the model input width)",
                    [](const RunConfig& c) { return std::to_string(c.synth.d_in); },
                    [](RunConfig& c, const std::string& v) {
                      c.synth.d_in = parse_integer<int>("synth.d_in", v);
                      c.train.model.d_in = c.synth.d_in;
                    }});
    k.push_back(int_field("synth.cycle_len_min", "shortest cycle, raw frames",
                          [](RunConfig& c) -> int& { return c.synth.cycle_len_min; }));
    k.push_back(int_field("synth.cycle_len_max", "longest cycle, raw frames",
                          [](RunConfig& c) -> int& { return c.synth.cycle_len_max; }));
    k.push_back(int_field("synth.cycles_min", "fewest cycles per sequence",
                          [](RunConfig& c) -> int& { return c.synth.cycles_min; }));
    k.push_back(int_field("synth.cycles_max", "most cycles per sequence",
                          [](RunConfig& c) -> int& { return c.synth.cycles_max; }));
    k.push_back(real_field("synth.noise_std", "Gaussian feature noise",
                           [](RunConfig& c) -> double& { return c.synth.noise_std; }));
    k.push_back(int_field("synth.idle_max", "longest idle stretch, raw frames",
                          [](RunConfig& c) -> int& { return c.synth.idle_max; }));
    k.push_back(real_field("synth.idle_gap_prob", "chance of an idle gap between cycles",
                           [](RunConfig& c) -> double& { return c.synth.idle_gap_prob; }));
    k.push_back(Key{"synth.seed", "dataset generation seed",
                    [](const RunConfig& c) { return std::to_string(c.synth.seed); },
                    [](RunConfig& c, const std::string& v) {
                      c.synth.seed = parse_integer<std::uint64_t>("synth.seed", v);
                    }});

    k.push_back(int_field("split.train", "training sequences", [](RunConfig& c) -> int& { return c.split.train; }));
    k.push_back(int_field("split.val", "validation sequences", [](RunConfig& c) -> int& { return c.split.val; }));
    k.push_back(int_field("split.test", "test sequences", [](RunConfig& c) -> int& { return c.split.test; }));

    k.push_back(int_field("multirep.distractor_classes_min", "fewest distractor classes per composite",
                          [](RunConfig& c) -> int& { return c.multirep.compose.distractor_classes_min; }));
    k.push_back(int_field("multirep.distractor_classes_max", "most distractor classes per composite",
                          [](RunConfig& c) -> int& { return c.multirep.compose.distractor_classes_max; }));
    k.push_back(real_field("multirep.target_fraction_min", "lower bound of the target frame share",
                           [](RunConfig& c) -> double& { return c.multirep.compose.target_fraction_min; }));
    k.push_back(real_field("multirep.target_fraction_max", "upper bound of the target frame share",
                           [](RunConfig& c) -> double& { return c.multirep.compose.target_fraction_max; }));
    k.push_back(int_field("multirep.exemplars_per_class", "held-out exemplar candidates per class",
                          [](RunConfig& c) -> int& { return c.multirep.exemplars_per_class; }));
    k.push_back(int_field("multirep.pool_per_class", "distractor source sequences per class and split",
                          [](RunConfig& c) -> int& { return c.multirep.pool_per_class; }));

    k.push_back(Key{"eval.bucket_edges", "count-range bucket upper edges",
                    [](const RunConfig& c) { return edges_text(c.bucket_edges); },
                    [](RunConfig& c, const std::string& v) { c.bucket_edges = parse_edges("eval.bucket_edges", v); }});
    return k;
  }();
  return keys;
}

const Key& find_key(const std::string& name) {
  for (const Key& k : registry()) {
    if (k.name == name) return k;
  }
  fail(ErrorCode::unknown_key, "unknown config key '" + name + "'");
}

}  // namespace

std::vector<KeyInfo> config_keys() {
  const RunConfig defaults;
  std::vector<KeyInfo> out;
  for (const Key& k : registry()) out.push_back({k.name, k.description, k.get(defaults)});
  return out;
}

void set_key(RunConfig& cfg, const std::string& key, const std::string& value) {
  find_key(key).set(cfg, trim(value));
}

std::string get_key(const RunConfig& cfg, const std::string& key) { return find_key(key).get(cfg); }

void apply_override(RunConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) {
    fail(ErrorCode::invalid_argument, "override '" + assignment + "' is not of the form key=value");
  }
  set_key(cfg, trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

void apply_text(RunConfig& cfg, const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    if (trim(line).empty()) continue;
    try {
      apply_override(cfg, line);
    } catch (const Error& e) {
      throw Error(e.code(), origin + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

void load_config_file(RunConfig& cfg, const std::filesystem::path& path) {
  apply_text(cfg, read_text(path), path.string());
}

std::vector<std::string> preset_names() { return {"desk", "full"}; }

void apply_preset(RunConfig& cfg, const std::string& name) {
  if (name == "desk") {
    const RunConfig defaults;
    cfg.train.epochs = defaults.train.epochs;
    cfg.train.batch_size = defaults.train.batch_size;
    cfg.train.learning_rate = defaults.train.learning_rate;
    cfg.train.model.d = defaults.train.model.d;
    cfg.train.model.decoder_width = defaults.train.model.decoder_width;
    return;
  }
  if (name == "full") {
    cfg.train.epochs = 200;
    cfg.train.learning_rate = 8e-6;
    cfg.train.model.d = 512;
    cfg.train.model.decoder_width = 512;
    return;
  }
  fail(ErrorCode::invalid_argument, "unknown preset '" + name + "' (expected desk or full)");
}

void validate(const RunConfig& cfg) {
  if (cfg.train.model.d_in != cfg.synth.d_in) {
    fail(ErrorCode::invalid_argument, "model input width differs from synth.d_in");
  }
  validate(cfg.train);
  validate(cfg.synth);
  if (cfg.split.train < 0 || cfg.split.val < 0 || cfg.split.test < 0) {
    fail(ErrorCode::invalid_argument, "split sizes must be >= 0");
  }
  const ComposeConfig& cc = cfg.multirep.compose;
  if (cc.distractor_classes_min < 3 || cc.distractor_classes_max < cc.distractor_classes_min) {
    fail(ErrorCode::invalid_argument, "multirep distractor classes need 3 <= min <= max");
  }
  if (!(cc.target_fraction_min > 0.0 && cc.target_fraction_min <= cc.target_fraction_max &&
        cc.target_fraction_max < 1.0)) {
    fail(ErrorCode::invalid_argument, "multirep target fractions need 0 < min <= max < 1");
  }
}

std::string snapshot(const RunConfig& cfg) {
  std::ostringstream os;
  for (const Key& k : registry()) os << k.name << " = " << k.get(cfg) << '\n';
  return os.str();
}

}  // namespace sfn
