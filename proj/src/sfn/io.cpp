#include "sfn/io.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "sfn/binary.hpp"
#include "sfn/error.hpp"

namespace sfn {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

void write_features(const fs::path& path, const FeatureMatrix& features) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) fail(ErrorCode::io, "cannot open '" + path.string() + "' for writing");
  os.write(kFeatureMagic, 4);
  binary::put<std::uint32_t>(os, kFeatureVersion);
  binary::put<std::uint32_t>(os, static_cast<std::uint32_t>(features.rows()));
  binary::put<std::uint32_t>(os, static_cast<std::uint32_t>(features.cols()));
  for (Index r = 0; r < features.rows(); ++r) {
    for (Index c = 0; c < features.cols(); ++c) binary::put_f32(os, features(r, c));
  }
  if (!os) fail(ErrorCode::io, "write failed for '" + path.string() + "'");
}

FeatureMatrix read_features(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorCode::io, "cannot open '" + path.string() + "'");
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kFeatureMagic, 4) != 0) {
    fail(ErrorCode::format, "'" + path.string() + "' is not an SFNF feature file");
  }
  const auto version = binary::get<std::uint32_t>(is, "feature header");
  if (version != kFeatureVersion) {
    fail(ErrorCode::format, "unsupported feature file version " + std::to_string(version));
  }
  const auto rows = binary::get<std::uint32_t>(is, "feature header");
  const auto cols = binary::get<std::uint32_t>(is, "feature header");
  FeatureMatrix features(rows, cols);
  for (Index r = 0; r < features.rows(); ++r) {
    for (Index c = 0; c < features.cols(); ++c) {
      features(r, c) = binary::get_f32(is, "feature payload in '" + path.string() + "'");
    }
  }
  return features;
}

void write_manifest(const fs::path& path, const std::vector<ManifestEntry>& entries) {
  std::ostringstream out;
  for (const ManifestEntry& e : entries) {
    json j;
    j["id"] = e.id;
    j["class"] = e.class_label;
    j["features_file"] = e.features_file;
    json cycles = json::array();
    for (const Cycle& c : e.cycles) cycles.push_back({c.start, c.end});
    j["cycles"] = std::move(cycles);
    if (e.exemplar_id) j["exemplar_id"] = *e.exemplar_id;
    out << j.dump() << '\n';
  }
  write_text(path, out.str());
}

std::vector<ManifestEntry> read_manifest(const fs::path& path) {
  std::istringstream in(read_text(path));
  std::vector<ManifestEntry> entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    json j;
    try {
      j = json::parse(line);
      ManifestEntry e;
      e.id = j.at("id").get<std::string>();
      e.class_label = j.at("class").get<std::string>();
      e.features_file = j.at("features_file").get<std::string>();
      for (const auto& c : j.at("cycles")) {
        if (!c.is_array() || c.size() != 2) {
          fail(ErrorCode::format, where + ": cycle must be [s,e]");
        }
        e.cycles.push_back({c[0].get<Index>(), c[1].get<Index>()});
      }
      if (j.contains("exemplar_id") && !j["exemplar_id"].is_null()) {
        e.exemplar_id = j["exemplar_id"].get<std::string>();
      }
      entries.push_back(std::move(e));
    } catch (const json::exception& ex) {
      fail(ErrorCode::format, where + ": " + ex.what());
    }
  }
  return entries;
}

Dataset load_dataset(const fs::path& manifest_path) {
  Dataset data;
  const fs::path base = manifest_path.parent_path();
  for (ManifestEntry& e : read_manifest(manifest_path)) {
    AnnotatedSequence seq;
    seq.id = e.id;
    seq.class_label = e.class_label;
    seq.features = read_features(base / e.features_file);
    seq.cycles = std::move(e.cycles);
    seq.source = manifest_path.filename().string();
    validate(seq);
    data.sequences.push_back(std::move(seq));
    data.exemplar_ids.push_back(std::move(e.exemplar_id));
  }
  return data;
}

const AnnotatedSequence* CountingSet::exemplar(std::size_t i) const {
  if (!exemplar_ids.at(i)) return nullptr;
  for (const auto& e : exemplars) {
    if (e.id == *exemplar_ids[i]) return &e;
  }
  return nullptr;
}

CountingSet load_counting_set(const fs::path& manifest_path) {
  Dataset data = load_dataset(manifest_path);
  CountingSet set;
  set.items = std::move(data.sequences);
  set.exemplar_ids = std::move(data.exemplar_ids);
  const bool wants_exemplars =
      std::any_of(set.exemplar_ids.begin(), set.exemplar_ids.end(), [](const auto& e) { return e.has_value(); });
  if (wants_exemplars) {
    const fs::path exemplar_manifest = manifest_path.parent_path() / "exemplars.jsonl";
    if (!fs::exists(exemplar_manifest)) {
      fail(ErrorCode::io, "items reference exemplars but '" + exemplar_manifest.string() + "' is missing");
    }
    set.exemplars = load_dataset(exemplar_manifest).sequences;
    for (std::size_t i = 0; i < set.size(); ++i) {
      if (set.exemplar_ids[i] && set.exemplar(i) == nullptr) {
        fail(ErrorCode::format, "exemplar '" + *set.exemplar_ids[i] + "' of '" + set.items[i].id + "' not found");
      }
    }
  }
  return set;
}

ManifestEntry store_sequence(const fs::path& dir, const AnnotatedSequence& seq,
                             std::optional<std::string> exemplar_id) {
  const std::string relative = "features/" + seq.id + ".sfnf";
  write_features(dir / relative, seq.features);
  return ManifestEntry{seq.id, seq.class_label, relative, seq.cycles,
                       std::move(exemplar_id)};
}

std::string read_text(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorCode::io, "cannot open '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << is.rdbuf();
  return buffer.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) fail(ErrorCode::io, "cannot open '" + path.string() + "' for writing");
  os << text;
  if (!os) fail(ErrorCode::io, "write failed for '" + path.string() + "'");
}

}  // namespace sfn
