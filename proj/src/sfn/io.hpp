#pragma once

// Feature files ("SFNF") and JSON-lines dataset manifests.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sfn/sequence.hpp"

namespace sfn {

inline constexpr char kFeatureMagic[4] = {'S', 'F', 'N', 'F'};
inline constexpr std::uint32_t kFeatureVersion = 1;

void write_features(const std::filesystem::path& path, const FeatureMatrix& features);
FeatureMatrix read_features(const std::filesystem::path& path);

/// One manifest line.
struct ManifestEntry {
  std::string id;
  std::string class_label;
  std::string features_file;  // relative to the manifest's directory
  std::vector<Cycle> cycles;
  std::optional<std::string> exemplar_id;
};

void write_manifest(const std::filesystem::path& path,
                    const std::vector<ManifestEntry>& entries);
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);

/// A loaded manifest: sequences in file order, with their exemplar ids.
struct Dataset {
  std::vector<AnnotatedSequence> sequences;
  std::vector<std::optional<std::string>> exemplar_ids;
};

Dataset load_dataset(const std::filesystem::path& manifest_path);

/// A manifest plus the exemplar sequences its items refer to (loaded from a
/// sibling `exemplars.jsonl` when any item carries an exemplar id).
struct CountingSet {
  std::vector<AnnotatedSequence> items;
  std::vector<std::optional<std::string>> exemplar_ids;
  std::vector<AnnotatedSequence> exemplars;

  std::size_t size() const { return items.size(); }
  /// Exemplar of item `i`, or nullptr when it has none.
  const AnnotatedSequence* exemplar(std::size_t i) const;
};

CountingSet load_counting_set(const std::filesystem::path& manifest_path);

/// Writes features under `<dir>/features/<id>.sfnf` and returns the entry.
ManifestEntry store_sequence(const std::filesystem::path& dir,
                             const AnnotatedSequence& seq,
                             std::optional<std::string> exemplar_id = std::nullopt);

/// Reads a whole file as text; throws `Error(io)` on failure.
std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace sfn
