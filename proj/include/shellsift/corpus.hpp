#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace shellsift {

enum class Origin { original, mutated, de_malicious, synthetic_fixture };

const char* origin_name(Origin o);
Origin origin_from_name(std::string_view name);

// Present exactly when a sample was derived from another one.
struct Lineage {
  std::string parent_id;
  std::string recipe_id;
  uint64_t seed = 0;
  bool operator==(const Lineage&) const = default;
};

struct ScriptSample {
  std::string id;
  std::string raw;
  int label = 0;  // 1 = webshell
  Origin origin = Origin::original;
  std::optional<Lineage> lineage;
  std::string content_hash;  // lowercase hex
};

struct ManifestEntry {
  std::string id;
  std::string path;  // relative to the manifest root, '/' separators
  int label = 0;
  Origin origin = Origin::original;
  std::optional<Lineage> lineage;
  std::string hash;
  std::string hash_alg = "sha256";
  bool operator==(const ManifestEntry&) const = default;
};

struct CorpusManifest {
  std::filesystem::path root;
  std::vector<ManifestEntry> entries;

  const ManifestEntry* find(std::string_view id) const;
  std::array<size_t, 2> label_counts() const;
  bool operator==(const CorpusManifest& o) const {
    return root == o.root && entries == o.entries;
  }
};

// Path-prefix labeling. A file's relative path must match exactly one rule.
struct LabelRule {
  std::string prefix;
  int label = 0;
};

std::vector<LabelRule> default_label_rules();  // benign/ -> 0, webshell/ -> 1

// Rulefile format: one rule per line, "<label> <path-prefix>". Blank lines
// and lines starting with '#' are skipped.
std::vector<LabelRule> parse_label_rules(std::string_view text);

struct IngestReport {
  CorpusManifest manifest;
  std::vector<std::string> errors;  // per-file problems; ingest continues past them
};

IngestReport ingest(const std::filesystem::path& root, const std::vector<LabelRule>& rules);

enum class Partition { train, val, test };
const char* partition_name(Partition p);

struct SplitAssignment {
  std::map<std::string, Partition> parts;
  std::array<double, 3> ratios{};
  uint64_t seed = 0;
};

// Per-label shuffled largest-remainder allocation; each label's partition
// sizes deviate from the exact target by less than one sample.
SplitAssignment stratified_split(const CorpusManifest& manifest,
                                 const std::array<double, 3>& ratios, uint64_t seed);

std::vector<std::string> split_ids(const SplitAssignment& split, Partition p);
std::string split_to_json(const SplitAssignment& split);
SplitAssignment split_from_json(std::string_view text);

// Writes deterministic benign and webshell test-pattern fixtures under
// out_dir/benign and out_dir/webshell and returns their manifest. Positives
// are standard documented detection-test patterns only.
CorpusManifest synth_fixtures(size_t n_benign, size_t n_positive, uint64_t seed,
                              const std::filesystem::path& out_dir);

ScriptSample load_sample(const CorpusManifest& manifest, std::string_view id);

std::string manifest_to_jsonl(const CorpusManifest& manifest);
CorpusManifest manifest_from_jsonl(std::string_view text, std::filesystem::path root);
void write_manifest(const CorpusManifest& manifest, const std::filesystem::path& file);
// Root defaults to the manifest file's own directory.
CorpusManifest read_manifest(const std::filesystem::path& file);

}  // namespace shellsift
