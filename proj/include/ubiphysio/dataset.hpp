#pragma once

#include <filesystem>
#include <set>
#include <string>
#include <vector>

namespace ubiphysio {

// One action instance of a dataset directory. Paths are relative to the
// directory holding manifest.jsonl.
struct ManifestEntry {
  std::string id;
  std::string participant;
  int action_type = 0;
  std::set<int> patterns;
  std::string motion;    // pose file
  std::string features;  // feature file, empty until extracted
  std::vector<std::string> descriptions;
};

inline constexpr const char* kManifestName = "manifest.jsonl";

std::vector<ManifestEntry> parse_manifest(const std::string& jsonl);
std::string write_manifest(const std::vector<ManifestEntry>& entries);

std::vector<ManifestEntry> load_manifest(const std::filesystem::path& dir);
void save_manifest(const std::vector<ManifestEntry>& entries, const std::filesystem::path& dir);

// Simple {"id": ..., "text": ...} records used for candidate/reference files.
struct TextRecord {
  std::string id;
  std::string text;
};
std::vector<TextRecord> parse_text_records(const std::string& jsonl);
std::string write_text_records(const std::vector<TextRecord>& records);

}  // namespace ubiphysio
