#include "ubiphysio/dataset.hpp"

#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "ubiphysio/actions.hpp"
#include "ubiphysio/errors.hpp"
#include "ubiphysio/file_util.hpp"

namespace ubiphysio {

using nlohmann::json;

namespace {

template <typename F>
void for_each_line(const std::string& jsonl, const char* what, F&& f) {
  std::istringstream in(jsonl);
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      f(json::parse(line));
    } catch (const json::exception& e) {
      throw ParseError(fmt::format("{} line {}: {}", what, lineno, e.what()));
    } catch (const ValidationError& e) {
      throw ParseError(fmt::format("{} line {}: {}", what, lineno, e.what()));
    }
  }
}

}  // namespace

std::vector<ManifestEntry> parse_manifest(const std::string& jsonl) {
  std::vector<ManifestEntry> out;
  std::set<std::string> ids;
  for_each_line(jsonl, "manifest", [&](const json& j) {
    ManifestEntry e;
    e.id = j.at("id").get<std::string>();
    e.participant = j.at("participant").get<std::string>();
    e.action_type = j.at("action_type").get<int>();
    e.patterns = j.value("patterns", std::set<int>{});
    e.motion = j.at("motion").get<std::string>();
    e.features = j.value("features", std::string{});
    e.descriptions = j.value("descriptions", std::vector<std::string>{});
    validate_patterns(e.action_type, e.patterns);
    if (!ids.insert(e.id).second) throw ValidationError("duplicate id '" + e.id + "'");
    out.push_back(std::move(e));
  });
  return out;
}

std::string write_manifest(const std::vector<ManifestEntry>& entries) {
  std::string out;
  for (const auto& e : entries) {
    json j = {{"id", e.id},         {"participant", e.participant}, {"action_type", e.action_type},
              {"patterns", e.patterns}, {"motion", e.motion},   {"descriptions", e.descriptions}};
    if (!e.features.empty()) j["features"] = e.features;
    out += j.dump() + "\n";
  }
  return out;
}

std::vector<ManifestEntry> load_manifest(const std::filesystem::path& dir) {
  return parse_manifest(read_file(dir / kManifestName));
}

void save_manifest(const std::vector<ManifestEntry>& entries, const std::filesystem::path& dir) {
  write_file(dir / kManifestName, write_manifest(entries));
}

std::vector<TextRecord> parse_text_records(const std::string& jsonl) {
  std::vector<TextRecord> out;
  for_each_line(jsonl, "text record", [&](const json& j) {
    out.push_back({j.at("id").get<std::string>(), j.at("text").get<std::string>()});
  });
  return out;
}

std::string write_text_records(const std::vector<TextRecord>& records) {
  std::string out;
  for (const auto& r : records) out += json{{"id", r.id}, {"text", r.text}}.dump() + "\n";
  return out;
}

}  // namespace ubiphysio
