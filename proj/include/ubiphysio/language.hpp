#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ubiphysio/actions.hpp"

namespace ubiphysio {

inline constexpr std::string_view kDefaultTaskPrompt =
    "I want you to act as an action interpreter. Given the type of human action and tokens representing the "
    "action, please generate a natural language description of the action.";

struct PromptOptions {
  std::string task_prompt{kDefaultTaskPrompt};
  std::string token_prefix = "<motion_id_";
  std::string token_suffix = ">";
  int codebook_size = 512;  // tokens must be below this
  LabelTable labels;
};

// Task prompt, a newline, then the condition line. Without an action type the
// "type: ..." clause is left out (tokens-only instruction).
std::string assemble_description_instruction(std::optional<int> action_type, const std::vector<int>& tokens,
                                             const PromptOptions& opt = {});

std::string render_tokens(const std::vector<int>& tokens, const PromptOptions& opt = {});

struct KnowledgeEntry {
  int action_type = 0;
  std::string low_demand;
  std::string high_demand;
};

// JSON lines {"action_type", "low_demand", "high_demand"}, at most one entry per action.
class KnowledgeBase {
 public:
  static KnowledgeBase parse(const std::string& jsonl);
  static KnowledgeBase load(const std::filesystem::path& path);

  void add(KnowledgeEntry e);
  // Throws NotFoundError naming the action type.
  const KnowledgeEntry& retrieve(int action_type) const;
  bool complete() const { return entries_.size() == static_cast<std::size_t>(kActionCount); }
  std::size_t size() const { return entries_.size(); }
  std::string to_jsonl() const;

 private:
  std::map<int, KnowledgeEntry> entries_;
};

enum class Role { Physiotherapist, FitnessCoach };

struct UserProfile {
  double age = 0.0;
  double pain = 0.0;  // 0..10
  double tug = 0.0;   // seconds
  std::optional<Role> role;  // when unset, pain 0 means a healthy user

  void validate() const;
  Role effective_role() const;
  static UserProfile from_json(const std::string& json);
};

// "age: 32, reported pain score: 4 (0-10), Time-Up-and-Go score: 12 seconds"
std::string render_profile(const UserProfile& p);

// knowledge == nullptr gives the variant without the knowledge clause and block.
std::string assemble_feedback_prompt(const UserProfile& profile, const KnowledgeEntry* knowledge,
                                     const std::string& description);

struct FinetuneInstance {
  std::string id;
  int action_type = 0;
  std::vector<int> tokens;
  std::vector<std::string> descriptions;
};

struct FinetuneRecord {
  std::string input;
  std::string output;
  bool operator==(const FinetuneRecord&) const = default;
};

inline constexpr int kDescriptionWordLimit = 25;

// One record per non-empty description. Empty descriptions are skipped and
// descriptions longer than the word limit are reported, both as warnings.
std::vector<FinetuneRecord> build_finetune_records(const std::vector<FinetuneInstance>& instances,
                                                   bool action_conditioned = true, const PromptOptions& opt = {});
std::string finetune_to_jsonl(const std::vector<FinetuneRecord>& records);
std::vector<FinetuneRecord> finetune_from_jsonl(const std::string& jsonl);

std::size_t word_count(const std::string& text);

}  // namespace ubiphysio
