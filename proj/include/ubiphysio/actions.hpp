#pragma once

#include <array>
#include <filesystem>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace ubiphysio {

inline constexpr int kActionCount = 25;
inline constexpr int kPatternCount = 33;

struct ActionInfo {
  int id;                        // 1..25
  std::string_view name;         // identifier used on the command line
  std::string_view label_text;   // text substituted for the action type in prompts
  std::vector<int> candidate_patterns;
};

// Movement-pattern reference table, index 1..33.
std::string_view pattern_name(int pattern);

const ActionInfo& action_info(int action_type);
const std::array<ActionInfo, kActionCount>& action_catalog();

// Looks up by name ("side_bend") or by label text ("side bend").
int action_from_name(std::string_view name);

bool is_valid_action(int action_type);

// Throws ValidationError when a pattern is outside the candidates of the action.
void validate_patterns(int action_type, const std::set<int>& patterns);

// Editable override of the label text table: one "id<TAB>text" per line.
class LabelTable {
 public:
  LabelTable();
  static LabelTable load(const std::filesystem::path& path);

  const std::string& text(int action_type) const;

 private:
  std::array<std::string, kActionCount> text_;
};

}  // namespace ubiphysio
