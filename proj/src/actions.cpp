#include "ubiphysio/actions.hpp"

#include <fstream>
#include <sstream>

#include "ubiphysio/errors.hpp"

namespace ubiphysio {

namespace {

constexpr std::array<std::string_view, kPatternCount> kPatternNames = {
    "Lumbar Flexion/Extension",
    "Lumbar Hyperextension after Lifting Heavy Objects",
    "Getting Up Directly from / Lying Down Directly into a Supine Position",
    "Trunk Rotation",
    "Hip Lateral Shift",
    "Spinal Extension",
    "Cervical Lateral Flexion Compensation",
    "On tiptoes/Pelvic Tilt",
    "No Trunk Activity",
    "Knee Flexion Compensation",
    "Lumbar Hyperextension/Pelvic Anterior Tilt",
    "Lumbar Hyperextension/Swayback",
    "Trunk Deviation from Midline/Trunk Lateral Shift",
    "Hip Hyperflexion",
    "Upper Chest Depression",
    "Hip Tilt",
    "Lumbar Lateral Flexion",
    "Trunk Flexion",
    "Excessive Anterior Knee Displacement",
    "Upright Trunk Squat",
    "Excessive Hip and Knee Flexion Angle/Too Deep Squat",
    "Shallow Squat",
    "Uneven Bilateral Loading",
    "Thoracic Hyperextension Compensating for Shoulder Joint Movement",
    "Insufficient Ankle Dorsiflexion",
    "Trunk Anterior Lean",
    "Incorrect Walking Pattern",
    "Lumbar Lift off the Bed",
    "Same-side Hand and Foot Movement",
    "Head Not Touching the Ground",
    "Thigh Not Perpendicular to the Floor",
    "Calf Not Parallel to the Bed Surface/Calf Dangling",
    "Hip hyperextension leading to lumbar hyperextension",
};

// Action list and candidate patterns. The original action chart is not
// published in machine-readable form; this table is a reconstruction that
// keeps the action numbering referenced in the user-study discussion
// (#6, #12, #15, #19) and covers all 33 patterns.
const std::array<ActionInfo, kActionCount> kActions = {{
    {1, "sweep_floor", "sweeping the floor", {1, 4, 10, 18}},
    {2, "carry_suitcase", "carrying a heavy suitcase", {2, 13, 17, 23}},
    {3, "pick_up_object", "picking up an object from the floor", {1, 2, 10, 18}},
    {4, "sit_chair", "sitting down on a chair", {1, 18, 26}},
    {5, "sit_sofa", "sitting down on a sofa", {1, 18, 26}},
    {6, "stand_up_chair", "standing up from a chair", {1, 10, 18, 26}},
    {7, "lie_down_bed", "lying down on the bed", {1, 3, 4}},
    {8, "get_up_bed", "getting up from the bed", {1, 3, 4}},
    {9, "walk", "walking", {13, 27, 29}},
    {10, "heel_walk", "heel walking", {25, 26, 27}},
    {11, "heel_to_toe_walk", "heel-to-toe walking", {13, 23, 27}},
    {12, "kneeling_hand_lift", "hand lift in kneeling position", {4, 11, 12, 13, 24}},
    {13, "kneeling_leg_lift", "leg lift in kneeling position", {11, 12, 16, 33}},
    {14, "shoulder_wrap", "shoulder wrap", {7, 11, 15}},
    {15, "left_leg_lift", "left-leg lift in standing position", {5, 13, 14, 16, 26}},
    {16, "right_leg_lift", "right-leg lift in standing position", {5, 13, 14, 16, 26}},
    {17, "side_bend", "side bend", {4, 5, 7, 10}},
    {18, "chest_fly", "chest fly", {11, 15, 24}},
    {19, "alternating_toe_touch", "alternating toe touch", {1, 4, 10}},
    {20, "squat", "squat", {8, 19, 20, 21, 22, 25, 26}},
    {21, "bridge", "bridge", {11, 16, 28, 33}},
    {22, "lunge", "forward lunge", {10, 13, 19, 26}},
    {23, "trunk_rotation", "standing trunk rotation", {5, 9, 13}},
    {24, "cat_camel", "cat-camel stretch in kneeling position", {6, 9, 31}},
    {25, "supine_leg_raise", "alternate leg raise in supine position", {28, 30, 32}},
}};

}  // namespace

std::string_view pattern_name(int pattern) {
  if (pattern < 1 || pattern > kPatternCount) {
    throw ValidationError("movement pattern index out of range: " + std::to_string(pattern));
  }
  return kPatternNames[pattern - 1];
}

bool is_valid_action(int action_type) { return action_type >= 1 && action_type <= kActionCount; }

const ActionInfo& action_info(int action_type) {
  if (!is_valid_action(action_type)) {
    throw ValidationError("action type out of range: " + std::to_string(action_type));
  }
  return kActions[action_type - 1];
}

const std::array<ActionInfo, kActionCount>& action_catalog() { return kActions; }

int action_from_name(std::string_view name) {
  for (const auto& a : kActions) {
    if (a.name == name || a.label_text == name) return a.id;
  }
  throw NotFoundError("unknown action '" + std::string(name) + "'");
}

void validate_patterns(int action_type, const std::set<int>& patterns) {
  const auto& info = action_info(action_type);
  for (int p : patterns) {
    bool ok = false;
    for (int c : info.candidate_patterns) ok = ok || c == p;
    if (!ok) {
      throw ValidationError("pattern " + std::to_string(p) + " is not a candidate for action " +
                            std::to_string(action_type) + " (" + std::string(info.name) + ")");
    }
  }
}

LabelTable::LabelTable() {
  for (const auto& a : kActions) text_[a.id - 1] = std::string(a.label_text);
}

LabelTable LabelTable::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  LabelTable table;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError("label table line without tab: " + line);
    int id = std::stoi(line.substr(0, tab));
    if (!is_valid_action(id)) throw ParseError("label table id out of range: " + line);
    table.text_[id - 1] = line.substr(tab + 1);
  }
  return table;
}

const std::string& LabelTable::text(int action_type) const {
  if (!is_valid_action(action_type)) {
    throw ValidationError("action type out of range: " + std::to_string(action_type));
  }
  return text_[action_type - 1];
}

}  // namespace ubiphysio
