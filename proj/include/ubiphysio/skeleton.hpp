#pragma once

#include <array>
#include <optional>
#include <string_view>

#include <Eigen/Dense>

namespace ubiphysio {

// 24-joint body model. Arm chain: shoulder (glenohumeral) -> arm (elbow) ->
// forearm (wrist) -> hand (hand end). Leg chain: upperleg (hip joint) ->
// leg (knee) -> foot (ankle) -> foot_end (toe).
enum class Joint : int {
  Hip = 0,
  Spine,
  Spine1,
  Spine2,
  Neck,
  Neck1,
  Head,
  HeadEnd,
  LShoulder,
  LArm,
  LForearm,
  LHand,
  RShoulder,
  RArm,
  RForearm,
  RHand,
  LUpperleg,
  LLeg,
  LFoot,
  LFootEnd,
  RUpperleg,
  RLeg,
  RFoot,
  RFootEnd,
};

inline constexpr int kJointCount = 24;
inline constexpr int kBoneCount = kJointCount - 1;

constexpr int idx(Joint j) { return static_cast<int>(j); }

inline constexpr std::array<std::string_view, kJointCount> kJointNames = {
    "hip",        "spine",     "spine1",     "spine2",    "neck",       "neck1",
    "head",       "head_end",  "l_shoulder", "l_arm",     "l_forearm",  "l_hand",
    "r_shoulder", "r_arm",     "r_forearm",  "r_hand",    "l_upperleg", "l_leg",
    "l_foot",     "l_foot_end", "r_upperleg", "r_leg",    "r_foot",     "r_foot_end",
};

// Parent of each joint; -1 for the root.
inline constexpr std::array<int, kJointCount> kParent = {
    -1, 0, 1, 2, 3, 4, 5, 6,     // trunk and head
    3,  8, 9, 10,                // left arm
    3,  12, 13, 14,              // right arm
    0,  16, 17, 18,              // left leg
    0,  20, 21, 22,              // right leg
};

// Left/right counterpart, identity for midline joints.
inline constexpr std::array<int, kJointCount> kMirror = {
    0,  1,  2,  3,  4,  5,  6,  7,  12, 13, 14, 15,
    8,  9,  10, 11, 20, 21, 22, 23, 16, 17, 18, 19,
};

std::string_view joint_name(Joint j);
std::optional<Joint> joint_from_name(std::string_view name);

// Positions of all joints for one frame; column j is joint j.
using JointPositions = Eigen::Matrix<double, 3, kJointCount>;

// Per-bone target lengths in meters, indexed by the child joint (entry 0 unused).
struct CanonicalSkeleton {
  std::array<double, kJointCount> bone_length{};

  // Adult-proportioned default used by preprocessing and the synthetic generator.
  static CanonicalSkeleton standard();

  double length(Joint child) const { return bone_length[idx(child)]; }
  void validate() const;
};

// Rest-pose bone direction in the body frame (x = left, y = up, z = forward).
Eigen::Vector3d rest_direction(Joint child);

}  // namespace ubiphysio
