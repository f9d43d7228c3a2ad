#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ubiphysio/motion.hpp"

namespace ubiphysio {

// Joint-angle parameterisation of a pose (radians, body frame x = left,
// y = up, z = forward). Index 0 of the limb arrays is the left side.
struct BodyParams {
  Eigen::Vector3d root = Eigen::Vector3d::Zero();   // world position of the hip joint
  Eigen::Vector3d shift = Eigen::Vector3d::Zero();  // extra pelvis offset in the body frame
  double yaw = 0.0;
  double pitch = 0.0;  // whole-body forward tilt
  double roll = 0.0;   // whole-body tilt to the right
  std::array<double, 3> spine_flex{};  // per lumbar/thoracic segment
  std::array<double, 3> spine_lat{};   // toward the left
  std::array<double, 3> spine_rot{};   // axial twist
  double neck_flex = 0.0;
  double neck_lat = 0.0;
  struct Arm {
    double flex = 0.0;   // forward elevation
    double abd = 0.0;    // sideways elevation
    double horiz = 0.0;  // horizontal adduction
    double elbow = 0.0;
  };
  struct Leg {
    double flex = 0.0;
    double abd = 0.0;
    double knee = 0.0;
    double ankle = 0.0;  // dorsiflexion
  };
  std::array<Arm, 2> arm{};
  std::array<Leg, 2> leg{};
};

// Forward kinematics; the result is not grounded.
JointPositions forward_kinematics(const BodyParams& params, const CanonicalSkeleton& bones);

struct SynthSpec {
  int action_type = 1;
  std::set<int> patterns;
  double duration_s = 4.0;
  std::uint64_t seed = 0;
  // Traits (body size, tempo, amplitude, posture) are drawn from this seed;
  // defaults to seed.
  std::optional<std::uint64_t> participant_seed;
  double sample_rate = kDefaultSampleRate;
};

struct SynthResult {
  MotionSequence motion;
  Annotation annotation;
};

// Deterministic for a given spec. Throws ValidationError for an unknown action
// or a pattern that is not a candidate for it.
SynthResult synthesize_action(const SynthSpec& spec);

// Three template descriptions naming the action and its patterns.
std::vector<std::string> describe_instance(int action_type, const std::set<int>& patterns);

// Every participant performs every action `repeats` times; each candidate
// pattern of an action is switched on independently with pattern_prob.
struct SynthDatasetSpec {
  int participants = 40;
  int repeats = 1;
  double min_duration_s = 3.0;
  double max_duration_s = 6.0;
  double pattern_prob = 0.3;
  double sample_rate = kDefaultSampleRate;
  std::uint64_t seed = 0;
  std::vector<int> actions;  // empty: all 25
};

struct SynthItem {
  std::string id;           // "p007_a12_r0"
  std::string participant;  // "p007"
  SynthResult data;
  std::vector<std::string> descriptions;
};

std::vector<SynthItem> synthesize_dataset(const SynthDatasetSpec& spec);

}  // namespace ubiphysio
