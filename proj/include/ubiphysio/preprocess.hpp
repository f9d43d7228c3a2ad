#pragma once

#include <array>
#include <optional>
#include <vector>

#include "ubiphysio/motion.hpp"

namespace ubiphysio {

// Retargets every frame onto the canonical bone lengths: the root stays put
// and each parent->child direction is preserved. Throws DegeneratePoseError
// when an input bone has zero length.
MotionSequence normalize_skeleton(const MotionSequence& seq, const CanonicalSkeleton& canon);

// Unit horizontal body-facing direction: the mean of the shoulder-line and
// hip-line normals (cross with +Y). Empty when both lines are vertical or
// degenerate.
std::optional<Eigen::Vector3d> facing_direction(const JointPositions& pose);

// Rotation about +Y taking the frame-0 facing direction onto +Z, applied to all
// frames around the frame-0 root.
MotionSequence rotate_to_z_plus(const MotionSequence& seq);

// normalize_skeleton followed by rotate_to_z_plus.
MotionSequence preprocess(const MotionSequence& seq, const CanonicalSkeleton& canon);

struct SegmentRules {
  double max_passthrough_s = 20.0;
  double window_s = 15.0;
  double min_remainder_s = 2.0;
};

struct Instance {
  MotionSequence motion;
  Annotation annotation;  // onset/offset refer to the source sequence
};

// One instance per annotation; annotations longer than max_passthrough_s are
// cut into non-overlapping window_s pieces and a short tail is dropped.
std::vector<Instance> segment_instances(const MotionSequence& seq,
                                        const std::vector<Annotation>& annotations,
                                        const SegmentRules& rules = {});

// 17-joint input (video pose estimators). Joint order of each frame column:
inline constexpr std::array<Joint, 17> kJoints17 = {
    Joint::Hip,       Joint::Spine1,    Joint::Spine2,   Joint::Neck,      Joint::Head,
    Joint::LShoulder, Joint::LArm,      Joint::LForearm, Joint::RShoulder, Joint::RArm,
    Joint::RForearm,  Joint::LUpperleg, Joint::LLeg,     Joint::LFoot,     Joint::RUpperleg,
    Joint::RLeg,      Joint::RFoot,
};

using Pose17 = Eigen::Matrix<double, 3, 17>;

struct Sequence17 {
  std::vector<Pose17> frames;
  double sample_rate = kDefaultSampleRate;
};

// Distance from the anchor joint to each simulated extremity, meters.
struct ExtremityLengths {
  double head_end = 0.16;
  double l_hand = 0.09;
  double r_hand = 0.09;
  double l_foot_end = 0.15;
  double r_foot_end = 0.15;

  static ExtremityLengths from(const CanonicalSkeleton& canon);
};

// anchor + (toward - anchor) / |toward - anchor| * distance.
Eigen::Vector3d extrapolate_joint(const Eigen::Vector3d& anchor, const Eigen::Vector3d& toward,
                                  double distance);

// Fills the 7 joints missing from a 17-joint pose: extremities are extended
// from their anchor along the anchor's bone, neck1 = mean(neck, head) and
// spine = mean(hip, spine1).
MotionSequence convert_17_to_24(const Sequence17& seq, const ExtremityLengths& lengths);

}  // namespace ubiphysio
