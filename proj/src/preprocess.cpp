#include "ubiphysio/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ubiphysio/actions.hpp"
#include "ubiphysio/errors.hpp"

namespace ubiphysio {

namespace {

const Eigen::Vector3d kUp = Eigen::Vector3d::UnitY();

std::optional<Eigen::Vector3d> horizontal_normal(const Eigen::Vector3d& left_minus_right) {
  Eigen::Vector3d n = left_minus_right.cross(kUp);
  n.y() = 0.0;
  double len = n.norm();
  if (len < 1e-9) return std::nullopt;
  return n / len;
}

}  // namespace

MotionSequence normalize_skeleton(const MotionSequence& seq, const CanonicalSkeleton& canon) {
  seq.validate();
  canon.validate();
  MotionSequence out = seq;
  for (int f = 0; f < seq.size(); ++f) {
    const auto& in = seq.frames[f].positions;
    auto& dst = out.frames[f].positions;
    dst.col(0) = in.col(0);
    for (int j = 1; j < kJointCount; ++j) {
      int p = kParent[j];
      Eigen::Vector3d bone = in.col(j) - in.col(p);
      double len = bone.norm();
      if (!(len > 0.0)) {
        throw DegeneratePoseError("frame " + std::to_string(f) + ": zero-length bone " +
                                  std::string(kJointNames[p]) + "->" + std::string(kJointNames[j]));
      }
      dst.col(j) = dst.col(p) + bone * (canon.bone_length[j] / len);
    }
  }
  return out;
}

std::optional<Eigen::Vector3d> facing_direction(const JointPositions& pose) {
  auto shoulders = horizontal_normal(pose.col(idx(Joint::LShoulder)) - pose.col(idx(Joint::RShoulder)));
  auto hips = horizontal_normal(pose.col(idx(Joint::LUpperleg)) - pose.col(idx(Joint::RUpperleg)));
  Eigen::Vector3d sum = Eigen::Vector3d::Zero();
  if (shoulders) sum += *shoulders;
  if (hips) sum += *hips;
  double len = sum.norm();
  if (len < 1e-9) return std::nullopt;
  return sum / len;
}

MotionSequence rotate_to_z_plus(const MotionSequence& seq) {
  seq.validate();
  auto facing = facing_direction(seq.frames.front().positions);
  if (!facing) throw DegeneratePoseError("frame 0: facing direction has no horizontal component");
  double heading = std::atan2(facing->x(), facing->z());
  Eigen::Matrix3d rot = Eigen::AngleAxisd(-heading, kUp).toRotationMatrix();
  Eigen::Vector3d pivot = seq.frames.front().positions.col(0);
  pivot.y() = 0.0;

  MotionSequence out = seq;
  for (auto& frame : out.frames) {
    frame.positions = (rot * (frame.positions.colwise() - pivot)).colwise() + pivot;
  }
  return out;
}

MotionSequence preprocess(const MotionSequence& seq, const CanonicalSkeleton& canon) {
  return rotate_to_z_plus(normalize_skeleton(seq, canon));
}

std::vector<Instance> segment_instances(const MotionSequence& seq,
                                        const std::vector<Annotation>& annotations,
                                        const SegmentRules& rules) {
  seq.validate();
  std::vector<Annotation> sorted = annotations;
  std::sort(sorted.begin(), sorted.end(),
            [](const Annotation& a, const Annotation& b) { return a.onset < b.onset; });
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const auto& a = sorted[i];
    if (a.onset < 0 || a.onset >= a.offset || a.offset > seq.size()) {
      throw ValidationError("annotation [" + std::to_string(a.onset) + ", " +
                            std::to_string(a.offset) + ") outside sequence of " +
                            std::to_string(seq.size()) + " frames");
    }
    validate_patterns(a.action_type, a.patterns);
    if (i > 0 && a.onset < sorted[i - 1].offset) {
      throw ValidationError("annotations overlap at frame " + std::to_string(a.onset));
    }
  }

  const int max_pass = static_cast<int>(std::lround(rules.max_passthrough_s * seq.sample_rate));
  const int window = static_cast<int>(std::lround(rules.window_s * seq.sample_rate));
  const int min_tail = static_cast<int>(std::lround(rules.min_remainder_s * seq.sample_rate));

  std::vector<Instance> out;
  for (const auto& a : sorted) {
    if (a.length() <= max_pass) {
      out.push_back({seq.slice(a.onset, a.offset), a});
      continue;
    }
    for (int start = a.onset; start < a.offset; start += window) {
      int end = std::min(start + window, a.offset);
      if (end - start < window && end - start < min_tail) break;
      Annotation piece = a;
      piece.onset = start;
      piece.offset = end;
      out.push_back({seq.slice(start, end), piece});
    }
  }
  return out;
}

ExtremityLengths ExtremityLengths::from(const CanonicalSkeleton& canon) {
  ExtremityLengths e;
  e.head_end = canon.length(Joint::HeadEnd);
  e.l_hand = canon.length(Joint::LHand);
  e.r_hand = canon.length(Joint::RHand);
  e.l_foot_end = canon.length(Joint::LFootEnd);
  e.r_foot_end = canon.length(Joint::RFootEnd);
  return e;
}

Eigen::Vector3d extrapolate_joint(const Eigen::Vector3d& anchor, const Eigen::Vector3d& toward,
                                  double distance) {
  Eigen::Vector3d ab = toward - anchor;
  double len = ab.norm();
  if (!(len > 0.0)) throw DegeneratePoseError("cannot extrapolate along a zero-length segment");
  return anchor + ab / len * distance;
}

MotionSequence convert_17_to_24(const Sequence17& seq, const ExtremityLengths& lengths) {
  std::vector<JointPositions> poses;
  poses.reserve(seq.frames.size());
  for (std::size_t f = 0; f < seq.frames.size(); ++f) {
    const auto& src = seq.frames[f];
    JointPositions p = JointPositions::Zero();
    for (int k = 0; k < 17; ++k) p.col(idx(kJoints17[k])) = src.col(k);

    auto at = [&](Joint j) -> Eigen::Vector3d { return p.col(idx(j)); };
    // Extend past the anchor along the bone that ends at it.
    auto extend = [&](Joint parent, Joint anchor, double d) {
      Eigen::Vector3d a = at(anchor);
      try {
        return extrapolate_joint(a, a + (a - at(parent)), d);
      } catch (const DegeneratePoseError&) {
        throw DegeneratePoseError("frame " + std::to_string(f) + ": zero-length bone " +
                                  std::string(joint_name(parent)) + "->" +
                                  std::string(joint_name(anchor)));
      }
    };

    p.col(idx(Joint::Spine)) = 0.5 * (at(Joint::Hip) + at(Joint::Spine1));
    p.col(idx(Joint::Neck1)) = 0.5 * (at(Joint::Neck) + at(Joint::Head));
    p.col(idx(Joint::HeadEnd)) = extend(Joint::Neck, Joint::Head, lengths.head_end);
    p.col(idx(Joint::LHand)) = extend(Joint::LArm, Joint::LForearm, lengths.l_hand);
    p.col(idx(Joint::RHand)) = extend(Joint::RArm, Joint::RForearm, lengths.r_hand);
    p.col(idx(Joint::LFootEnd)) = extend(Joint::LLeg, Joint::LFoot, lengths.l_foot_end);
    p.col(idx(Joint::RFootEnd)) = extend(Joint::RLeg, Joint::RFoot, lengths.r_foot_end);
    poses.push_back(p);
  }
  auto out = MotionSequence::from_positions(std::move(poses), seq.sample_rate);
  out.validate();
  return out;
}

}  // namespace ubiphysio
