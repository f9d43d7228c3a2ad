#include "ubiphysio/skeleton.hpp"

#include <cmath>

#include "ubiphysio/errors.hpp"

namespace ubiphysio {

std::string_view joint_name(Joint j) { return kJointNames[idx(j)]; }

std::optional<Joint> joint_from_name(std::string_view name) {
  for (int i = 0; i < kJointCount; ++i) {
    if (kJointNames[i] == name) return static_cast<Joint>(i);
  }
  return std::nullopt;
}

CanonicalSkeleton CanonicalSkeleton::standard() {
  CanonicalSkeleton s;
  auto set = [&](Joint j, double len) { s.bone_length[idx(j)] = len; };
  set(Joint::Spine, 0.10);
  set(Joint::Spine1, 0.12);
  set(Joint::Spine2, 0.12);
  set(Joint::Neck, 0.16);
  set(Joint::Neck1, 0.05);
  set(Joint::Head, 0.05);
  set(Joint::HeadEnd, 0.16);
  for (Joint sh : {Joint::LShoulder, Joint::RShoulder}) set(sh, 0.19);
  for (Joint j : {Joint::LArm, Joint::RArm}) set(j, 0.29);
  for (Joint j : {Joint::LForearm, Joint::RForearm}) set(j, 0.25);
  for (Joint j : {Joint::LHand, Joint::RHand}) set(j, 0.09);
  for (Joint j : {Joint::LUpperleg, Joint::RUpperleg}) set(j, 0.11);
  for (Joint j : {Joint::LLeg, Joint::RLeg}) set(j, 0.43);
  for (Joint j : {Joint::LFoot, Joint::RFoot}) set(j, 0.41);
  for (Joint j : {Joint::LFootEnd, Joint::RFootEnd}) set(j, 0.15);
  return s;
}

void CanonicalSkeleton::validate() const {
  for (int j = 1; j < kJointCount; ++j) {
    if (!(bone_length[j] > 0.0) || !std::isfinite(bone_length[j])) {
      throw ValidationError("canonical bone length for " + std::string(kJointNames[j]) +
                            " must be positive");
    }
  }
}

Eigen::Vector3d rest_direction(Joint child) {
  using V = Eigen::Vector3d;
  switch (child) {
    case Joint::LShoulder: return V(1.0, 0.15, 0.0).normalized();
    case Joint::RShoulder: return V(-1.0, 0.15, 0.0).normalized();
    case Joint::LUpperleg: return V(1.0, -0.45, 0.0).normalized();
    case Joint::RUpperleg: return V(-1.0, -0.45, 0.0).normalized();
    case Joint::LArm:
    case Joint::LForearm:
    case Joint::LHand:
    case Joint::RArm:
    case Joint::RForearm:
    case Joint::RHand:
    case Joint::LLeg:
    case Joint::LFoot:
    case Joint::RLeg:
    case Joint::RFoot: return V(0.0, -1.0, 0.0);
    case Joint::LFootEnd:
    case Joint::RFootEnd: return V(0.0, 0.0, 1.0);
    default: return V(0.0, 1.0, 0.0);
  }
}

}  // namespace ubiphysio
