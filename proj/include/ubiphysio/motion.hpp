#pragma once

#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "ubiphysio/skeleton.hpp"

namespace ubiphysio {

struct PoseFrame {
  JointPositions positions = JointPositions::Zero();
  double timestamp = 0.0;

  Eigen::Vector3d joint(Joint j) const { return positions.col(idx(j)); }
};

inline constexpr double kDefaultSampleRate = 60.0;

struct MotionSequence {
  std::vector<PoseFrame> frames;
  double sample_rate = kDefaultSampleRate;

  int size() const { return static_cast<int>(frames.size()); }
  double duration() const { return frames.empty() ? 0.0 : size() / sample_rate; }

  // Throws ValidationError on non-finite data, non-increasing timestamps,
  // sample_rate <= 0 or an empty sequence.
  void validate() const;

  // Frames [begin, end) with timestamps kept.
  MotionSequence slice(int begin, int end) const;

  // Builds a sequence with timestamps i / rate.
  static MotionSequence from_positions(std::vector<JointPositions> poses, double rate);
};

struct Annotation {
  int action_type = 0;          // 1..25
  std::set<int> patterns;       // subset of the candidates for action_type
  int onset = 0;                // first frame, inclusive
  int offset = 0;               // last frame, exclusive

  int length() const { return offset - onset; }
};

enum class PoseFormat { Csv, Binary };

PoseFormat format_from_path(const std::filesystem::path& path);

MotionSequence load_sequence(const std::filesystem::path& path, PoseFormat format);
MotionSequence load_sequence(const std::filesystem::path& path);
void save_sequence(const MotionSequence& seq, const std::filesystem::path& path, PoseFormat format);
void save_sequence(const MotionSequence& seq, const std::filesystem::path& path);

// In-memory variants of the pose formats.
MotionSequence parse_pose_csv(const std::string& text);
std::string write_pose_csv(const MotionSequence& seq);
MotionSequence parse_pose_binary(const std::string& bytes);
std::string write_pose_binary(const MotionSequence& seq);

std::vector<Annotation> load_annotations(const std::filesystem::path& path);
void save_annotations(const std::vector<Annotation>& anns, const std::filesystem::path& path);

}  // namespace ubiphysio
