#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "ubiphysio/motion.hpp"

namespace ubiphysio {

// Per-frame feature layout. The baseline block follows the common
// motion-language layout for a 24-joint skeleton; the biomechanical block
// holds the 28 clinically motivated quantities.
namespace layout {
inline constexpr int kRoot = 4;                          // yaw rate, vx, vz, root height
inline constexpr int kRelPos = 3 * kBoneCount;           // root-relative joint positions
inline constexpr int kRot6d = 6 * kBoneCount;            // continuous 6D bone frames
inline constexpr int kVel = 3 * kJointCount;             // per-frame joint displacement
inline constexpr int kContact = 4;                       // l_foot, l_foot_end, r_foot, r_foot_end

inline constexpr int kRootBegin = 0;
inline constexpr int kRelPosBegin = kRootBegin + kRoot;
inline constexpr int kRot6dBegin = kRelPosBegin + kRelPos;
inline constexpr int kVelBegin = kRot6dBegin + kRot6d;
inline constexpr int kContactBegin = kVelBegin + kVel;
inline constexpr int kBaseline = kContactBegin + kContact;

inline constexpr int kBB = 2;
inline constexpr int kIJA = 15;
inline constexpr int kILA = 1;
inline constexpr int kIJD = 8;
inline constexpr int kIJR = 2;
inline constexpr int kBiomech = kBB + kIJA + kILA + kIJD + kIJR;

inline constexpr int kBBBegin = 0;
inline constexpr int kIJABegin = kBBBegin + kBB;
inline constexpr int kILABegin = kIJABegin + kIJA;
inline constexpr int kIJDBegin = kILABegin + kILA;
inline constexpr int kIJRBegin = kIJDBegin + kIJD;

inline constexpr int kTotal = kBaseline + kBiomech;

static_assert(kRoot + kRelPos + kRot6d + kVel + kContact == 287);
static_assert(kBiomech == 28);
static_assert(kTotal == 315);

// Indices into the IJA block.
inline constexpr int kIJALeftKnee = 8;
inline constexpr int kIJARightKnee = 9;

struct Slice {
  std::string_view name;
  int begin;
  int size;
};

// Named slices over the full 315-wide row (biomech slices are offset by kBaseline).
const std::vector<Slice>& slices();
const Slice& slice(std::string_view name);
}  // namespace layout

using BiomechVector = Eigen::Matrix<double, layout::kBiomech, 1>;

struct BiomechResult {
  BiomechVector values = BiomechVector::Zero();
  // Set when an angle had a zero-length arm (emitted as 0) or a ratio had a
  // zero denominator (emitted as 1).
  bool degenerate = false;
};

// [BB_upper, BB_lower, IJA x15, ILA, IJD x8, IJR x2] for one pose.
BiomechResult biomech_features(const JointPositions& pose);

// Angle between b - a and c - b, in [0, pi].
double inter_joint_angle(const Eigen::Vector3d& a, const Eigen::Vector3d& b, const Eigen::Vector3d& c,
                         bool* degenerate = nullptr);
// Angle between b - a and d - c, in [0, pi].
double inter_line_angle(const Eigen::Vector3d& a, const Eigen::Vector3d& b, const Eigen::Vector3d& c,
                        const Eigen::Vector3d& d, bool* degenerate = nullptr);

struct ContactThresholds {
  double max_vertical_speed = 0.005;  // meters per frame
  double max_height = 0.05;           // meters above the sequence floor
};

// T x 287. Requires T >= 2.
Eigen::MatrixXd baseline_features(const MotionSequence& seq, const ContactThresholds& contact = {});

// T x 315 feature rows.
struct FeatureMatrix {
  Eigen::MatrixXd values;
  double sample_rate = kDefaultSampleRate;

  int frames() const { return static_cast<int>(values.rows()); }
};

FeatureMatrix extract(const MotionSequence& seq, const ContactThresholds& contact = {});

struct FeatureStats {
  Eigen::VectorXd mean;
  Eigen::VectorXd std;

  static constexpr double kStdFloor = 1e-8;
};

FeatureStats fit_stats(const std::vector<FeatureMatrix>& train);
FeatureMatrix apply_z(const FeatureMatrix& m, const FeatureStats& stats);

// "UBPF" container: same framing as the pose binary with feature_count = 315.
std::string write_feature_binary(const FeatureMatrix& m);
FeatureMatrix parse_feature_binary(const std::string& bytes);
void save_features(const FeatureMatrix& m, const std::filesystem::path& path);
FeatureMatrix load_features(const std::filesystem::path& path);

}  // namespace ubiphysio
