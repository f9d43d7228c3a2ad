#include <doctest.h>

#include <cmath>
#include <numbers>

#include "helpers.hpp"
#include "ubiphysio/errors.hpp"
#include "ubiphysio/motion.hpp"
#include "ubiphysio/preprocess.hpp"
#include "ubiphysio/synth.hpp"

using namespace ubiphysio;

namespace {

MotionSequence random_sequence(int frames, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<JointPositions> poses;
  for (int t = 0; t < frames; ++t) poses.push_back(testutil::random_pose(rng));
  return MotionSequence::from_positions(std::move(poses), 60.0);
}

Eigen::Matrix3d yaw(double a) { return Eigen::AngleAxisd(a, Eigen::Vector3d::UnitY()).toRotationMatrix(); }

}  // namespace

TEST_SUITE("skeleton") {
  TEST_CASE("joint names round trip and mirror table is an involution") {
    for (int j = 0; j < kJointCount; ++j) {
      auto name = joint_name(static_cast<Joint>(j));
      REQUIRE(joint_from_name(name).has_value());
      CHECK(idx(*joint_from_name(name)) == j);
      CHECK(kMirror[kMirror[j]] == j);
      if (j > 0) CHECK(kParent[j] < j);
    }
    CHECK_FALSE(joint_from_name("tail").has_value());
  }

  TEST_CASE("standard skeleton is symmetric with positive bones") {
    auto s = CanonicalSkeleton::standard();
    CHECK_NOTHROW(s.validate());
    for (int j = 1; j < kJointCount; ++j) {
      CHECK(s.bone_length[j] > 0.0);
      CHECK(s.bone_length[j] == doctest::Approx(s.bone_length[kMirror[j]]));
    }
  }
}

TEST_SUITE("motion") {
  TEST_CASE("CSV and binary pose files round trip") {
    auto seq = random_sequence(12, 1);
    auto csv = parse_pose_csv(write_pose_csv(seq));
    auto bin = parse_pose_binary(write_pose_binary(seq));
    REQUIRE(csv.size() == 12);
    REQUIRE(bin.size() == 12);
    double csv_err = 0.0, bin_err = 0.0;
    for (int t = 0; t < 12; ++t) {
      csv_err = std::max(csv_err, (csv.frames[t].positions - seq.frames[t].positions).cwiseAbs().maxCoeff());
      bin_err = std::max(bin_err, (bin.frames[t].positions - seq.frames[t].positions).cwiseAbs().maxCoeff());
      CHECK(bin.frames[t].timestamp == doctest::Approx(seq.frames[t].timestamp));
    }
    CHECK(csv_err < 1e-9);
    CHECK(bin_err < 1e-6);
    CHECK(bin.sample_rate == doctest::Approx(60.0));

    auto dir = testutil::temp_dir("motion_io");
    save_sequence(seq, dir / "a.csv");
    save_sequence(seq, dir / "a.bin");
    CHECK(load_sequence(dir / "a.csv").size() == 12);
    CHECK(load_sequence(dir / "a.bin").size() == 12);
  }

  TEST_CASE("corrupt inputs are rejected") {
    auto seq = random_sequence(3, 2);
    auto bytes = write_pose_binary(seq);
    CHECK_THROWS_AS(parse_pose_binary(bytes.substr(0, bytes.size() - 1)), ParseError);
    std::string bad = bytes;
    bad[0] = 'X';
    CHECK_THROWS_AS(parse_pose_binary(bad), ParseError);
    CHECK_THROWS_AS(parse_pose_csv("timestamp,hip_x\n0,1\n"), ParseError);

    seq.frames[1].positions(0, 0) = std::nan("");
    try {
      seq.validate();
      FAIL("NaN accepted");
    } catch (const ParseError& e) {
      CHECK(e.frame() == 1);
    }
    auto back = random_sequence(3, 2);
    back.frames[2].timestamp = back.frames[1].timestamp;
    CHECK_THROWS_AS(back.validate(), ParseError);
  }

  TEST_CASE("annotations round trip") {
    auto dir = testutil::temp_dir("annotations");
    std::vector<Annotation> anns = {{17, {4, 10}, 0, 120}, {20, {}, 130, 400}};
    save_annotations(anns, dir / "a.jsonl");
    auto back = load_annotations(dir / "a.jsonl");
    REQUIRE(back.size() == 2);
    CHECK(back[0].patterns == std::set<int>{4, 10});
    CHECK(back[1].offset == 400);
  }
}

TEST_SUITE("preprocess") {
  TEST_CASE("skeleton normalization imposes canonical bone lengths and keeps directions") {
    auto seq = random_sequence(4, 5);
    auto canon = CanonicalSkeleton::standard();
    auto out = normalize_skeleton(seq, canon);
    for (int t = 0; t < 4; ++t) {
      const auto& p = out.frames[t].positions;
      const auto& q = seq.frames[t].positions;
      CHECK((p.col(0) - q.col(0)).norm() < 1e-12);
      for (int j = 1; j < kJointCount; ++j) {
        Eigen::Vector3d bone = p.col(j) - p.col(kParent[j]);
        Eigen::Vector3d src = q.col(j) - q.col(kParent[j]);
        CHECK(bone.norm() == doctest::Approx(canon.bone_length[j]));
        CHECK(bone.normalized().dot(src.normalized()) == doctest::Approx(1.0));
      }
    }
  }

  TEST_CASE("zero-length bone is a degenerate pose") {
    auto seq = random_sequence(2, 6);
    seq.frames[1].positions.col(idx(Joint::LHand)) = seq.frames[1].positions.col(idx(Joint::LForearm));
    CHECK_THROWS_AS(normalize_skeleton(seq, CanonicalSkeleton::standard()), DegeneratePoseError);
  }

  TEST_CASE("facing rotation brings the first frame to face +z for any yaw") {
    SynthSpec spec;
    spec.action_type = 9;
    spec.duration_s = 0.5;
    auto base = synthesize_action(spec).motion;
    for (double a : {0.0, 0.7, 2.0, -2.9}) {
      MotionSequence turned = base;
      for (auto& f : turned.frames) f.positions = yaw(a) * f.positions;
      auto out = rotate_to_z_plus(turned);
      auto dir = facing_direction(out.frames[0].positions);
      REQUIRE(dir.has_value());
      CHECK(dir->z() == doctest::Approx(1.0));
      CHECK(std::abs(dir->x()) < 1e-9);
    }
  }

  TEST_CASE("segmentation passes short instances and cuts long ones into 15 s windows") {
    auto seq = random_sequence(60 * 80, 8);
    std::vector<Annotation> anns = {
        {9, {}, 0, 60 * 20},                  // exactly 20 s: kept whole
        {9, {}, 60 * 20, 60 * 60},            // 40 s: 15 + 15 + 10
        {9, {}, 60 * 60 + 1, 60 * 60 + 1 + 60 * 16},  // 16 s: kept whole
    };
    auto out = segment_instances(seq, anns);
    REQUIRE(out.size() == 5);
    CHECK(out[0].motion.size() == 1200);
    CHECK(out[1].motion.size() == 900);
    CHECK(out[2].motion.size() == 900);
    CHECK(out[3].motion.size() == 600);
    CHECK(out[4].motion.size() == 960);

    std::vector<Annotation> tail = {{9, {}, 0, 60 * 31}};  // 15 + 15 + 1 s: short tail dropped
    CHECK(segment_instances(seq, tail).size() == 2);
    std::vector<Annotation> overlap = {{9, {}, 0, 100}, {9, {}, 50, 150}};
    CHECK_THROWS_AS(segment_instances(seq, overlap), ValidationError);
    std::vector<Annotation> wrong = {{9, {1}, 0, 100}};
    CHECK_THROWS_AS(segment_instances(seq, wrong), ValidationError);
  }

  TEST_CASE("17-joint input is completed to 24 joints") {
    Sequence17 s;
    Rng rng(11);
    Pose17 p;
    for (int j = 0; j < 17; ++j)
      for (int a = 0; a < 3; ++a) p(a, j) = rng.uniform(-1, 1);
    s.frames = {p, p};
    ExtremityLengths len;
    auto out = convert_17_to_24(s, len);
    REQUIRE(out.size() == 2);
    const auto& q = out.frames[0].positions;
    for (int j = 0; j < 17; ++j) CHECK((q.col(idx(kJoints17[j])) - p.col(j)).norm() < 1e-12);
    auto col = [&](Joint j) -> Eigen::Vector3d { return q.col(idx(j)); };
    CHECK((col(Joint::Neck1) - 0.5 * (col(Joint::Neck) + col(Joint::Head))).norm() < 1e-12);
    CHECK((col(Joint::Spine) - 0.5 * (col(Joint::Hip) + col(Joint::Spine1))).norm() < 1e-12);
    CHECK((col(Joint::LHand) - col(Joint::LForearm)).norm() == doctest::Approx(len.l_hand));
    Eigen::Vector3d e = extrapolate_joint(Eigen::Vector3d(1, 0, 0), Eigen::Vector3d(1, 2, 0), 0.5);
    CHECK((e - Eigen::Vector3d(1, 0.5, 0)).norm() < 1e-12);
  }
}
