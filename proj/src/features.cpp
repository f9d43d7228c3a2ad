#include "ubiphysio/features.hpp"

#include <cmath>
#include <numbers>

#include "ubiphysio/binary_io.hpp"
#include "ubiphysio/errors.hpp"
#include "ubiphysio/file_util.hpp"
#include "ubiphysio/preprocess.hpp"

namespace ubiphysio {

namespace layout {

const std::vector<Slice>& slices() {
  static const std::vector<Slice> kSlices = {
      {"baseline", 0, kBaseline},
      {"root", kRootBegin, kRoot},
      {"rel_pos", kRelPosBegin, kRelPos},
      {"rot6d", kRot6dBegin, kRot6d},
      {"velocity", kVelBegin, kVel},
      {"foot_contact", kContactBegin, kContact},
      {"biomech", kBaseline, kBiomech},
      {"BB_upper", kBaseline + kBBBegin, 1},
      {"BB_lower", kBaseline + kBBBegin + 1, 1},
      {"IJA", kBaseline + kIJABegin, kIJA},
      {"ILA", kBaseline + kILABegin, kILA},
      {"IJD", kBaseline + kIJDBegin, kIJD},
      {"IJR", kBaseline + kIJRBegin, kIJR},
  };
  return kSlices;
}

const Slice& slice(std::string_view name) {
  for (const auto& s : slices()) {
    if (s.name == name) return s;
  }
  throw NotFoundError("no feature slice named '" + std::string(name) + "'");
}

}  // namespace layout

double inter_joint_angle(const Eigen::Vector3d& a, const Eigen::Vector3d& b, const Eigen::Vector3d& c,
                         bool* degenerate) {
  Eigen::Vector3d ab = b - a;
  Eigen::Vector3d bc = c - b;
  if (ab.squaredNorm() == 0.0 || bc.squaredNorm() == 0.0) {
    if (degenerate) *degenerate = true;
    return 0.0;
  }
  return std::atan2(ab.cross(bc).norm(), ab.dot(bc));
}

double inter_line_angle(const Eigen::Vector3d& a, const Eigen::Vector3d& b, const Eigen::Vector3d& c,
                        const Eigen::Vector3d& d, bool* degenerate) {
  Eigen::Vector3d ab = b - a;
  Eigen::Vector3d cd = d - c;
  if (ab.squaredNorm() == 0.0 || cd.squaredNorm() == 0.0) {
    if (degenerate) *degenerate = true;
    return 0.0;
  }
  return std::atan2(ab.cross(cd).norm(), ab.dot(cd));
}

BiomechResult biomech_features(const JointPositions& pose) {
  using J = Joint;
  auto p = [&](J j) -> Eigen::Vector3d { return pose.col(idx(j)); };
  auto dist = [&](J a, J b) { return (p(a) - p(b)).norm(); };

  BiomechResult r;
  bool deg = false;
  auto ija = [&](J a, J b, J c) { return inter_joint_angle(p(a), p(b), p(c), &deg); };

  auto& v = r.values;
  v[0] = dist(J::LForearm, J::Spine2) - dist(J::RForearm, J::Spine2);
  v[1] = dist(J::LFoot, J::Hip) - dist(J::RFoot, J::Hip) + dist(J::LLeg, J::Hip) - dist(J::RLeg, J::Hip);

  int k = layout::kIJABegin;
  v[k++] = ija(J::LShoulder, J::Spine2, J::Spine1);
  v[k++] = ija(J::RShoulder, J::Spine2, J::Spine1);
  v[k++] = ija(J::Spine2, J::Spine1, J::Spine);
  v[k++] = ija(J::Spine1, J::Spine, J::Hip);
  v[k++] = ija(J::Spine1, J::Hip, J::LUpperleg);
  v[k++] = ija(J::Spine1, J::Hip, J::RUpperleg);
  v[k++] = ija(J::Spine1, J::Hip, J::LLeg);
  v[k++] = ija(J::Spine1, J::Hip, J::RLeg);
  v[k++] = ija(J::LUpperleg, J::LLeg, J::LFoot);
  v[k++] = ija(J::RUpperleg, J::RLeg, J::RFoot);
  v[k++] = ija(J::LShoulder, J::Spine2, J::Hip);
  v[k++] = ija(J::RShoulder, J::Spine2, J::Hip);
  v[k++] = ija(J::LShoulder, J::Hip, J::RShoulder);
  v[k++] = ija(J::LLeg, J::LFoot, J::LFootEnd);
  v[k++] = ija(J::RLeg, J::RFoot, J::RFootEnd);

  v[layout::kILABegin] =
      inter_line_angle(p(J::LShoulder), p(J::RShoulder), p(J::LUpperleg), p(J::RUpperleg), &deg);

  k = layout::kIJDBegin;
  v[k++] = dist(J::LShoulder, J::Hip);
  v[k++] = dist(J::RShoulder, J::Hip);
  v[k++] = dist(J::Hip, J::LFoot);
  v[k++] = dist(J::Hip, J::RFoot);
  v[k++] = dist(J::LForearm, J::LLeg);
  v[k++] = dist(J::LForearm, J::RLeg);
  v[k++] = dist(J::RForearm, J::LLeg);
  v[k++] = dist(J::RForearm, J::RLeg);

  auto ratio = [&](double num, double den) {
    if (den == 0.0) {
      deg = true;
      return 1.0;
    }
    return num / den;
  };
  k = layout::kIJRBegin;
  v[k++] = ratio(dist(J::LForearm, J::RLeg), dist(J::LForearm, J::LLeg));
  v[k++] = ratio(dist(J::RForearm, J::LLeg), dist(J::RForearm, J::RLeg));

  r.degenerate = deg;
  return r;
}

namespace {

double wrap_angle(double a) {
  constexpr double kPi = std::numbers::pi;
  while (a > kPi) a -= 2.0 * kPi;
  while (a < -kPi) a += 2.0 * kPi;
  return a;
}

Eigen::Vector3d project_out(const Eigen::Vector3d& v, const Eigen::Vector3d& unit) {
  return v - v.dot(unit) * unit;
}

// Second axis of a bone frame: the parent bone direction made orthogonal to
// the bone, blended with small amounts of the forward and up axes so the
// frame stays defined (and continuous) when the two bones are collinear.
Eigen::Vector3d secondary_axis(const Eigen::Vector3d& bone, const Eigen::Vector3d& parent_bone) {
  Eigen::Vector3d r = project_out(parent_bone, bone) + 0.1 * project_out(Eigen::Vector3d::UnitZ(), bone) +
                      0.01 * project_out(Eigen::Vector3d::UnitY(), bone);
  double n = r.norm();
  if (n < 1e-12) {
    r = project_out(Eigen::Vector3d::UnitX(), bone);
    n = r.norm();
  }
  return r / n;
}

}  // namespace

Eigen::MatrixXd baseline_features(const MotionSequence& seq, const ContactThresholds& contact) {
  seq.validate();
  const int T = seq.size();
  if (T < 2) throw InsufficientFramesError("baseline features need at least 2 frames");

  // Heading per frame; frames without a horizontal facing reuse the last one.
  std::vector<double> heading(T, 0.0);
  std::optional<double> last;
  for (int t = 0; t < T; ++t) {
    auto f = facing_direction(seq.frames[t].positions);
    if (f) last = std::atan2(f->x(), f->z());
    heading[t] = last.value_or(0.0);
  }
  if (!facing_direction(seq.frames[0].positions)) {
    // Back-fill leading frames from the first frame that has a heading.
    for (int t = 0; t < T; ++t) {
      if (facing_direction(seq.frames[t].positions)) {
        for (int s = 0; s < t; ++s) heading[s] = heading[t];
        break;
      }
    }
  }

  constexpr int kFeet[4] = {idx(Joint::LFoot), idx(Joint::LFootEnd), idx(Joint::RFoot), idx(Joint::RFootEnd)};
  double floor = std::numeric_limits<double>::infinity();
  for (const auto& fr : seq.frames) {
    for (int j : kFeet) floor = std::min(floor, fr.positions(1, j));
  }

  Eigen::MatrixXd out(T, layout::kBaseline);
  for (int t = 0; t < T; ++t) {
    // Finite differences: backward, forward difference at t = 0.
    const int prev = t == 0 ? 0 : t - 1;
    const int cur = t == 0 ? 1 : t;
    const auto& P = seq.frames[t].positions;
    const auto& Pa = seq.frames[prev].positions;
    const auto& Pb = seq.frames[cur].positions;
    Eigen::Matrix3d to_local = Eigen::AngleAxisd(-heading[t], Eigen::Vector3d::UnitY()).toRotationMatrix();
    auto row = out.row(t);

    Eigen::Vector3d root_vel = to_local * (Pb.col(0) - Pa.col(0));
    row[layout::kRootBegin + 0] = wrap_angle(heading[cur] - heading[prev]);
    row[layout::kRootBegin + 1] = root_vel.x();
    row[layout::kRootBegin + 2] = root_vel.z();
    row[layout::kRootBegin + 3] = P(1, 0);

    Eigen::Matrix<double, 3, kJointCount> local = to_local * (P.colwise() - P.col(0));
    for (int j = 1; j < kJointCount; ++j) {
      row.segment<3>(layout::kRelPosBegin + 3 * (j - 1)) = local.col(j).transpose();

      Eigen::Vector3d bone = (local.col(j) - local.col(kParent[j])).normalized();
      Eigen::Vector3d parent_bone = Eigen::Vector3d::Zero();
      if (kParent[j] != 0) {
        parent_bone = (local.col(kParent[j]) - local.col(kParent[kParent[j]])).normalized();
      }
      Eigen::Vector3d second = secondary_axis(bone, parent_bone);
      row.segment<3>(layout::kRot6dBegin + 6 * (j - 1)) = bone.transpose();
      row.segment<3>(layout::kRot6dBegin + 6 * (j - 1) + 3) = second.transpose();
    }

    Eigen::Matrix<double, 3, kJointCount> vel = to_local * (Pb - Pa);
    for (int j = 0; j < kJointCount; ++j) {
      row.segment<3>(layout::kVelBegin + 3 * j) = vel.col(j).transpose();
    }

    for (int c = 0; c < 4; ++c) {
      int j = kFeet[c];
      bool still = std::abs(Pb(1, j) - Pa(1, j)) < contact.max_vertical_speed;
      bool low = P(1, j) - floor < contact.max_height;
      row[layout::kContactBegin + c] = (still && low) ? 1.0 : 0.0;
    }
  }
  return out;
}

FeatureMatrix extract(const MotionSequence& seq, const ContactThresholds& contact) {
  FeatureMatrix m;
  m.sample_rate = seq.sample_rate;
  m.values.resize(seq.size(), layout::kTotal);
  m.values.leftCols(layout::kBaseline) = baseline_features(seq, contact);
  for (int t = 0; t < seq.size(); ++t) {
    m.values.row(t).tail(layout::kBiomech) = biomech_features(seq.frames[t].positions).values.transpose();
  }
  return m;
}

FeatureStats fit_stats(const std::vector<FeatureMatrix>& train) {
  if (train.empty()) throw ValidationError("fit_stats needs at least one feature matrix");
  const int D = static_cast<int>(train.front().values.cols());
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(D);
  long n = 0;
  for (const auto& m : train) {
    if (m.values.cols() != D) throw ShapeError("feature width mismatch in fit_stats");
    sum += m.values.colwise().sum().transpose();
    n += m.values.rows();
  }
  if (n == 0) throw ValidationError("fit_stats needs at least one frame");
  FeatureStats s;
  s.mean = sum / static_cast<double>(n);
  Eigen::VectorXd sq = Eigen::VectorXd::Zero(D);
  for (const auto& m : train) {
    sq += (m.values.rowwise() - s.mean.transpose()).array().square().colwise().sum().matrix().transpose();
  }
  s.std = (sq / static_cast<double>(n)).cwiseSqrt();
  return s;
}

FeatureMatrix apply_z(const FeatureMatrix& m, const FeatureStats& stats) {
  if (stats.mean.size() != m.values.cols() || stats.std.size() != m.values.cols()) {
    throw ShapeError("feature stats width does not match matrix");
  }
  FeatureMatrix out = m;
  Eigen::RowVectorXd inv = stats.std.cwiseMax(FeatureStats::kStdFloor).cwiseInverse().transpose();
  out.values = (m.values.rowwise() - stats.mean.transpose()).array().rowwise() * inv.array();
  return out;
}

namespace {
constexpr char kFeatureMagic[4] = {'U', 'B', 'P', 'F'};
}

std::string write_feature_binary(const FeatureMatrix& m) {
  std::string out;
  binio::put_bytes(out, std::string_view(kFeatureMagic, 4));
  binio::put<std::uint32_t>(out, 1);
  binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(m.values.cols()));
  binio::put<float>(out, static_cast<float>(m.sample_rate));
  binio::put<std::uint64_t>(out, static_cast<std::uint64_t>(m.values.rows()));
  for (Eigen::Index t = 0; t < m.values.rows(); ++t) {
    for (Eigen::Index c = 0; c < m.values.cols(); ++c) binio::put<float>(out, static_cast<float>(m.values(t, c)));
  }
  return out;
}

FeatureMatrix parse_feature_binary(const std::string& bytes) {
  binio::Reader r(bytes);
  if (r.bytes(4) != std::string_view(kFeatureMagic, 4)) throw ParseError("bad feature magic");
  if (r.get<std::uint32_t>() != 1) throw ParseError("unsupported feature version");
  auto width = r.get<std::uint32_t>();
  if (width != layout::kTotal) throw ParseError("feature_count must be 315");
  FeatureMatrix m;
  m.sample_rate = r.get<float>();
  auto rows = r.get<std::uint64_t>();
  if (r.remaining() != rows * width * sizeof(float)) throw ParseError("feature payload size mismatch");
  m.values.resize(static_cast<Eigen::Index>(rows), width);
  for (Eigen::Index t = 0; t < m.values.rows(); ++t) {
    for (Eigen::Index c = 0; c < m.values.cols(); ++c) m.values(t, c) = r.get<float>();
  }
  return m;
}

void save_features(const FeatureMatrix& m, const std::filesystem::path& path) {
  write_file(path, write_feature_binary(m));
}

FeatureMatrix load_features(const std::filesystem::path& path) {
  return parse_feature_binary(read_file(path));
}

}  // namespace ubiphysio
