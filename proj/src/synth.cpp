#include "ubiphysio/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "ubiphysio/actions.hpp"
#include "ubiphysio/errors.hpp"
#include "ubiphysio/rng.hpp"

namespace ubiphysio {

namespace {

using Eigen::Matrix3d;
using Eigen::Vector3d;

constexpr double kPi = std::numbers::pi;
const Vector3d kDown(0.0, -1.0, 0.0);
const Vector3d kUpV(0.0, 1.0, 0.0);
const Vector3d kFwd(0.0, 0.0, 1.0);

Matrix3d rx(double a) { return Eigen::AngleAxisd(a, Vector3d::UnitX()).toRotationMatrix(); }
Matrix3d ry(double a) { return Eigen::AngleAxisd(a, Vector3d::UnitY()).toRotationMatrix(); }
Matrix3d rz(double a) { return Eigen::AngleAxisd(a, Vector3d::UnitZ()).toRotationMatrix(); }

double smoothstep(double a, double b, double x) {
  double u = std::clamp((x - a) / (b - a), 0.0, 1.0);
  return u * u * (3.0 - 2.0 * u);
}

// 0 -> 1 -> 0 over one cycle.
double cyc(double x) { return 0.5 - 0.5 * std::cos(2.0 * kPi * x); }

struct Traits {
  double scale = 1.0;
  std::array<double, kJointCount> proportion{};
  double tempo = 1.0;  // period multiplier
  double amp = 1.0;
  double kyphosis = 0.0;
  double arm_rest = 0.1;
  double noise = 1.0;
};

Traits draw_traits(std::uint64_t seed) {
  Rng rng(mix_seed(seed ^ 0x5a17ULL));
  Traits t;
  t.scale = rng.uniform(0.9, 1.1);
  for (auto& p : t.proportion) p = rng.uniform(0.97, 1.03);
  t.tempo = rng.uniform(0.85, 1.15);
  t.amp = rng.uniform(0.88, 1.1);
  t.kyphosis = rng.uniform(-0.03, 0.06);
  t.arm_rest = rng.uniform(0.05, 0.16);
  t.noise = rng.uniform(0.7, 1.3);
  return t;
}

struct Ctx {
  double t;
  double dur;
  const Traits& tr;
  const std::set<int>& pats;

  bool has(int p) const { return pats.count(p) > 0; }
  // Cycle count at time t for a nominal period in seconds.
  double cycles(double period) const { return t / (period * tr.tempo); }
};

struct Sample {
  BodyParams p;
  double effort = 0.0;  // 0..1, how far into the movement
};

void stand(const Ctx& c, BodyParams& p) {
  p.arm[0].abd = p.arm[1].abd = c.tr.arm_rest;
  p.arm[0].elbow = p.arm[1].elbow = 0.12;
}

void quadruped(BodyParams& p) {
  p.pitch = kPi / 2;
  for (auto& l : p.leg) {
    l.flex = kPi / 2;
    l.knee = kPi / 2;
    l.ankle = -1.4;
  }
  for (auto& a : p.arm) {
    a.flex = kPi / 2;
    a.abd = 0.05;
  }
  p.neck_flex = -0.25;
}

void supine(BodyParams& p) {
  p.pitch = -kPi / 2;
  for (auto& a : p.arm) a.abd = 0.15;
}

// Seated-leg helper: thigh angle from vertical (forward positive) and knee
// bend given the current pitch.
void seat_legs(BodyParams& p, double thigh, double knee, double ankle) {
  for (auto& l : p.leg) {
    l.flex = thigh + p.pitch;
    l.knee = knee;
    l.ankle = ankle;
  }
}

struct GaitShape {
  double speed;
  double cycle;
  double hip;
  double knee;
  double arm;
  double ankle_bias = 0.0;
};

double gait(const Ctx& c, BodyParams& p, const GaitShape& g) {
  double phi = 2.0 * kPi * c.cycles(g.cycle);
  double s = std::sin(phi);
  double hip_l = g.hip, hip_r = g.hip, knee_r = g.knee;
  if (c.has(27)) {  // shuffling, asymmetric step
    hip_l *= 1.5;
    hip_r *= 0.45;
    knee_r *= 0.3;
  }
  p.leg[0].flex = hip_l * s;
  p.leg[1].flex = -hip_r * s;
  double cl = std::max(0.0, std::cos(phi)), cr = std::max(0.0, -std::cos(phi));
  p.leg[0].knee = 0.08 + g.knee * cl * cl;
  p.leg[1].knee = 0.08 + knee_r * cr * cr;
  p.leg[0].ankle = g.ankle_bias + 0.15 * std::sin(phi + 0.5);
  p.leg[1].ankle = g.ankle_bias - 0.15 * std::sin(phi + 0.5);
  double arm = c.has(29) ? -g.arm : g.arm;
  p.arm[0].flex = -arm * s;
  p.arm[1].flex = arm * s;
  p.root.z() = g.speed * c.t / c.tr.tempo;
  p.spine_rot[1] = 0.04 * s;
  return 0.5 + 0.5 * std::abs(s);
}

Sample sweep_floor(const Ctx& c) {
  Sample o;
  auto& p = o.p;
  stand(c, p);
  double s = std::sin(2.0 * kPi * c.cycles(1.6));
  for (auto& f : p.spine_flex) f = 0.12;
  for (auto& r : p.spine_rot) r = 0.1 * s;
  for (auto& l : p.leg) {
    l.flex = 0.12;
    l.knee = 0.15;
  }
  p.arm[0] = {0.75, 0.1, 0.4 + 0.35 * s, 0.6};
  p.arm[1] = {0.75, 0.1, 0.4 - 0.35 * s, 0.4};
  p.neck_flex = 0.25;
  p.root.z() = 0.12 * c.t;
  o.effort = std::abs(s);
  return o;
}

Sample carry_suitcase(const Ctx& c) {
  Sample o;
  auto& p = o.p;
  stand(c, p);
  o.effort = gait(c, p, {0.9, 1.1, 0.3, 0.55, 0.25});
  p.arm[0] = {0.0, 0.2, 0.0, 0.05};
  for (auto& l : p.spine_lat) l = -0.05;
  if (c.has(2)) {
    for (auto& f : p.spine_flex) f -= 0.1 * smoothstep(0.0, 0.3 * c.dur, c.t);
  }
  return o;
}

Sample pick_up_object(const Ctx& c) {
  Sample o;
  auto& p = o.p;
  stand(c, p);
  double x = c.cycles(3.5);
  double e = cyc(x);
  p.pitch = 0.35 * e;
  for (auto& f : p.spine_flex) f = 0.12 * e;
  seat_legs(p, 1.2 * e - 0.35 * e, 1.3 * e, 0.45 * e);
  for (auto& a : p.arm) {
    a.flex = 1.1 * e;
    a.elbow = 0.3 * e;
  }
  p.neck_flex = 0.2 * e;
  if (c.has(2)) {
    double late = std::max(0.0, std::sin(2.0 * kPi * (x - 0.5)));
    for (auto& f : p.spine_flex) f -= 0.12 * late;
  }
  o.effort = e;
  return o;
}

Sample sit(const Ctx& c, double e, bool sofa) {
  Sample o;
  auto& p = o.p;
  stand(c, p);
  double b = std::sin(kPi * e);
  double thigh = sofa ? 1.55 : 1.45;
  double knee = sofa ? 1.95 : 1.45;
  p.pitch = (sofa ? 0.45 : 0.35) * b - (sofa ? 0.3 : 0.0) * smoothstep(0.7, 1.0, e);
  seat_legs(p, thigh * e, knee * e, 0.3 * b);
  for (auto& f : p.spine_flex) f = 0.05 * e;
  for (auto& a : p.arm) {
    a.flex = 0.4 * b + (sofa ? 0.15 : 0.35) * e;
    a.elbow = 0.3 + (sofa ? 0.2 : 0.9) * e;
  }
  o.effort = b;
  return o;
}

Sample sit_chair(const Ctx& c) { return sit(c, smoothstep(0.15 * c.dur, 0.75 * c.dur, c.t), false); }
Sample sit_sofa(const Ctx& c) { return sit(c, smoothstep(0.15 * c.dur, 0.75 * c.dur, c.t), true); }
Sample stand_up_chair(const Ctx& c) {
  return sit(c, 1.0 - smoothstep(0.25 * c.dur, 0.8 * c.dur, c.t), false);
}

Sample lie(const Ctx& c, double e) {
  Sample o;
  auto& p = o.p;
  stand(c, p);
  double b = std::sin(kPi * e);
  p.pitch = -kPi / 2 * e;
  p.yaw = kPi / 2 * e;
  p.roll = c.has(3) ? 0.0 : -0.7 * b;
  for (auto& l : p.leg) {
    l.flex = 1.4 * (1.0 - e) + p.pitch + kPi / 2 * e;
    l.knee = 1.4 * (1.0 - e);
  }
  p.arm[0].flex = p.arm[1].flex = 0.3 * b;
  p.arm[1].abd = 0.1 + 0.6 * b;
  p.neck_flex = 0.3 * b;
  o.effort = b;
  return o;
}

Sample lie_down_bed(const Ctx& c) { return lie(c, smoothstep(0.2 * c.dur, 0.8 * c.dur, c.t)); }
Sample get_up_bed(const Ctx& c) {
  return lie(c, 1.0 - smoothstep(0.2 * c.dur, 0.8 * c.dur, c.t));
}

Sample walk(const Ctx& c) {
  Sample o;
  stand(c, o.p);
  o.effort = gait(c, o.p, {1.1, 1.05, 0.35, 0.6, 0.3});
  return o;
}

Sample heel_walk(const Ctx& c) {
  Sample o;
  auto& p = o.p;
  stand(c, p);
  o.effort = gait(c, p, {0.55, 1.2, 0.22, 0.2, 0.15, 0.45});
  p.arm[0].abd = p.arm[1].abd = 0.3;
  return o;
}

Sample heel_to_toe_walk(const Ctx& c) {
  Sample o;
  auto& p = o.p;
  stand(c, p);
  o.effort = gait(c, p, {0.3, 1.5, 0.16, 0.3, 0.05});
  p.leg[0].abd = p.leg[1].abd = -0.07;
  p.arm[0].abd = p.arm[1].abd = 0.5;
  p.neck_flex = 0.35;
  return o;
}

Sample kneeling_hand_lift(const Ctx& c) {
  Sample o;
  auto& p = o.p;
  quadruped(p);
  double x = c.cycles(3.0);
  int side = static_cast<int>(std::floor(x)) % 2;
  double e = cyc(x);
  p.arm[side].flex += 1.4 * e;
  p.arm[1 - side].abd += 0.05 * e;
  p.neck_flex -= 0.15 * e;
  o.effort = e;
  return o;
}

Sample kneeling_leg_lift(const Ctx& c) {
  Sample o;
  auto& p = o.p;
  quadruped(p);
  double x = c.cycles(3.2);
  int side = static_cast<int>(std::floor(x)) % 2;
  double e = cyc(x);
  p.leg[side].flex -= 1.65 * e;
  p.leg[side].knee -= (kPi / 2 - 0.1) * e;
  p.leg[side].ankle += 1.0 * e;
  o.effort = e;
  return o;
}

Sample shoulder_wrap(const Ctx& c) {
  Sample o;
  auto& p = o.p;
  stand(c, p);
  double e = cyc(c.cycles(3.5));
  for (auto& a : p.arm) {
    a.flex = 1.3 * e;
    a.horiz = 1.1 * e;
    a.elbow = 0.12 + 1.5 * e;
  }
  p.spine_flex[2] = 0.08 * e;
  o.effort = e;
  return o;
}

Sample leg_lift(const Ctx& c, int side) {
  Sample o;
  auto& p = o.p;
  stand(c, p);
  double e = cyc(c.cycles(2.6));
  p.leg[side].flex = 1.35 * e;
  p.leg[side].knee = 1.4 * e;
  p.leg[side].ankle = 0.2 * e;
  p.arm[0].abd = p.arm[1].abd = 0.3;
  p.shift.x() = (side == 0 ? -0.03 : 0.03) * e;
  o.effort = e;
  return o;
}

Sample left_leg_lift(const Ctx& c) { return leg_lift(c, 0); }
Sample right_leg_lift(const Ctx& c) { return leg_lift(c, 1); }

Sample side_bend(const Ctx& c) {
  Sample o;
  auto& p = o.p;
  stand(c, p);
  double s = std::sin(2.0 * kPi * c.cycles(4.0));
  for (auto& l : p.spine_lat) l = 0.2 * s;
  p.neck_lat = 0.1 * s;
  p.arm[0].abd = c.tr.arm_rest + 0.1 * std::max(0.0, -s);
  p.arm[1].abd = c.tr.arm_rest + 0.1 * std::max(0.0, s);
  o.effort = std::abs(s);
  return o;
}

Sample chest_fly(const Ctx& c) {
  Sample o;
  auto& p = o.p;
  stand(c, p);
  double e = cyc(c.cycles(3.0));
  for (auto& a : p.arm) {
    a.abd = 1.5;
    a.horiz = 1.35 * e;
    a.elbow = 0.35;
  }
  o.effort = e;
  return o;
}

Sample alternating_toe_touch(const Ctx& c) {
  Sample o;
  auto& p = o.p;
  stand(c, p);
  double x = c.cycles(3.2);
  int side = static_cast<int>(std::floor(x)) % 2;  // foot being touched
  double e = cyc(x);
  double dir = side == 0 ? 1.0 : -1.0;
  p.pitch = 0.6 * e;
  for (auto& f : p.spine_flex) f = 0.25 * e;
  for (auto& r : p.spine_rot) r = 0.15 * dir * e;
  for (auto& l : p.leg) {
    l.abd = 0.22;
    l.flex = p.pitch;
    l.knee = 0.08;
  }
  int reach = 1 - side;
  p.arm[reach].flex = 1.35 * e;
  p.arm[reach].horiz = 0.3 * e;
  p.arm[side].abd = c.tr.arm_rest + 1.2 * e;
  o.effort = e;
  return o;
}

Sample squat(const Ctx& c) {
  Sample o;
  auto& p = o.p;
  stand(c, p);
  double e = cyc(c.cycles(3.2));
  double depth = 1.0;
  if (c.has(21)) depth = 1.25;
  if (c.has(22)) depth = 0.5;
  double thigh = 1.45 * depth * e;
  double knee = 1.9 * depth * e;
  p.pitch = (c.has(20) ? 0.12 : 0.55) * depth * e;
  seat_legs(p, thigh, knee, knee - thigh);
  for (auto& a : p.arm) a.flex = 1.4 * e;
  o.effort = e;
  return o;
}

Sample bridge(const Ctx& c) {
  Sample o;
  auto& p = o.p;
  supine(p);
  double e = cyc(c.cycles(4.0));
  p.pitch += 0.55 * e;
  for (auto& l : p.leg) {
    l.flex = 0.9 - 0.55 * e;
    l.knee = 1.8;
    l.ankle = 0.2;
  }
  o.effort = e;
  return o;
}

Sample lunge(const Ctx& c) {
  Sample o;
  auto& p = o.p;
  stand(c, p);
  double x = c.cycles(3.5);
  int front = static_cast<int>(std::floor(x)) % 2;
  double e = cyc(x);
  p.pitch = 0.1 * e;
  p.leg[front] = {1.35 * e + p.pitch, 0.0, 1.45 * e, 0.1 * e};
  p.leg[1 - front] = {-0.35 * e + p.pitch, 0.0, 1.4 * e, -0.6 * e};
  p.root.z() = 0.25 * e;
  p.arm[0].abd = p.arm[1].abd = 0.25;
  o.effort = e;
  return o;
}

Sample trunk_rotation(const Ctx& c) {
  Sample o;
  auto& p = o.p;
  stand(c, p);
  double s = std::sin(2.0 * kPi * c.cycles(4.0));
  double amp = c.has(9) ? 0.25 : 1.0;
  for (auto& r : p.spine_rot) r = 0.22 * s * amp;
  for (auto& a : p.arm) {
    a.flex = 1.35;
    a.horiz = 1.0;
    a.elbow = 1.9;
  }
  if (c.has(9)) p.yaw = 0.5 * s;  // turning the whole body instead
  o.effort = std::abs(s);
  return o;
}

Sample cat_camel(const Ctx& c) {
  Sample o;
  auto& p = o.p;
  quadruped(p);
  double s = std::sin(2.0 * kPi * c.cycles(4.5));
  double amp = c.has(9) ? 0.25 : 1.0;
  for (auto& f : p.spine_flex) f = -0.3 * s * amp;
  p.neck_flex += 0.3 * s * amp;
  o.effort = std::abs(s);
  return o;
}

Sample supine_leg_raise(const Ctx& c) {
  Sample o;
  auto& p = o.p;
  supine(p);
  double x = c.cycles(3.0);
  int side = static_cast<int>(std::floor(x)) % 2;
  double e = cyc(x);
  for (auto& l : p.leg) {
    l.flex = 0.75;
    l.knee = 1.7;
    l.ankle = 0.1;
  }
  p.leg[side].flex += 0.85 * e;
  p.leg[side].knee -= 0.15 * e;
  o.effort = e;
  return o;
}

using Template = Sample (*)(const Ctx&);

constexpr std::array<Template, kActionCount> kTemplates = {
    sweep_floor,       carry_suitcase,    pick_up_object, sit_chair,        sit_sofa,
    stand_up_chair,    lie_down_bed,      get_up_bed,     walk,             heel_walk,
    heel_to_toe_walk,  kneeling_hand_lift, kneeling_leg_lift, shoulder_wrap, left_leg_lift,
    right_leg_lift,    side_bend,         chest_fly,      alternating_toe_touch, squat,
    bridge,            lunge,             trunk_rotation, cat_camel,        supine_leg_raise,
};

// Pattern effects that compose additively with any template. Structural
// patterns (3, 9, 20, 21, 22, 27, 29 and the lifting variant of 2) live in the
// templates themselves.
void apply_patterns(const std::set<int>& pats, double effort, BodyParams& p) {
  double m = 0.6 + 0.4 * effort;
  for (int pat : pats) {
    switch (pat) {
      case 1:
        p.spine_flex[0] += 0.25 * m;
        p.spine_flex[1] += 0.25 * m;
        break;
      case 4:
        for (auto& r : p.spine_rot) r += 0.15 * m;
        break;
      case 5:
        p.shift.x() += 0.07 * m;
        break;
      case 6:
        for (auto& f : p.spine_flex) f -= 0.12 * m;
        break;
      case 7:
        p.neck_lat += 0.35 * m;
        break;
      case 8:
        for (auto& l : p.leg) l.ankle -= 0.45 * m;
        p.pitch += 0.1 * m;
        break;
      case 10:
        for (auto& l : p.leg) l.knee += 0.45 * m;
        break;
      case 11:
        p.spine_flex[0] -= 0.25 * m;
        p.pitch += 0.12 * m;
        break;
      case 12:
        p.spine_flex[0] -= 0.2 * m;
        p.spine_flex[1] -= 0.2 * m;
        p.shift.z() += 0.04 * m;
        break;
      case 13:
        for (auto& l : p.spine_lat) l += 0.1 * m;
        break;
      case 14:
        for (auto& l : p.leg) l.flex += 0.35 * m;
        break;
      case 15:
        p.spine_flex[2] += 0.35 * m;
        p.neck_flex += 0.2 * m;
        break;
      case 16:
        p.roll += 0.15 * m;
        break;
      case 17:
        p.spine_lat[0] += 0.2 * m;
        p.spine_lat[1] += 0.2 * m;
        break;
      case 18:
        for (auto& f : p.spine_flex) f += 0.15 * m;
        break;
      case 19:
        for (auto& l : p.leg) {
          l.knee += 0.3 * m;
          l.ankle += 0.3 * m;
          l.abd -= 0.15 * m;
        }
        break;
      case 23:
        p.roll += 0.1 * m;
        for (auto& l : p.spine_lat) l += 0.08 * m;
        break;
      case 24:
        p.spine_flex[2] -= 0.35 * m;
        break;
      case 25:
        for (auto& l : p.leg) l.ankle *= 0.3;
        break;
      case 26:
        p.pitch += 0.25 * m;
        break;
      case 28:
        p.spine_flex[0] -= 0.3 * m;
        break;
      case 30:
        p.neck_flex += 0.5 * m;
        break;
      case 31:
        for (auto& l : p.leg) l.flex += 0.3 * m;
        break;
      case 32:
        for (auto& l : p.leg) l.knee = std::max(0.0, l.knee - 0.6 * m);
        break;
      case 33:
        for (auto& l : p.leg) l.flex -= 0.3 * m;
        p.spine_flex[0] -= 0.25 * m;
        break;
      default:
        break;
    }
  }
}

// Sum of three slow sinusoids per angle channel.
class AngleNoise {
 public:
  static constexpr int kChannels = 30;

  AngleNoise(Rng& rng, double scale) {
    for (auto& ch : waves_) {
      for (auto& w : ch) {
        w.freq = rng.uniform(0.2, 1.5);
        w.phase = rng.uniform(0.0, 2.0 * kPi);
        w.amp = 0.012 * scale * rng.uniform(0.5, 1.5);
      }
    }
  }

  void apply(double t, BodyParams& p) const {
    std::array<double*, kChannels> ch = {
        &p.pitch,         &p.roll,          &p.spine_flex[0], &p.spine_flex[1], &p.spine_flex[2],
        &p.spine_lat[0],  &p.spine_lat[1],  &p.spine_lat[2],  &p.spine_rot[0],  &p.spine_rot[1],
        &p.spine_rot[2],  &p.neck_flex,     &p.neck_lat,      &p.arm[0].flex,   &p.arm[0].abd,
        &p.arm[0].horiz,  &p.arm[0].elbow,  &p.arm[1].flex,   &p.arm[1].abd,    &p.arm[1].horiz,
        &p.arm[1].elbow,  &p.leg[0].flex,   &p.leg[0].abd,    &p.leg[0].knee,   &p.leg[0].ankle,
        &p.leg[1].flex,   &p.leg[1].abd,    &p.leg[1].knee,   &p.leg[1].ankle,  &p.yaw,
    };
    for (int i = 0; i < kChannels; ++i) {
      double v = 0.0;
      for (const auto& w : waves_[i]) v += w.amp * std::sin(2.0 * kPi * w.freq * t + w.phase);
      *ch[i] += v;
    }
  }

 private:
  struct Wave {
    double freq, phase, amp;
  };
  std::array<std::array<Wave, 3>, kChannels> waves_{};
};

void scale_amplitude(BodyParams& p, double a) {
  p.pitch *= a;
  p.roll *= a;
  for (int i = 0; i < 3; ++i) {
    p.spine_flex[i] *= a;
    p.spine_lat[i] *= a;
    p.spine_rot[i] *= a;
  }
  p.neck_flex *= a;
  p.neck_lat *= a;
  for (auto& arm : p.arm) {
    arm.flex *= a;
    arm.abd *= a;
    arm.horiz *= a;
    arm.elbow *= a;
  }
  for (auto& l : p.leg) {
    l.flex *= a;
    l.abd *= a;
    l.knee *= a;
    l.ankle *= a;
  }
}

}  // namespace

JointPositions forward_kinematics(const BodyParams& prm, const CanonicalSkeleton& bones) {
  JointPositions out = JointPositions::Zero();
  auto set = [&](Joint j, const Vector3d& v) { out.col(idx(j)) = v; };
  auto at = [&](Joint j) -> Vector3d { return out.col(idx(j)); };
  auto len = [&](Joint j) { return bones.length(j); };

  const Matrix3d yaw = ry(prm.yaw);
  const Matrix3d body = yaw * rx(prm.pitch) * rz(prm.roll);
  set(Joint::Hip, prm.root + yaw * prm.shift);

  Matrix3d r = body;
  set(Joint::Spine, at(Joint::Hip) + r * kUpV * len(Joint::Spine));
  const std::array<Joint, 3> chain = {Joint::Spine1, Joint::Spine2, Joint::Neck};
  Joint prev = Joint::Spine;
  for (int i = 0; i < 3; ++i) {
    r = r * rx(prm.spine_flex[i]) * rz(-prm.spine_lat[i]) * ry(prm.spine_rot[i]);
    set(chain[i], at(prev) + r * kUpV * len(chain[i]));
    prev = chain[i];
  }
  const Matrix3d thorax = r;

  const Matrix3d neck = thorax * rx(prm.neck_flex) * rz(-prm.neck_lat);
  set(Joint::Neck1, at(Joint::Neck) + neck * kUpV * len(Joint::Neck1));
  set(Joint::Head, at(Joint::Neck1) + neck * kUpV * len(Joint::Head));
  set(Joint::HeadEnd, at(Joint::Head) + neck * kUpV * len(Joint::HeadEnd));

  const std::array<std::array<Joint, 4>, 2> arms = {{
      {Joint::LShoulder, Joint::LArm, Joint::LForearm, Joint::LHand},
      {Joint::RShoulder, Joint::RArm, Joint::RForearm, Joint::RHand},
  }};
  for (int s = 0; s < 2; ++s) {
    const auto& a = prm.arm[s];
    const auto& j = arms[s];
    double sgn = s == 0 ? 1.0 : -1.0;
    set(j[0], at(Joint::Spine2) + thorax * rest_direction(j[0]).normalized() * len(j[0]));
    Matrix3d upper = thorax * ry(-sgn * a.horiz) * rz(sgn * a.abd) * rx(-a.flex);
    set(j[1], at(j[0]) + upper * kDown * len(j[1]));
    Matrix3d fore = upper * rx(-a.elbow);
    set(j[2], at(j[1]) + fore * kDown * len(j[2]));
    set(j[3], at(j[2]) + fore * kDown * len(j[3]));
  }

  const std::array<std::array<Joint, 4>, 2> legs = {{
      {Joint::LUpperleg, Joint::LLeg, Joint::LFoot, Joint::LFootEnd},
      {Joint::RUpperleg, Joint::RLeg, Joint::RFoot, Joint::RFootEnd},
  }};
  for (int s = 0; s < 2; ++s) {
    const auto& l = prm.leg[s];
    const auto& j = legs[s];
    double sgn = s == 0 ? 1.0 : -1.0;
    set(j[0], at(Joint::Hip) + body * rest_direction(j[0]).normalized() * len(j[0]));
    Matrix3d thigh = body * rz(sgn * l.abd) * rx(-l.flex);
    set(j[1], at(j[0]) + thigh * kDown * len(j[1]));
    Matrix3d shank = thigh * rx(l.knee);
    set(j[2], at(j[1]) + shank * kDown * len(j[2]));
    Matrix3d foot = shank * rx(-l.ankle);
    set(j[3], at(j[2]) + foot * kFwd * len(j[3]));
  }
  return out;
}

SynthResult synthesize_action(const SynthSpec& spec) {
  validate_patterns(spec.action_type, spec.patterns);
  if (!(spec.duration_s > 0.0) || !(spec.sample_rate > 0.0)) {
    throw ValidationError("synthetic duration and sample rate must be positive");
  }
  const int frames = std::max(2, static_cast<int>(std::lround(spec.duration_s * spec.sample_rate)));
  const Traits traits = draw_traits(spec.participant_seed.value_or(spec.seed));

  CanonicalSkeleton bones = CanonicalSkeleton::standard();
  for (int j = 1; j < kJointCount; ++j) bones.bone_length[j] *= traits.scale * traits.proportion[j];

  Rng rng(mix_seed(spec.seed) ^ mix_seed(static_cast<std::uint64_t>(spec.action_type)));
  const double yaw0 = rng.uniform(0.0, 2.0 * kPi);
  const Vector3d origin(rng.uniform(-1.0, 1.0), 0.0, rng.uniform(-1.0, 1.0));
  const AngleNoise noise(rng, traits.noise);
  const Matrix3d heading = ry(yaw0);
  const Template tmpl = kTemplates[spec.action_type - 1];
  const double dur = frames / spec.sample_rate;

  std::vector<JointPositions> poses;
  poses.reserve(frames);
  for (int f = 0; f < frames; ++f) {
    double t = f / spec.sample_rate;
    Ctx ctx{t, dur, traits, spec.patterns};
    Sample s = tmpl(ctx);
    BodyParams& p = s.p;
    scale_amplitude(p, traits.amp);
    p.spine_flex[2] += traits.kyphosis;
    apply_patterns(spec.patterns, s.effort, p);
    noise.apply(t, p);
    p.root = origin + heading * p.root;
    p.yaw += yaw0;

    JointPositions pose = forward_kinematics(p, bones);
    pose.row(1).array() -= pose.row(1).minCoeff();
    for (int j = 0; j < kJointCount; ++j) {
      for (int k = 0; k < 3; ++k) pose(k, j) += 0.0003 * rng.normal();
    }
    poses.push_back(pose);
  }

  SynthResult out;
  out.motion = MotionSequence::from_positions(std::move(poses), spec.sample_rate);
  out.annotation.action_type = spec.action_type;
  out.annotation.patterns = spec.patterns;
  out.annotation.onset = 0;
  out.annotation.offset = frames;
  return out;
}

std::vector<std::string> describe_instance(int action_type, const std::set<int>& patterns) {
  const auto& info = action_info(action_type);
  validate_patterns(action_type, patterns);
  std::string label(info.label_text);
  std::string list;
  std::size_t i = 0;
  for (int p : patterns) {
    std::string name(pattern_name(p));
    std::transform(name.begin(), name.end(), name.begin(),
                   [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    if (i > 0) list += (i + 1 == patterns.size()) ? " and " : ", ";
    list += name;
    ++i;
  }
  if (patterns.empty()) {
    return {
        "The person is " + label + " with a steady and controlled movement.",
        "This is " + label + " performed in a correct pattern without compensation.",
        "The movement shows " + label + " with good posture throughout.",
    };
  }
  return {
      "The person is " + label + " with " + list + ".",
      "During " + label + ", the movement shows " + list + ".",
      "This is " + label + ", performed with signs of " + list + ".",
  };
}

std::vector<SynthItem> synthesize_dataset(const SynthDatasetSpec& spec) {
  if (spec.participants < 1 || spec.repeats < 1) throw ValidationError("synthetic dataset needs participants and repeats");
  if (!(spec.min_duration_s > 0.0) || spec.max_duration_s < spec.min_duration_s) {
    throw ValidationError("synthetic dataset durations must satisfy 0 < min <= max");
  }
  std::vector<int> actions = spec.actions;
  if (actions.empty()) {
    for (int a = 1; a <= kActionCount; ++a) actions.push_back(a);
  }
  for (int a : actions) action_info(a);  // range check
  std::vector<SynthItem> out;
  for (int p = 0; p < spec.participants; ++p) {
    const std::uint64_t person_seed = mix_seed(spec.seed * 1000003ULL + static_cast<std::uint64_t>(p));
    for (int a : actions) {
      for (int r = 0; r < spec.repeats; ++r) {
        const std::uint64_t inst_seed = mix_seed(person_seed ^ mix_seed(static_cast<std::uint64_t>(a * 131 + r)));
        Rng rng(inst_seed);
        SynthSpec s;
        s.action_type = a;
        for (int c : action_info(a).candidate_patterns) {
          if (rng.uniform() < spec.pattern_prob) s.patterns.insert(c);
        }
        s.duration_s = rng.uniform(spec.min_duration_s, spec.max_duration_s);
        s.seed = inst_seed;
        s.participant_seed = person_seed;
        s.sample_rate = spec.sample_rate;

        SynthItem item;
        item.participant = fmt::format("p{:03d}", p);
        item.id = fmt::format("{}_a{:02d}_r{}", item.participant, a, r);
        item.data = synthesize_action(s);
        item.descriptions = describe_instance(a, s.patterns);
        out.push_back(std::move(item));
      }
    }
  }
  return out;
}

}  // namespace ubiphysio
