#include "ubiphysio/motion.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "ubiphysio/binary_io.hpp"
#include "ubiphysio/errors.hpp"
#include "ubiphysio/file_util.hpp"

namespace ubiphysio {

namespace {

constexpr char kPoseMagic[4] = {'U', 'B', 'P', 'M'};
constexpr std::uint32_t kPoseVersion = 1;

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(',', start);
    cells.push_back(line.substr(start, pos == std::string_view::npos ? line.npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return cells;
}

double parse_cell(std::string_view cell, long frame) {
  std::string s(cell);
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.pop_back();
  const char* begin = s.c_str();
  char* end = nullptr;
  double v = std::strtod(begin, &end);
  if (s.empty() || end != begin + s.size()) {
    throw ParseError("frame " + std::to_string(frame) + ": malformed value '" + s + "'", frame);
  }
  return v;
}

double infer_rate(const std::vector<PoseFrame>& frames) {
  if (frames.size() < 2) return kDefaultSampleRate;
  double span = frames.back().timestamp - frames.front().timestamp;
  double rate = (frames.size() - 1) / span;
  return std::round(rate * 1000.0) / 1000.0;
}

}  // namespace

void MotionSequence::validate() const {
  if (!(sample_rate > 0.0) || !std::isfinite(sample_rate)) {
    throw ValidationError("sample rate must be positive");
  }
  if (frames.empty()) throw ValidationError("sequence has no frames");
  for (int i = 0; i < size(); ++i) {
    const auto& f = frames[i];
    if (!f.positions.allFinite() || !std::isfinite(f.timestamp)) {
      throw ParseError("frame " + std::to_string(i) + ": non-finite value", i);
    }
    if (i > 0 && !(f.timestamp > frames[i - 1].timestamp)) {
      throw ParseError("frame " + std::to_string(i) + ": timestamps not strictly increasing", i);
    }
  }
}

MotionSequence MotionSequence::slice(int begin, int end) const {
  if (begin < 0 || end > size() || begin >= end) {
    throw ValidationError("invalid slice [" + std::to_string(begin) + ", " + std::to_string(end) + ")");
  }
  MotionSequence out;
  out.sample_rate = sample_rate;
  out.frames.assign(frames.begin() + begin, frames.begin() + end);
  return out;
}

MotionSequence MotionSequence::from_positions(std::vector<JointPositions> poses, double rate) {
  MotionSequence seq;
  seq.sample_rate = rate;
  seq.frames.resize(poses.size());
  for (std::size_t i = 0; i < poses.size(); ++i) {
    seq.frames[i].positions = poses[i];
    seq.frames[i].timestamp = static_cast<double>(i) / rate;
  }
  return seq;
}

PoseFormat format_from_path(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  if (ext == ".csv") return PoseFormat::Csv;
  if (ext == ".bin" || ext == ".ubpm") return PoseFormat::Binary;
  throw ValidationError("cannot infer pose format from extension '" + ext + "'");
}

MotionSequence parse_pose_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty CSV");
  auto header = split_commas(line);
  if (header.size() != 1 + 3 * kJointCount || header[0] != "t") {
    throw ParseError("CSV header must be t,j0x,j0y,j0z,...,j23z");
  }
  MotionSequence seq;
  long frame = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    auto cells = split_commas(line);
    if (cells.size() != header.size()) {
      throw ParseError("frame " + std::to_string(frame) + ": expected " +
                           std::to_string(header.size()) + " columns, got " +
                           std::to_string(cells.size()),
                       frame);
    }
    PoseFrame f;
    f.timestamp = parse_cell(cells[0], frame);
    for (int j = 0; j < kJointCount; ++j) {
      for (int a = 0; a < 3; ++a) f.positions(a, j) = parse_cell(cells[1 + 3 * j + a], frame);
    }
    seq.frames.push_back(f);
    ++frame;
  }
  seq.sample_rate = infer_rate(seq.frames);
  seq.validate();
  return seq;
}

std::string write_pose_csv(const MotionSequence& seq) {
  std::string out = "t";
  for (int j = 0; j < kJointCount; ++j) {
    for (char a : {'x', 'y', 'z'}) out += ",j" + std::to_string(j) + a;
  }
  out += '\n';
  char buf[64];
  for (const auto& f : seq.frames) {
    std::snprintf(buf, sizeof buf, "%.9g", f.timestamp);
    out += buf;
    for (int j = 0; j < kJointCount; ++j) {
      for (int a = 0; a < 3; ++a) {
        std::snprintf(buf, sizeof buf, ",%.9g", f.positions(a, j));
        out += buf;
      }
    }
    out += '\n';
  }
  return out;
}

MotionSequence parse_pose_binary(const std::string& bytes) {
  binio::Reader r(bytes);
  if (r.bytes(4) != std::string_view(kPoseMagic, 4)) throw ParseError("bad pose magic");
  if (r.get<std::uint32_t>() != kPoseVersion) throw ParseError("unsupported pose version");
  if (r.get<std::uint32_t>() != kJointCount) throw ParseError("pose joint_count must be 24");
  float rate = r.get<float>();
  auto count = r.get<std::uint64_t>();
  if (r.remaining() != count * kJointCount * 3 * sizeof(float)) {
    throw ParseError("pose payload size does not match frame_count");
  }
  MotionSequence seq;
  seq.sample_rate = rate;
  seq.frames.resize(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    auto& f = seq.frames[i];
    f.timestamp = static_cast<double>(i) / seq.sample_rate;
    for (int j = 0; j < kJointCount; ++j) {
      for (int a = 0; a < 3; ++a) f.positions(a, j) = r.get<float>();
    }
  }
  seq.validate();
  return seq;
}

std::string write_pose_binary(const MotionSequence& seq) {
  std::string out;
  out.reserve(24 + seq.frames.size() * kJointCount * 3 * sizeof(float));
  binio::put_bytes(out, std::string_view(kPoseMagic, 4));
  binio::put<std::uint32_t>(out, kPoseVersion);
  binio::put<std::uint32_t>(out, kJointCount);
  binio::put<float>(out, static_cast<float>(seq.sample_rate));
  binio::put<std::uint64_t>(out, seq.frames.size());
  for (const auto& f : seq.frames) {
    for (int j = 0; j < kJointCount; ++j) {
      for (int a = 0; a < 3; ++a) binio::put<float>(out, static_cast<float>(f.positions(a, j)));
    }
  }
  return out;
}

MotionSequence load_sequence(const std::filesystem::path& path, PoseFormat format) {
  auto data = read_file(path);
  return format == PoseFormat::Csv ? parse_pose_csv(data) : parse_pose_binary(data);
}

MotionSequence load_sequence(const std::filesystem::path& path) {
  return load_sequence(path, format_from_path(path));
}

void save_sequence(const MotionSequence& seq, const std::filesystem::path& path, PoseFormat format) {
  write_file(path, format == PoseFormat::Csv ? write_pose_csv(seq) : write_pose_binary(seq));
}

void save_sequence(const MotionSequence& seq, const std::filesystem::path& path) {
  save_sequence(seq, path, format_from_path(path));
}

std::vector<Annotation> load_annotations(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  std::vector<Annotation> out;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = nlohmann::json::parse(line);
      Annotation a;
      a.action_type = j.at("action_type").get<int>();
      for (int p : j.value("patterns", std::vector<int>{})) a.patterns.insert(p);
      a.onset = j.at("onset").get<int>();
      a.offset = j.at("offset").get<int>();
      out.push_back(std::move(a));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void save_annotations(const std::vector<Annotation>& anns, const std::filesystem::path& path) {
  std::string out;
  for (const auto& a : anns) {
    nlohmann::json j = {{"action_type", a.action_type},
                        {"patterns", std::vector<int>(a.patterns.begin(), a.patterns.end())},
                        {"onset", a.onset},
                        {"offset", a.offset}};
    out += j.dump() + "\n";
  }
  write_file(path, out);
}

}  // namespace ubiphysio
