#include "ubiphysio/checkpoint.hpp"

#include "ubiphysio/binary_io.hpp"
#include "ubiphysio/errors.hpp"
#include "ubiphysio/file_util.hpp"

namespace ubiphysio {

const Eigen::MatrixXf& TensorFile::get(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return t.value;
  }
  throw NotFoundError("checkpoint has no tensor '" + name + "'");
}

bool TensorFile::has(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return true;
  }
  return false;
}

std::string write_tensor_file(const TensorFile& f) {
  if (f.magic.size() != 4) throw ValidationError("checkpoint magic must be 4 bytes");
  std::string out;
  binio::put_bytes(out, f.magic);
  binio::put<std::uint32_t>(out, f.version);
  std::string cfg = format_kv(f.config);
  binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(cfg.size()));
  binio::put_bytes(out, cfg);
  binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(f.tensors.size()));
  for (const auto& t : f.tensors) {
    binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(t.name.size()));
    binio::put_bytes(out, t.name);
    binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(t.value.rows()));
    binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(t.value.cols()));
    for (Eigen::Index i = 0; i < t.value.size(); ++i) binio::put<float>(out, t.value.data()[i]);
  }
  return out;
}

TensorFile parse_tensor_file(const std::string& bytes, const std::string& expected_magic) {
  binio::Reader r(bytes);
  TensorFile f;
  f.magic = r.bytes(4);
  if (f.magic != expected_magic) {
    throw ParseError("expected a '" + expected_magic + "' checkpoint, found magic '" + f.magic + "'");
  }
  f.version = r.get<std::uint32_t>();
  if (f.version != 1) throw ParseError("unsupported checkpoint version " + std::to_string(f.version));
  auto cfg_len = r.get<std::uint32_t>();
  f.config = parse_kv(std::string(r.bytes(cfg_len)));
  auto count = r.get<std::uint32_t>();
  for (std::uint32_t k = 0; k < count; ++k) {
    NamedTensor t;
    t.name = r.bytes(r.get<std::uint32_t>());
    auto rows = r.get<std::uint32_t>();
    auto cols = r.get<std::uint32_t>();
    if (static_cast<std::uint64_t>(rows) * cols * 4 > r.remaining()) {
      throw ParseError("checkpoint tensor '" + t.name + "' is truncated");
    }
    t.value.resize(rows, cols);
    for (Eigen::Index i = 0; i < t.value.size(); ++i) t.value.data()[i] = r.get<float>();
    f.tensors.push_back(std::move(t));
  }
  if (r.remaining() != 0) throw ParseError("trailing bytes after checkpoint tensors");
  return f;
}

void save_tensor_file(const TensorFile& f, const std::filesystem::path& path) {
  write_file(path, write_tensor_file(f));
}

TensorFile load_tensor_file(const std::filesystem::path& path, const std::string& expected_magic) {
  return parse_tensor_file(read_file(path), expected_magic);
}

void store_params(TensorFile& f, const std::vector<nn::Param<float>*>& params) {
  for (const auto* p : params) f.add(p->name, p->value);
}

void restore_params(const TensorFile& f, const std::vector<nn::Param<float>*>& params) {
  for (auto* p : params) {
    const auto& v = f.get(p->name);
    if (v.rows() != p->value.rows() || v.cols() != p->value.cols()) {
      throw ShapeError("checkpoint tensor '" + p->name + "' has shape " + std::to_string(v.rows()) + "x" +
                       std::to_string(v.cols()) + ", model expects " + std::to_string(p->value.rows()) +
                       "x" + std::to_string(p->value.cols()));
    }
    p->value = v;
  }
}

}  // namespace ubiphysio
