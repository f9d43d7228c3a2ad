#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ubiphysio/kv.hpp"
#include "ubiphysio/nn/core.hpp"

namespace ubiphysio {

struct NamedTensor {
  std::string name;
  Eigen::MatrixXf value;
};

// Model container: 4-byte magic, u32 version, u32 length + key=value config
// text, u32 tensor count, then per tensor u32 name length, name, u32 rows,
// u32 cols and rows*cols little-endian f32 in column-major order.
struct TensorFile {
  std::string magic;
  std::uint32_t version = 1;
  KvMap config;
  std::vector<NamedTensor> tensors;

  const Eigen::MatrixXf& get(const std::string& name) const;
  bool has(const std::string& name) const;
  void add(const std::string& name, const Eigen::MatrixXf& value) { tensors.push_back({name, value}); }
};

std::string write_tensor_file(const TensorFile& f);
// Throws ParseError on a magic mismatch or truncated data.
TensorFile parse_tensor_file(const std::string& bytes, const std::string& expected_magic);
void save_tensor_file(const TensorFile& f, const std::filesystem::path& path);
TensorFile load_tensor_file(const std::filesystem::path& path, const std::string& expected_magic);

// Stores each param under its own name.
void store_params(TensorFile& f, const std::vector<nn::Param<float>*>& params);
// Copies tensors back by name; throws NotFoundError / ShapeError.
void restore_params(const TensorFile& f, const std::vector<nn::Param<float>*>& params);

}  // namespace ubiphysio
