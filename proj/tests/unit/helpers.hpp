#pragma once

#include <filesystem>
#include <string>

#include "ubiphysio/rng.hpp"
#include "ubiphysio/skeleton.hpp"

namespace testutil {

// Joints scattered uniformly in a 2 m cube around the origin.
inline ubiphysio::JointPositions random_pose(ubiphysio::Rng& rng) {
  ubiphysio::JointPositions p;
  for (int j = 0; j < ubiphysio::kJointCount; ++j)
    for (int a = 0; a < 3; ++a) p(a, j) = rng.uniform(-1.0, 1.0);
  return p;
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto d = std::filesystem::temp_directory_path() / ("ubiphysio_test_" + name);
  std::filesystem::remove_all(d);
  std::filesystem::create_directories(d);
  return d;
}

}  // namespace testutil
