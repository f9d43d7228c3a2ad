#pragma once

#include <filesystem>
#include <string>

namespace ubiphysio {

std::string read_file(const std::filesystem::path& path);

// Creates parent directories as needed.
void write_file(const std::filesystem::path& path, const std::string& data);

}  // namespace ubiphysio
