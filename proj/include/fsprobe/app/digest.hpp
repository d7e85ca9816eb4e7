#pragma once

#include <filesystem>
#include <string>

namespace fsprobe::app {

/// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);
std::string sha256_hex(const std::string& bytes);

}  // namespace fsprobe::app
