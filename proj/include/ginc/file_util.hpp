#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace ginc {

// Writes `content` to a temporary sibling and renames it over `path`.
// Throws IoError naming the path.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

std::string read_file(const std::filesystem::path& path);

// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::filesystem::path& path);

}  // namespace ginc
