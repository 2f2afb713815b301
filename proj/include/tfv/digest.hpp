#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace tfv {

/// Lowercase hex SHA-256 of `data`.
std::string sha256_hex(std::string_view data);

/// First 16 hex characters of the SHA-256; used for content-addressed ids.
std::string short_digest(std::string_view data);

std::string base64_encode(std::string_view data);

std::string read_file_bytes(const std::filesystem::path& path);

/// Writes to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

}  // namespace tfv
