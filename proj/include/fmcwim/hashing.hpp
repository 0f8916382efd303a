#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>

namespace fmcwim {

// Lower-case hex SHA-256.
std::string sha256_hex(std::span<const std::byte> data);
std::string sha256_hex(std::string_view text);
// Throws IoError when the file cannot be read.
std::string sha256_file(const std::filesystem::path& path);

} // namespace fmcwim
