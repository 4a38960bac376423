#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace gskgc {

std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::filesystem::path& path);

/// Writes to a sibling temp file, then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

std::string read_file(const std::filesystem::path& path);

/// Non-empty lines of a file, CR stripped.
std::vector<std::string> read_lines(const std::filesystem::path& path);

/// Header records in our JSONL files carry this key and are skipped by readers.
inline constexpr std::string_view kMetaKey = "_meta";

}  // namespace gskgc
