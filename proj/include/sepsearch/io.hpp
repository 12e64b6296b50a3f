#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace sepsearch {

/// Writes `contents` to a sibling temp file, then renames it over `path`.
/// A reader never observes a partially written destination.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

/// Reads a whole file; throws IoFailure when it cannot be opened.
std::string read_file(const std::filesystem::path& path);

} // namespace sepsearch
