#pragma once

#include <string>

namespace wbc::io {

/// Writes `bytes` to `path` atomically: the content goes to a sibling temp
/// file which is then renamed over the target, so readers never observe a
/// half-written artifact.
void write_file_atomic(const std::string& path, const std::string& bytes);

/// Reads an entire file; throws IoError if it cannot be opened.
std::string read_file(const std::string& path);

bool file_exists(const std::string& path);

/// Creates the directory and any missing parents (mkdir -p).
void ensure_directory(const std::string& path);

}  // namespace wbc::io
