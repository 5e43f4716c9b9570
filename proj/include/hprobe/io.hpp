#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace hprobe {

/// Writes to a sibling temp file, then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);
std::string read_file(const std::filesystem::path& path);
/// Non-empty lines, without trailing '\r'.
std::vector<std::string> read_lines(const std::filesystem::path& path);

// Exclusive advisory lock on a lock file; released on destruction.
class FileLock {
 public:
  explicit FileLock(const std::filesystem::path& lock_path);
  ~FileLock();
  FileLock(const FileLock&) = delete;
  FileLock& operator=(const FileLock&) = delete;

 private:
  int fd_ = -1;
};

}  // namespace hprobe
