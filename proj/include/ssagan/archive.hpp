#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace ssagan::archive {

struct Entry {
  std::string name;  // at most 100 bytes
  std::string bytes;
};

/// Plain POSIX ustar, regular files only, fixed zero timestamps so equal
/// contents give equal archives.
void write_tar(const std::filesystem::path& path, const std::vector<Entry>& entries);
std::vector<Entry> read_tar(const std::filesystem::path& path);

}  // namespace ssagan::archive
