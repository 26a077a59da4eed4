#include "ssagan/archive.hpp"

#include <array>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "ssagan/error.hpp"

namespace ssagan::archive {

namespace {

constexpr std::size_t kBlock = 512;

void put_octal(char* field, std::size_t width, std::uint64_t value) {
  // width-1 digits plus a terminating NUL.
  std::snprintf(field, width, "%0*llo", static_cast<int>(width - 1), static_cast<unsigned long long>(value));
}

std::uint64_t get_octal(const char* field, std::size_t width) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < width && field[i]; ++i) {
    if (field[i] == ' ') continue;
    if (field[i] < '0' || field[i] > '7') throw IoError("corrupt tar header");
    v = v * 8 + static_cast<std::uint64_t>(field[i] - '0');
  }
  return v;
}

unsigned checksum(const std::array<char, kBlock>& h) {
  unsigned sum = 0;
  for (std::size_t i = 0; i < kBlock; ++i) sum += (i >= 148 && i < 156) ? ' ' : static_cast<unsigned char>(h[i]);
  return sum;
}

}  // namespace

void write_tar(const std::filesystem::path& path, const std::vector<Entry>& entries) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  const std::array<char, kBlock> zeros{};
  for (const auto& e : entries) {
    if (e.name.empty() || e.name.size() > 100) throw ContractError("tar entry name must have 1..100 bytes: " + e.name);
    std::array<char, kBlock> h{};
    std::memcpy(h.data(), e.name.data(), e.name.size());
    put_octal(h.data() + 100, 8, 0644);
    put_octal(h.data() + 108, 8, 0);
    put_octal(h.data() + 116, 8, 0);
    put_octal(h.data() + 124, 12, e.bytes.size());
    put_octal(h.data() + 136, 12, 0);
    h[156] = '0';
    std::memcpy(h.data() + 257, "ustar", 6);
    std::memcpy(h.data() + 263, "00", 2);
    std::snprintf(h.data() + 148, 8, "%06o", checksum(h));
    h[155] = ' ';
    out.write(h.data(), kBlock);
    out.write(e.bytes.data(), static_cast<std::streamsize>(e.bytes.size()));
    const std::size_t pad = (kBlock - e.bytes.size() % kBlock) % kBlock;
    out.write(zeros.data(), static_cast<std::streamsize>(pad));
  }
  out.write(zeros.data(), kBlock);
  out.write(zeros.data(), kBlock);
  if (!out) throw IoError("failed writing " + path.string());
}

std::vector<Entry> read_tar(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string all = ss.str();
  std::vector<Entry> entries;
  std::size_t pos = 0;
  while (true) {
    if (pos + kBlock > all.size()) throw IoError("truncated tar archive " + path.string());
    std::array<char, kBlock> h{};
    std::memcpy(h.data(), all.data() + pos, kBlock);
    pos += kBlock;
    bool empty = true;
    for (char c : h) empty = empty && c == 0;
    if (empty) break;
    if (get_octal(h.data() + 148, 8) != checksum(h)) throw IoError("tar checksum mismatch in " + path.string());
    const std::uint64_t size = get_octal(h.data() + 124, 12);
    if (pos + size > all.size()) throw IoError("truncated tar archive " + path.string());
    Entry e;
    e.name.assign(h.data(), strnlen(h.data(), 100));
    if (h[156] == '0' || h[156] == 0) {
      e.bytes = all.substr(pos, size);
      entries.push_back(std::move(e));
    }
    pos += (size + kBlock - 1) / kBlock * kBlock;
  }
  return entries;
}

}  // namespace ssagan::archive
