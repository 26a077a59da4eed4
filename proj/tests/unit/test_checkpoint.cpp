#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "gradcheck.hpp"
#include "ssagan/archive.hpp"
#include "ssagan/checkpoint.hpp"
#include "ssagan/error.hpp"

using namespace ssagan;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / "ssagan_test_checkpoint";
  fs::create_directories(dir);
  return dir / name;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("tar archives round-trip at block boundaries") {
  std::vector<archive::Entry> entries;
  for (std::size_t n : {0, 1, 511, 512, 513, 5000}) {
    std::string bytes(n, '\0');
    for (std::size_t i = 0; i < n; ++i) bytes[i] = static_cast<char>((i * 131 + n) & 0xff);
    entries.push_back({"dir/file" + std::to_string(n) + ".bin", bytes});
  }
  auto path = scratch("blocks.tar");
  archive::write_tar(path, entries);
  CHECK(fs::file_size(path) % 512 == 0);
  auto back = archive::read_tar(path);
  REQUIRE(back.size() == entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    CHECK(back[i].name == entries[i].name);
    CHECK(back[i].bytes == entries[i].bytes);
  }
  CHECK_THROWS_AS(archive::write_tar(scratch("long.tar"), {{std::string(101, 'a'), "x"}}), ContractError);
}

TEST_CASE("system tar reads our archives") {
  if (std::system("tar --version > /dev/null 2>&1") != 0) return;
  auto path = scratch("system.tar");
  auto out = scratch("extract");
  fs::remove_all(out);
  fs::create_directories(out);
  archive::write_tar(path, {{"a.txt", "hello\n"}, {"b/c.bin", std::string(700, 'z')}});
  const std::string cmd = "tar -xf " + path.string() + " -C " + out.string();
  REQUIRE(std::system(cmd.c_str()) == 0);
  CHECK(slurp(out / "a.txt") == "hello\n");
  CHECK(slurp(out / "b/c.bin") == std::string(700, 'z'));
}

TEST_CASE("corrupt archives are I/O errors") {
  auto path = scratch("corrupt.tar");
  archive::write_tar(path, {{"a.txt", "payload"}});
  std::string bytes = slurp(path);
  bytes[10] ^= 0x5a;
  std::ofstream(path, std::ios::binary) << bytes;
  CHECK_THROWS_AS(archive::read_tar(path), IoError);
  std::ofstream(path, std::ios::binary | std::ios::trunc) << "short";
  CHECK_THROWS_AS(archive::read_tar(path), IoError);
  CHECK_THROWS_AS(archive::read_tar(scratch("missing.tar")), IoError);
}

TEST_CASE("checkpoints round-trip values bitwise") {
  Rng rng(5);
  Tensor a = Tensor::randn({3, 4}, rng), b = Tensor::randn({7}, rng), s = Tensor::scalar(1.0 / 3.0);
  a.mutable_data()[0] = -0.0;
  a.mutable_data()[1] = 1e-310;
  Checkpoint ck;
  ck.kind = "gan";
  ck.step = 42;
  ck.seed = 0xdeadbeefcafeULL;
  ck.vocab_hash = 0x0123456789abcdefULL;
  ck.config_hash = 0xfedcba9876543210ULL;
  ck.config_text = "stages = 5\n";
  ck.vocab_tokens = {"<pad>", "<unk>", "red"};
  ck.counters = {{"adam_g_steps", 42}, {"adam_d_steps", 84}};
  ck.put({{"gen/a", a}, {"disc/b", b}, {"x/scalar", s}});
  auto path = scratch("round.tar");
  save_checkpoint(path, ck);
  auto back = load_checkpoint(path);
  CHECK(back.kind == ck.kind);
  CHECK(back.step == 42);
  CHECK(back.seed == ck.seed);
  CHECK(back.vocab_hash == ck.vocab_hash);
  CHECK(back.config_hash == ck.config_hash);
  CHECK(back.config_text == ck.config_text);
  CHECK(back.vocab_tokens == ck.vocab_tokens);
  CHECK(back.counters == ck.counters);
  CHECK(testing::bitwise_equal(back.tensor("gen/a"), a));
  CHECK(testing::bitwise_equal(back.tensor("disc/b"), b));
  CHECK(back.tensor("x/scalar").shape().empty());

  Tensor target_a = Tensor::zeros({3, 4}), target_b = Tensor::zeros({7});
  back.restore({{"gen/a", target_a}, {"disc/b", target_b}});
  CHECK(testing::bitwise_equal(target_a, a));
  CHECK(testing::bitwise_equal(target_b, b));
  Tensor wrong = Tensor::zeros({4, 3});
  CHECK_THROWS_AS(back.restore({{"gen/a", wrong}}), IoError);
  CHECK_THROWS_AS(back.restore({{"gen/missing", wrong}}), IoError);

  // Equal contents give equal files.
  auto again = scratch("round2.tar");
  save_checkpoint(again, back);
  CHECK(slurp(again) == slurp(path));
}

TEST_CASE("non-checkpoint archives are rejected") {
  auto path = scratch("plain.tar");
  archive::write_tar(path, {{"readme.txt", "not a checkpoint"}});
  CHECK_THROWS_AS(load_checkpoint(path), IoError);
  CHECK_THROWS_AS(load_checkpoint(scratch("absent.tar")), IoError);
}
