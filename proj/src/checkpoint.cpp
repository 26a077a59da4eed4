#include "ssagan/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <sstream>

#include "ssagan/archive.hpp"
#include "ssagan/config.hpp"
#include "ssagan/error.hpp"

namespace ssagan {

static_assert(std::endian::native == std::endian::little, "blobs are stored little-endian");

void Checkpoint::put(const nn::TensorList& tensors) {
  for (const auto& nt : tensors) {
    auto d = nt.tensor.data();
    blobs[nt.path] = Blob{nt.tensor.shape(), std::vector<Real>(d.begin(), d.end())};
  }
}

void Checkpoint::restore(const nn::TensorList& targets) const {
  for (const auto& nt : targets) {
    auto it = blobs.find(nt.path);
    if (it == blobs.end()) throw IoError("checkpoint lacks tensor " + nt.path);
    if (it->second.shape != nt.tensor.shape()) throw IoError("checkpoint shape mismatch for " + nt.path);
    Tensor target = nt.tensor;
    auto dst = target.mutable_data();
    std::copy(it->second.values.begin(), it->second.values.end(), dst.begin());
  }
}

Tensor Checkpoint::tensor(const std::string& path) const {
  auto it = blobs.find(path);
  if (it == blobs.end()) throw IoError("checkpoint lacks tensor " + path);
  return Tensor(it->second.shape, it->second.values);
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  std::ostringstream manifest;
  manifest << "format ssagan-checkpoint\n"
           << "version " << kCheckpointVersion << "\n"
           << "kind " << ck.kind << "\n"
           << "step " << ck.step << "\n"
           << "seed " << ck.seed << "\n"
           << "vocab_hash " << hex64(ck.vocab_hash) << "\n"
           << "config_hash " << hex64(ck.config_hash) << "\n";
  for (const auto& [name, value] : ck.counters) manifest << "counter " << name << " " << value << "\n";
  std::vector<archive::Entry> entries;
  std::size_t index = 0;
  for (const auto& [name, blob] : ck.blobs) {
    std::string file = "blobs/" + std::to_string(index++) + ".f64";
    manifest << "blob " << file << " " << name << " " << blob.shape.size();
    for (auto d : blob.shape) manifest << " " << d;
    manifest << "\n";
    std::string bytes(blob.values.size() * sizeof(Real), '\0');
    std::memcpy(bytes.data(), blob.values.data(), bytes.size());
    entries.push_back({file, std::move(bytes)});
  }
  std::string vocab;
  for (const auto& t : ck.vocab_tokens) vocab += t + "\n";
  entries.insert(entries.begin(), {{"manifest.txt", manifest.str()}, {"vocab.txt", vocab}, {"config.txt", ck.config_text}});
  auto tmp = path;
  tmp += ".tmp";
  archive::write_tar(tmp, entries);
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into place at " + path.string() + ": " + ec.message());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("no checkpoint at " + path.string());
  std::map<std::string, std::string> files;
  for (auto& e : archive::read_tar(path)) files[e.name] = std::move(e.bytes);
  for (const char* required : {"manifest.txt", "vocab.txt", "config.txt"})
    if (!files.count(required)) throw IoError(path.string() + " is not a checkpoint (missing " + required + ")");

  Checkpoint ck;
  ck.config_text = files["config.txt"];
  std::istringstream vocab(files["vocab.txt"]);
  for (std::string line; std::getline(vocab, line);) ck.vocab_tokens.push_back(line);

  std::istringstream manifest(files["manifest.txt"]);
  bool format_ok = false;
  for (std::string line; std::getline(manifest, line);) {
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "format") {
      std::string f;
      ls >> f;
      format_ok = f == "ssagan-checkpoint";
    } else if (key == "version") {
      int v = 0;
      ls >> v;
      if (v != kCheckpointVersion) throw IoError("unsupported checkpoint version " + std::to_string(v));
    } else if (key == "kind") {
      ls >> ck.kind;
    } else if (key == "step") {
      ls >> ck.step;
    } else if (key == "seed") {
      ls >> ck.seed;
    } else if (key == "vocab_hash" || key == "config_hash") {
      std::string hex;
      ls >> hex;
      (key == "vocab_hash" ? ck.vocab_hash : ck.config_hash) = std::stoull(hex, nullptr, 16);
    } else if (key == "counter") {
      std::string name;
      std::int64_t v = 0;
      ls >> name >> v;
      ck.counters[name] = v;
    } else if (key == "blob") {
      std::string file, name;
      std::size_t rank = 0;
      ls >> file >> name >> rank;
      Checkpoint::Blob blob;
      blob.shape.resize(rank);
      std::int64_t n = 1;
      for (auto& d : blob.shape) {
        ls >> d;
        n *= d;
      }
      if (!ls || !files.count(file)) throw IoError("corrupt checkpoint manifest line: " + line);
      const std::string& bytes = files[file];
      if (bytes.size() != static_cast<std::size_t>(n) * sizeof(Real)) throw IoError("blob size mismatch for " + name);
      blob.values.resize(static_cast<std::size_t>(n));
      std::memcpy(blob.values.data(), bytes.data(), bytes.size());
      ck.blobs[name] = std::move(blob);
    }
  }
  if (!format_ok) throw IoError(path.string() + " is not a checkpoint");
  return ck;
}

}  // namespace ssagan
