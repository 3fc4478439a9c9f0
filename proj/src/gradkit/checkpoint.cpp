#include "gradkit/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <vector>

namespace gradkit {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr std::array<char, 8> kMagic = {'G', 'R', 'A', 'D', 'K', 'I', 'T', '\0'};

class Writer {
 public:
  explicit Writer(const std::filesystem::path& path) : out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw CheckpointError("cannot open '" + path.string() + "' for writing");
  }
  template <typename T>
  void pod(T value) {
    out_.write(reinterpret_cast<const char*>(&value), sizeof(T));
  }
  void bytes(const void* data, std::size_t n) { out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n)); }
  void finish(const std::filesystem::path& path) {
    out_.flush();
    if (!out_) throw CheckpointError("write to '" + path.string() + "' failed");
  }

 private:
  std::ofstream out_;
};

class Reader {
 public:
  explicit Reader(const std::filesystem::path& path) : in_(path, std::ios::binary), path_(path) {
    if (!in_) throw CheckpointError("cannot open checkpoint '" + path.string() + "'");
  }
  template <typename T>
  T pod() {
    T value{};
    bytes(&value, sizeof(T));
    return value;
  }
  void bytes(void* data, std::size_t n) {
    in_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
    if (!in_) throw CheckpointError("checkpoint '" + path_.string() + "' is truncated");
  }
  std::string string(std::size_t n) {
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }

 private:
  std::ifstream in_;
  std::filesystem::path path_;
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  Writer w(path);
  w.bytes(kMagic.data(), kMagic.size());
  w.pod<std::uint32_t>(kCheckpointVersion);
  w.pod<std::uint64_t>(checkpoint.metadata.size());
  w.bytes(checkpoint.metadata.data(), checkpoint.metadata.size());
  w.pod<std::uint32_t>(static_cast<std::uint32_t>(checkpoint.params.size()));
  for (const Parameter& p : checkpoint.params) {
    w.pod<std::uint32_t>(static_cast<std::uint32_t>(p.name.size()));
    w.bytes(p.name.data(), p.name.size());
    w.pod<std::uint8_t>(static_cast<std::uint8_t>(p.group));
    w.pod<std::uint32_t>(static_cast<std::uint32_t>(p.value.rank()));
    for (std::size_t d : p.value.shape()) w.pod<std::uint64_t>(d);
    w.bytes(p.value.data(), p.value.size() * sizeof(double));
    w.pod<std::uint64_t>(p.steps);
    w.bytes(p.first_moment.data(), p.first_moment.size() * sizeof(double));
    w.bytes(p.second_moment.data(), p.second_moment.size() * sizeof(double));
  }
  w.finish(path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  Reader r(path);
  std::array<char, 8> magic{};
  r.bytes(magic.data(), magic.size());
  if (magic != kMagic) throw CheckpointError("'" + path.string() + "' is not a gradkit checkpoint");
  const auto version = r.pod<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ckpt;
  ckpt.metadata = r.string(r.pod<std::uint64_t>());
  const auto count = r.pod<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.string(r.pod<std::uint32_t>());
    const auto group = r.pod<std::uint8_t>();
    if (group > 1) throw CheckpointError("parameter '" + name + "' has unknown group " + std::to_string(group));
    Shape shape(r.pod<std::uint32_t>());
    for (auto& d : shape) d = r.pod<std::uint64_t>();
    Tensor value(shape);
    r.bytes(value.data(), value.size() * sizeof(double));
    const std::size_t slot = ckpt.params.add(std::move(name), std::move(value), static_cast<ParamGroup>(group));
    Parameter& p = ckpt.params[slot];
    p.steps = r.pod<std::uint64_t>();
    r.bytes(p.first_moment.data(), p.first_moment.size() * sizeof(double));
    r.bytes(p.second_moment.data(), p.second_moment.size() * sizeof(double));
  }
  return ckpt;
}

}  // namespace gradkit
