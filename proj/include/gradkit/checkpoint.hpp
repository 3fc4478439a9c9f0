#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "gradkit/param_store.hpp"

namespace gradkit {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  /// Opaque caller data (the model layer stores its config JSON here).
  std::string metadata;
  ParamStore params;
};

// Layout (little-endian), see docs/checkpoint_format.md:
//   char[8] magic "GRADKIT\0" | u32 version | u64 metadata size | metadata
//   u32 tensor count, then per tensor:
//   u32 name size | name | u8 group | u32 rank | u64 dims[rank]
//   f64 values[n] | u64 adam steps | f64 first_moment[n] | f64 second_moment[n]
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace gradkit
