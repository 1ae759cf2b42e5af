#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "delaymatch/mlp.hpp"

namespace delaymatch {

struct NamedNetwork {
  std::string name;
  MlpSpec spec;
  MlpParams params;
};

/// Binary layout (little-endian): "DMNN", u32 version, model string, u32
/// network count, then per network: name, u32 head, u32 layer count, u64 dims,
/// and for each layer the fan_in×fan_out weights row-major followed by the
/// bias, all as 64-bit floats. Strings are u32 length + bytes.
struct Checkpoint {
  std::string model;  // "pure", "dqn", "a2c"
  std::vector<NamedNetwork> networks;

  const NamedNetwork& network(const std::string& name) const;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);

/// Throws std::runtime_error on a bad magic/version, truncated payload, or
/// (when given) an input_dim that differs from `expected_input_dim`.
Checkpoint load_checkpoint(const std::filesystem::path& path,
                           std::optional<Eigen::Index> expected_input_dim = std::nullopt);

}  // namespace delaymatch
