#pragma once

// Checkpoints are directories holding manifest.json (names, shapes, byte
// offsets, counters) and tensors.bin (concatenated SKT1 records).

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "skipclip/training/adam.hpp"

namespace skipclip::training {

struct Checkpoint {
  ParamSet<float> params;
  AdamState adam;
  std::size_t epoch = 0;
  std::string rng_state;
  std::uint64_t fingerprint = 0;
  /// Effective run configuration (JSON text) the parameters were built with.
  std::string config_json;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& dir);

/// Loads a checkpoint; with `expected_fingerprint` set, a different
/// architecture is refused with a ConfigError.
Checkpoint load_checkpoint(const std::filesystem::path& dir,
                           std::optional<std::uint64_t> expected_fingerprint = std::nullopt);

}  // namespace skipclip::training
