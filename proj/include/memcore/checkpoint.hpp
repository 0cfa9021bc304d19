#pragma once

// Trained-network checkpoints: network.json (stages, tiles, index maps,
// masks, circuit settings) plus one crossbar state CSV per tile.

#include <filesystem>

#include "memcore/train.hpp"

namespace memcore::harness {

/// Creates `dir` if needed and overwrites existing checkpoint files.
void save_checkpoint(const train::NetworkCircuit& net, const device::DeviceParams& params,
                     const std::filesystem::path& dir);

/// Throws FormatError on missing or malformed files.
[[nodiscard]] train::NetworkCircuit load_checkpoint(const std::filesystem::path& dir);

}  // namespace memcore::harness
