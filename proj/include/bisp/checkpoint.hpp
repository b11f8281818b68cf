#pragma once

#include "bisp/model.hpp"

#include <cstdint>
#include <filesystem>

namespace bisp {

// Checkpoint layout (little-endian):
//   8 bytes   magic "BISPCKPT"
//   uint32    format version (currently 1)
//   uint64    header length N
//   N bytes   JSON header: variant, resolution, step, tensor table
//             [{name, dtype, shape, offset, nbytes}]
//   ...       raw tensor payload, offsets relative to the payload start
inline constexpr char kCheckpointMagic[8] = {'B', 'I', 'S', 'P', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    BiSPModel model{nullptr};
    int64_t step = 0;
};

/// Writes every named parameter and buffer (BatchNorm statistics included).
void save_checkpoint(BiSPModel& model, int64_t step, const std::filesystem::path& file);

/// Rebuilds the model described by the header and restores its tensors.
/// Throws DataError on a bad magic, unknown version or missing tensor.
Checkpoint load_checkpoint(const std::filesystem::path& file);

} // namespace bisp
