#pragma once

#include "elastic/action_space.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace elastic {

/// Deterministic synthetic kernels standing in for real pipeline stages.
/// Each stage maps its input to exactly `output_bytes` bytes as a pure
/// function of (input, stage index), so any split of the pipeline yields the
/// same final bytes.
struct StageExecutor {
    /// Busy-work per compute unit; 0 runs the kernels without extra delay.
    double seconds_per_unit = 0.0;
    /// Scales busy-work on this node (robot CPU availability).
    double cpu_scale = 1.0;

    std::vector<std::uint8_t> run_stage(const Pipeline& pipeline, std::size_t index,
                                        std::span<const std::uint8_t> input, bool cloud_side) const;

    /// Runs stages [begin, end) in order.
    std::vector<std::uint8_t> run_range(const Pipeline& pipeline, std::size_t begin, std::size_t end,
                                        std::span<const std::uint8_t> input, bool cloud_side) const;
};

/// FNV-1a, 64-bit.
std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes);

} // namespace elastic
