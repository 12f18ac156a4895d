#include "elastic/stage_exec.hpp"

#include <chrono>
#include <stdexcept>

namespace elastic {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

void busy_wait(double seconds) {
    if (seconds <= 0.0) return;
    const auto until = std::chrono::steady_clock::now() + std::chrono::duration<double>(seconds);
    volatile std::uint64_t sink = 0;
    while (std::chrono::steady_clock::now() < until) sink = sink + 1;
}

} // namespace

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (auto b : bytes) {
        h ^= b;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::vector<std::uint8_t> StageExecutor::run_stage(const Pipeline& pipeline, std::size_t index,
                                                   std::span<const std::uint8_t> input, bool cloud_side) const {
    if (index >= pipeline.size()) throw std::out_of_range("stage index out of range");
    const Stage& st = pipeline.stages[index];
    const std::uint64_t digest = fnv1a64(input) ^ splitmix64(0x5EED0000ull + index);

    std::vector<std::uint8_t> out(st.output_bytes);
    std::uint64_t state = digest;
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (i % 8 == 0) state = splitmix64(digest ^ (i / 8));
        const std::uint8_t mixed = static_cast<std::uint8_t>(state >> (8 * (i % 8)));
        out[i] = input.empty() ? mixed : static_cast<std::uint8_t>(mixed ^ input[i % input.size()]);
    }

    if (seconds_per_unit > 0.0) {
        const double units = cloud_side ? st.cloud_cost : st.local_cost / cpu_scale;
        busy_wait(units * seconds_per_unit);
    }
    return out;
}

std::vector<std::uint8_t> StageExecutor::run_range(const Pipeline& pipeline, std::size_t begin, std::size_t end,
                                                   std::span<const std::uint8_t> input, bool cloud_side) const {
    if (begin > end || end > pipeline.size()) throw std::out_of_range("stage range out of bounds");
    std::vector<std::uint8_t> cur(input.begin(), input.end());
    for (std::size_t i = begin; i < end; ++i) cur = run_stage(pipeline, i, cur, cloud_side);
    return cur;
}

} // namespace elastic
