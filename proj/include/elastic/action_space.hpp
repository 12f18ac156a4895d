#pragma once

#include "elastic/predictor.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace elastic {

struct Stage {
    std::string name;
    double local_cost = 0.0;       // on-robot compute units
    double cloud_cost = 0.0;       // server compute units
    std::uint64_t output_bytes = 0;
};

struct Pipeline {
    std::vector<Stage> stages;
    std::uint64_t input_bytes = 0;

    std::size_t size() const { return stages.size(); }
    void validate() const;

    double total_local_cost() const;
    double total_cloud_cost() const;
};

/// Split point: stages [0, split) run on the robot, [split, n) in the cloud.
struct Action {
    std::size_t split_index = 0;
    std::uint64_t transmit_bytes = 0;
    bool is_pure_local = false;

    friend bool operator==(const Action&, const Action&) = default;
};

/// Scaling applied to raw features before they enter the linear model.
struct ContextNorms {
    double byte_norm = 1.0;
    double compute_norm = 1.0;

    /// byte_norm = input bytes, compute_norm = total cloud cost (1 when zero).
    static ContextNorms for_pipeline(const Pipeline& pipeline);
};

inline constexpr std::size_t kContextDim = 3;

/// n + 1 actions, split_index ascending; the last one is pure local.
std::vector<Action> enumerate_actions(const Pipeline& pipeline);

/// Bytes shipped to the release side for a given split.
std::uint64_t transmit_bytes_at(const Pipeline& pipeline, std::size_t split);

/// Sum of cloud_cost over stages [split, n).
double remaining_cloud_cost(const Pipeline& pipeline, std::size_t split);

/// Sum of local_cost over stages [0, split).
double prefix_local_cost(const Pipeline& pipeline, std::size_t split);

/// [bytes / byte_norm, remaining cloud / compute_norm, 1]; zero for pure local.
Vector context_of(const Pipeline& pipeline, const Action& action, const ContextNorms& norms);

/// Known on-robot cost of the action's local prefix at the given CPU availability.
double on_robot_cost(const Pipeline& pipeline, const Action& action, double cpu_scale);

// ---------------------------------------------------------------------------
// Frame weighting

enum class EntropyMode { marginal, pairwise };

/// Shannon entropy of a symbol histogram in the given base, divided by max_entropy
/// and clamped to [0, 1].
double histogram_entropy(std::span<const std::uint64_t> counts, double max_entropy, double base);

/// Normalized entropy of the byte histogram of a frame. Throws on empty frames.
double frame_entropy(std::span<const std::uint8_t> frame, double max_entropy = 8.0, double base = 2.0);

/// Entropy over horizontally adjacent byte pairs (65536 symbols). Frames shorter
/// than two bytes are rejected.
double pairwise_frame_entropy(std::span<const std::uint8_t> frame, double max_entropy = 16.0,
                              double base = 2.0);

struct FrameWeight {
    double entropy_norm = 0.0;
    double sigma = 0.0;
    bool is_key = false;
};

struct StepWeights {
    double threshold = 0.5;
    double sigma_nonkey = 0.2;
    double sigma_key = 0.8;

    void validate() const;
};

/// Key frame iff entropy_norm >= threshold.
FrameWeight step_weight(double entropy_norm, const StepWeights& weights);
FrameWeight step_weight(double entropy_norm, double threshold, double sigma_nonkey, double sigma_key);

} // namespace elastic
