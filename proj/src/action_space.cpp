#include "elastic/action_space.hpp"

#include "elastic/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

namespace elastic {

void Pipeline::validate() const {
    if (stages.empty()) throw ConfigError("pipeline must contain at least one stage");
    for (const auto& s : stages) {
        if (!std::isfinite(s.local_cost) || s.local_cost < 0.0)
            throw ConfigError(fmt::format("stage '{}': local_cost must be finite and >= 0", s.name));
        if (!std::isfinite(s.cloud_cost) || s.cloud_cost < 0.0)
            throw ConfigError(fmt::format("stage '{}': cloud_cost must be finite and >= 0", s.name));
    }
}

double Pipeline::total_local_cost() const { return prefix_local_cost(*this, stages.size()); }

double Pipeline::total_cloud_cost() const { return remaining_cloud_cost(*this, 0); }

ContextNorms ContextNorms::for_pipeline(const Pipeline& pipeline) {
    ContextNorms norms;
    norms.byte_norm = pipeline.input_bytes > 0 ? static_cast<double>(pipeline.input_bytes) : 1.0;
    const double cloud = pipeline.total_cloud_cost();
    norms.compute_norm = cloud > 0.0 ? cloud : 1.0;
    return norms;
}

std::uint64_t transmit_bytes_at(const Pipeline& pipeline, std::size_t split) {
    const std::size_t n = pipeline.size();
    if (split > n) throw std::out_of_range(fmt::format("split {} outside [0, {}]", split, n));
    if (split == n) return 0;
    if (split == 0) return pipeline.input_bytes;
    return pipeline.stages[split - 1].output_bytes;
}

double remaining_cloud_cost(const Pipeline& pipeline, std::size_t split) {
    double sum = 0.0;
    for (std::size_t i = split; i < pipeline.size(); ++i) sum += pipeline.stages[i].cloud_cost;
    return sum;
}

double prefix_local_cost(const Pipeline& pipeline, std::size_t split) {
    double sum = 0.0;
    for (std::size_t i = 0; i < split && i < pipeline.size(); ++i) sum += pipeline.stages[i].local_cost;
    return sum;
}

std::vector<Action> enumerate_actions(const Pipeline& pipeline) {
    if (pipeline.stages.empty()) throw ConfigError("pipeline must contain at least one stage");
    const std::size_t n = pipeline.size();
    std::vector<Action> actions;
    actions.reserve(n + 1);
    for (std::size_t k = 0; k <= n; ++k)
        actions.push_back(Action{k, transmit_bytes_at(pipeline, k), k == n});
    return actions;
}

Vector context_of(const Pipeline& pipeline, const Action& action, const ContextNorms& norms) {
    Vector v = Vector::Zero(kContextDim);
    if (action.is_pure_local) return v;
    v[0] = static_cast<double>(action.transmit_bytes) / norms.byte_norm;
    v[1] = remaining_cloud_cost(pipeline, action.split_index) / norms.compute_norm;
    v[2] = 1.0;
    return v;
}

double on_robot_cost(const Pipeline& pipeline, const Action& action, double cpu_scale) {
    if (!(cpu_scale > 0.0)) throw std::invalid_argument(fmt::format("cpu_scale must be > 0 (got {})", cpu_scale));
    return prefix_local_cost(pipeline, action.split_index) / cpu_scale;
}

double histogram_entropy(std::span<const std::uint64_t> counts, double max_entropy, double base) {
    if (!(max_entropy > 0.0)) throw std::invalid_argument("max_entropy must be > 0");
    if (!(base > 0.0 && base != 1.0)) throw std::invalid_argument("entropy base must be > 0 and != 1");
    std::uint64_t total = 0;
    for (auto c : counts) total += c;
    if (total == 0) throw std::invalid_argument("entropy of an empty frame is undefined");

    const double log_base = std::log(base);
    const double n = static_cast<double>(total);
    double h = 0.0;
    for (auto c : counts) {
        if (c == 0) continue;
        const double p = static_cast<double>(c) / n;
        h -= p * std::log(p) / log_base;
    }
    return std::clamp(h / max_entropy, 0.0, 1.0);
}

double frame_entropy(std::span<const std::uint8_t> frame, double max_entropy, double base) {
    if (frame.empty()) throw std::invalid_argument("entropy of an empty frame is undefined");
    std::array<std::uint64_t, 256> counts{};
    for (auto b : frame) ++counts[b];
    return histogram_entropy(counts, max_entropy, base);
}

double pairwise_frame_entropy(std::span<const std::uint8_t> frame, double max_entropy, double base) {
    if (frame.size() < 2) throw std::invalid_argument("pairwise entropy needs at least two bytes");
    std::vector<std::uint64_t> counts(65536, 0);
    for (std::size_t i = 0; i + 1 < frame.size(); ++i)
        ++counts[(static_cast<std::size_t>(frame[i]) << 8) | frame[i + 1]];
    return histogram_entropy(counts, max_entropy, base);
}

void StepWeights::validate() const {
    if (!(sigma_nonkey > 0.0 && sigma_nonkey < sigma_key && sigma_key < 1.0))
        throw ConfigError(fmt::format(
            "frame weights must satisfy 0 < sigma_nonkey < sigma_key < 1 (got {} / {})", sigma_nonkey, sigma_key));
    if (!(threshold > 0.0 && threshold < 1.0))
        throw ConfigError(fmt::format("entropy_threshold must be in (0, 1) (got {})", threshold));
}

FrameWeight step_weight(double entropy_norm, const StepWeights& weights) {
    weights.validate();
    const bool key = entropy_norm >= weights.threshold;
    return FrameWeight{entropy_norm, key ? weights.sigma_key : weights.sigma_nonkey, key};
}

FrameWeight step_weight(double entropy_norm, double threshold, double sigma_nonkey, double sigma_key) {
    return step_weight(entropy_norm, StepWeights{threshold, sigma_nonkey, sigma_key});
}

} // namespace elastic
