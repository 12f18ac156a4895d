#pragma once

#include "elastic/action_space.hpp"
#include "elastic/metrics.hpp"
#include "elastic/policy.hpp"
#include "elastic/predictor.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace elastic {

struct Conditions {
    double bandwidth = 1.0;   // bytes per second
    double cpu_scale = 1.0;   // robot CPU availability
    double cloud_scale = 1.0; // server availability
};

struct TraceSegment {
    std::uint64_t start_frame = 0;
    double bandwidth = 1.0;
    double cpu_scale = 1.0;
    double cloud_scale = 1.0;
};

struct Glitch {
    std::uint64_t frame = 0;
    double bandwidth = 1.0;
};

/// Piecewise-constant bandwidth/CPU schedule over frames [0, horizon).
struct ConditionTrace {
    std::vector<TraceSegment> segments;
    std::vector<Glitch> glitches;
    std::uint64_t horizon = 0;

    /// Segments must start at 0, be strictly increasing and lie inside the horizon.
    void validate() const;

    Conditions at(std::uint64_t frame) const;

    /// Frames where conditions change (segment starts after 0 and glitches), sorted.
    std::vector<std::uint64_t> change_points() const;

    static ConditionTrace steady(std::uint64_t horizon, double bandwidth, double cpu_scale = 1.0);
};

enum class NoiseKind { uniform, truncated_gaussian };

/// True linear elastic cost with bounded noise.
///
/// alpha_star holds the coefficients at the reference bandwidth and unit
/// cloud availability; the per-byte term scales with reference/bandwidth and
/// the cloud term with 1/cloud_scale.
struct GroundTruth {
    Vector alpha_star = Vector::Zero(kContextDim);
    double reference_bandwidth = 1.0;
    double noise_bound = 0.0;
    NoiseKind noise_kind = NoiseKind::uniform;
    std::uint64_t seed = 0;
    double local_weight = 1.0; // E^c multiplier, for objectives other than latency

    /// Coefficients implied by a transfer/cloud/overhead cost model.
    static GroundTruth from_cost_model(const ContextNorms& norms, double reference_bandwidth,
                                       double cloud_seconds_per_unit, double overhead);

    Vector alpha_at(const Conditions& c) const;

    /// Noise sample for frame t; |x| <= noise_bound, a pure function of (seed, t).
    double noise(std::uint64_t frame) const;
};

/// alpha*(t)^T v + x for the frame's conditions. Throws std::out_of_range past the horizon.
double observe_cost(const GroundTruth& gt, const ConditionTrace& trace, const Vector& v, std::uint64_t frame);

/// Noise-free E^c + alpha*(t)^T v of one action.
double true_cost(const GroundTruth& gt, const Conditions& c, const Pipeline& pipeline, const Action& action,
                 const ContextNorms& norms);

/// Exhaustive noise-free argmin; ties toward fewer transmitted bytes.
Action oracle_action(const GroundTruth& gt, const ConditionTrace& trace, std::span<const Action> actions,
                     const Pipeline& pipeline, const ContextNorms& norms, std::uint64_t frame);

struct RegretReport {
    std::vector<double> per_frame;
    std::vector<double> cumulative;
    double loglog_slope = 0.0;
    double delta_max = 0.0;
    std::vector<std::size_t> oracle_actions; // split index per frame
};

struct HistoryEntry {
    std::uint64_t frame = 0;
    Action action;
};

/// Noise-free regret of a decision history against the oracle.
RegretReport cumulative_regret(const std::vector<HistoryEntry>& history, const GroundTruth& gt,
                               const ConditionTrace& trace, const Pipeline& pipeline, const ContextNorms& norms);

/// Relative CPU and power as linear functions of local compute and transmit time.
struct MetricModel {
    double cpu_local_per_s = 0.368;
    double cpu_tx_per_s = 0.116;
    double power_idle = 0.0;
    double power_local_per_s = 1767.0;
    double power_tx_per_s = 944.0;
};

/// Synthetic sensor frames whose byte alphabet size varies frame to frame,
/// giving a spread of normalized entropies.
struct FrameSource {
    std::size_t frame_bytes = 256;
    std::uint64_t seed = 0;
    EntropyMode mode = EntropyMode::marginal;

    std::vector<std::uint8_t> frame(std::uint64_t index) const;
    double entropy(std::uint64_t index) const;
};

/// Scalar the learner minimizes. Latency rows are reported regardless.
enum class Objective { latency, cpu, power };

const char* objective_name(Objective o);

enum class PolicyKind { elastic, static_cloud, static_local, oracle };

const char* policy_name(PolicyKind kind);
inline constexpr PolicyKind kAllPolicies[] = {PolicyKind::elastic, PolicyKind::static_cloud,
                                              PolicyKind::static_local, PolicyKind::oracle};

struct Section {
    std::string name;
    ConditionTrace trace;
    std::uint64_t warmup = 0; // leading frames excluded from summaries
};

struct Scenario {
    std::string name;
    Pipeline pipeline;
    ContextNorms norms;
    double reference_bandwidth = 1e6;
    double cloud_seconds_per_unit = 1.0;
    double overhead = 0.0;
    double noise_bound = 0.0;
    NoiseKind noise_kind = NoiseKind::uniform;
    MetricModel metrics;
    PolicyConfig policy;
    StepWeights weights;
    std::size_t frame_bytes = 256;
    EntropyMode entropy_mode = EntropyMode::marginal;
    std::vector<Section> sections;
    std::uint64_t seed = 1;
    Objective objective = Objective::latency;

    /// Cost model of the configured objective.
    GroundTruth ground_truth() const;
    /// Latency cost model, used for the latency column whatever the objective.
    GroundTruth latency_truth() const;
};

struct PolicyRun {
    PolicyKind kind = PolicyKind::elastic;
    std::vector<MetricsRow> rows;
    RegretReport regret;
    std::vector<std::uint64_t> drift_events; // frames (0-based) where drift fired
    double max_alpha_norm = 0.0;
    std::size_t norm_violations = 0;
    std::optional<RidgePredictor> final_predictor;
};

struct SectionResult {
    std::string name;
    std::vector<PolicyRun> runs; // in kAllPolicies order
    std::vector<Segment> phases;

    const PolicyRun& run(PolicyKind kind) const;
};

struct ExperimentResult {
    std::string scenario;
    std::vector<SectionResult> sections;
};

/// Runs a single policy over one section.
PolicyRun run_policy(const Scenario& scenario, const Section& section, PolicyKind kind);

/// Phase boundaries: steady | before, on, after (per change point). "on" covers
/// the elastic policy's update window following each change.
std::vector<Segment> section_phases(const Section& section, const PolicyRun& elastic);

/// All four policies over every section with identical traces and noise.
ExperimentResult run_experiment(const Scenario& scenario);

} // namespace elastic
