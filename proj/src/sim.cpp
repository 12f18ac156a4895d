#include "elastic/sim.hpp"

#include "elastic/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace elastic {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

std::uint64_t mix(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
    return splitmix64(splitmix64(seed ^ (stream * 0xD1B54A32D192ED03ull)) ^ index);
}

double unit_interval(std::uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; }

constexpr std::uint64_t kNoiseStream = 1;
constexpr std::uint64_t kFrameStream = 2;

} // namespace

// ---------------------------------------------------------------------------
// ConditionTrace

void ConditionTrace::validate() const {
    if (horizon == 0) throw ConfigError("trace horizon must be >= 1");
    if (segments.empty() || segments.front().start_frame != 0)
        throw ConfigError("trace segments must start at frame 0");
    for (std::size_t i = 0; i < segments.size(); ++i) {
        const auto& s = segments[i];
        if (i > 0 && s.start_frame <= segments[i - 1].start_frame)
            throw ConfigError("trace segments must have strictly increasing start frames");
        if (s.start_frame >= horizon) throw ConfigError("trace segment starts beyond the horizon");
        if (!(s.bandwidth > 0.0)) throw ConfigError("trace bandwidth must be > 0");
        if (!(s.cpu_scale > 0.0)) throw ConfigError("trace cpu_scale must be > 0");
        if (!(s.cloud_scale > 0.0)) throw ConfigError("trace cloud_scale must be > 0");
    }
    for (const auto& g : glitches) {
        if (g.frame >= horizon) throw ConfigError("glitch frame beyond the horizon");
        if (!(g.bandwidth > 0.0)) throw ConfigError("glitch bandwidth must be > 0");
    }
}

Conditions ConditionTrace::at(std::uint64_t frame) const {
    if (frame >= horizon) throw std::out_of_range(fmt::format("frame {} outside trace horizon {}", frame, horizon));
    auto it = std::upper_bound(segments.begin(), segments.end(), frame,
                               [](std::uint64_t f, const TraceSegment& s) { return f < s.start_frame; });
    const TraceSegment& seg = *std::prev(it);
    Conditions c{seg.bandwidth, seg.cpu_scale, seg.cloud_scale};
    std::uint64_t latest = 0;
    bool found = false;
    for (const auto& g : glitches) {
        if (g.frame <= frame && g.frame >= seg.start_frame && (!found || g.frame >= latest)) {
            latest = g.frame;
            c.bandwidth = g.bandwidth;
            found = true;
        }
    }
    return c;
}

std::vector<std::uint64_t> ConditionTrace::change_points() const {
    std::vector<std::uint64_t> out;
    for (const auto& s : segments)
        if (s.start_frame > 0) out.push_back(s.start_frame);
    for (const auto& g : glitches) out.push_back(g.frame);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

ConditionTrace ConditionTrace::steady(std::uint64_t horizon, double bandwidth, double cpu_scale) {
    ConditionTrace t;
    t.horizon = horizon;
    t.segments.push_back(TraceSegment{0, bandwidth, cpu_scale, 1.0});
    return t;
}

// ---------------------------------------------------------------------------
// Ground truth

GroundTruth GroundTruth::from_cost_model(const ContextNorms& norms, double reference_bandwidth,
                                         double cloud_seconds_per_unit, double overhead) {
    GroundTruth gt;
    gt.reference_bandwidth = reference_bandwidth;
    gt.alpha_star = Vector(kContextDim);
    gt.alpha_star << norms.byte_norm / reference_bandwidth, norms.compute_norm * cloud_seconds_per_unit, overhead;
    return gt;
}

Vector GroundTruth::alpha_at(const Conditions& c) const {
    Vector a = alpha_star;
    a[0] *= reference_bandwidth / c.bandwidth;
    a[1] /= c.cloud_scale;
    return a;
}

double GroundTruth::noise(std::uint64_t frame) const {
    if (noise_bound <= 0.0) return 0.0;
    if (noise_kind == NoiseKind::uniform) {
        return (2.0 * unit_interval(mix(seed, kNoiseStream, frame)) - 1.0) * noise_bound;
    }
    // Box-Muller with sd = bound / 2, rejection outside the bound.
    const double sd = 0.5 * noise_bound;
    for (std::uint64_t attempt = 0;; ++attempt) {
        const std::uint64_t base = frame * 64 + 2 * attempt;
        const double u1 = std::max(unit_interval(mix(seed, kNoiseStream, base)), 1e-300);
        const double u2 = unit_interval(mix(seed, kNoiseStream, base + 1));
        const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
        if (std::abs(z * sd) <= noise_bound) return z * sd;
        if (attempt >= 30) return 0.0;
    }
}

double observe_cost(const GroundTruth& gt, const ConditionTrace& trace, const Vector& v, std::uint64_t frame) {
    const Conditions c = trace.at(frame);
    if (v.isZero(0.0)) return gt.alpha_at(c).dot(v);
    return gt.alpha_at(c).dot(v) + gt.noise(frame);
}

double true_cost(const GroundTruth& gt, const Conditions& c, const Pipeline& pipeline, const Action& action,
                 const ContextNorms& norms) {
    const double local = gt.local_weight * on_robot_cost(pipeline, action, c.cpu_scale);
    if (action.is_pure_local) return local;
    return local + gt.alpha_at(c).dot(context_of(pipeline, action, norms));
}

namespace {

Action argmin_true_cost(const GroundTruth& gt, const Conditions& c, std::span<const Action> actions,
                        const Pipeline& pipeline, const ContextNorms& norms, double* best_cost = nullptr) {
    const Action* best = nullptr;
    double best_value = std::numeric_limits<double>::infinity();
    for (const auto& a : actions) {
        const double value = true_cost(gt, c, pipeline, a, norms);
        if (best == nullptr || value < best_value ||
            (value == best_value && a.transmit_bytes < best->transmit_bytes)) {
            best = &a;
            best_value = value;
        }
    }
    if (best_cost != nullptr) *best_cost = best_value;
    return *best;
}

} // namespace

Action oracle_action(const GroundTruth& gt, const ConditionTrace& trace, std::span<const Action> actions,
                     const Pipeline& pipeline, const ContextNorms& norms, std::uint64_t frame) {
    return argmin_true_cost(gt, trace.at(frame), actions, pipeline, norms);
}

RegretReport cumulative_regret(const std::vector<HistoryEntry>& history, const GroundTruth& gt,
                               const ConditionTrace& trace, const Pipeline& pipeline, const ContextNorms& norms) {
    const auto actions = enumerate_actions(pipeline);
    RegretReport r;
    r.per_frame.reserve(history.size());
    r.cumulative.reserve(history.size());
    double running = 0.0;
    for (const auto& h : history) {
        const Conditions c = trace.at(h.frame);
        double best = 0.0;
        const Action star = argmin_true_cost(gt, c, actions, pipeline, norms, &best);
        const double regret = std::max(0.0, true_cost(gt, c, pipeline, h.action, norms) - best);

        double best_offload = std::numeric_limits<double>::infinity();
        for (const auto& a : actions)
            if (!a.is_pure_local) best_offload = std::min(best_offload, true_cost(gt, c, pipeline, a, norms));
        const double local = true_cost(gt, c, pipeline, actions.back(), norms);
        r.delta_max = std::max(r.delta_max, std::abs(local - best_offload));

        running += regret;
        r.per_frame.push_back(regret);
        r.cumulative.push_back(running);
        r.oracle_actions.push_back(star.split_index);
    }
    r.loglog_slope = loglog_slope(r.cumulative);
    return r;
}

// ---------------------------------------------------------------------------
// Frames

std::vector<std::uint8_t> FrameSource::frame(std::uint64_t index) const {
    std::uint64_t state = mix(seed, kFrameStream, index);
    auto next = [&state] { return state = splitmix64(state); };
    const unsigned bits = 1 + static_cast<unsigned>(next() % 8);
    const std::uint64_t mask = (std::uint64_t{1} << bits) - 1;
    std::vector<std::uint8_t> out(frame_bytes);
    for (auto& b : out) b = static_cast<std::uint8_t>(next() & mask);
    return out;
}

double FrameSource::entropy(std::uint64_t index) const {
    const auto f = frame(index);
    return mode == EntropyMode::marginal ? frame_entropy(f) : pairwise_frame_entropy(f);
}

// ---------------------------------------------------------------------------
// Experiments

const char* policy_name(PolicyKind kind) {
    switch (kind) {
    case PolicyKind::elastic: return "elastic";
    case PolicyKind::static_cloud: return "static-cloud";
    case PolicyKind::static_local: return "static-local";
    case PolicyKind::oracle: return "oracle";
    }
    return "?";
}

const char* objective_name(Objective o) {
    switch (o) {
    case Objective::latency: return "latency";
    case Objective::cpu: return "cpu";
    case Objective::power: return "power";
    }
    return "?";
}

GroundTruth Scenario::latency_truth() const {
    GroundTruth gt = GroundTruth::from_cost_model(norms, reference_bandwidth, cloud_seconds_per_unit, overhead);
    gt.noise_bound = noise_bound;
    gt.noise_kind = noise_kind;
    gt.seed = seed;
    return gt;
}

GroundTruth Scenario::ground_truth() const {
    GroundTruth gt = latency_truth();
    if (objective == Objective::latency) return gt;
    // Robot-side CPU or power: local compute plus transmit time, cloud work is free.
    const double local = objective == Objective::cpu ? metrics.cpu_local_per_s : metrics.power_local_per_s;
    const double tx = objective == Objective::cpu ? metrics.cpu_tx_per_s : metrics.power_tx_per_s;
    gt.alpha_star << tx * norms.byte_norm / reference_bandwidth, 0.0, 0.0;
    gt.noise_bound = noise_bound * tx;
    gt.local_weight = local;
    return gt;
}

const PolicyRun& SectionResult::run(PolicyKind kind) const {
    for (const auto& r : runs)
        if (r.kind == kind) return r;
    throw std::out_of_range("policy not present in section result");
}

PolicyRun run_policy(const Scenario& scenario, const Section& section, PolicyKind kind) {
    section.trace.validate();
    const GroundTruth gt = scenario.ground_truth();
    const GroundTruth gt_latency = scenario.latency_truth();
    const Pipeline& pipeline = scenario.pipeline;
    const ContextNorms& norms = scenario.norms;
    const auto actions = enumerate_actions(pipeline);
    const Action& local_action = actions.back();
    const std::uint64_t horizon = section.trace.horizon;
    const MetricModel& mm = scenario.metrics;
    const FrameSource frames{scenario.frame_bytes, scenario.seed, scenario.entropy_mode};

    std::optional<ElasticPolicy> policy;
    if (kind == PolicyKind::elastic) {
        PolicyConfig cfg = scenario.policy;
        if (cfg.horizon_mode == ForcedSchedule::Mode::known_horizon) cfg.horizon = horizon;
        cfg.local_cost_weight = gt.local_weight;
        policy.emplace(pipeline, norms, cfg);
    }

    PolicyRun run;
    run.kind = kind;
    run.rows.reserve(horizon);
    std::vector<HistoryEntry> history;
    history.reserve(horizon);
    std::optional<double> feedback;

    for (std::uint64_t frame = 0; frame < horizon; ++frame) {
        const Conditions cond = section.trace.at(frame);
        const FrameWeight weight = step_weight(frames.entropy(frame), scenario.weights);
        run.max_alpha_norm = std::max(run.max_alpha_norm, gt.alpha_at(cond).norm());

        MetricsRow row;
        row.frame_id = frame;
        row.t = frame + 1;
        row.sigma = weight.sigma;
        row.bandwidth = cond.bandwidth;

        Action action;
        switch (kind) {
        case PolicyKind::elastic: {
            const Decision d = policy->step(weight, feedback, cond.cpu_scale);
            action = d.action;
            row.forced = d.forced;
            row.update_window = d.update_window;
            if (!action.is_pure_local) row.predicted_e = d.predicted_e;
            break;
        }
        case PolicyKind::static_cloud: action = actions.front(); break;
        case PolicyKind::static_local: action = local_action; break;
        case PolicyKind::oracle:
            action = oracle_action(gt, section.trace, actions, pipeline, norms, frame);
            break;
        }

        const double local_time = on_robot_cost(pipeline, action, cond.cpu_scale);
        const double tx_time = static_cast<double>(action.transmit_bytes) / cond.bandwidth;
        std::optional<double> observed;
        double elastic_latency = 0.0;
        if (!action.is_pure_local) {
            const Vector v = context_of(pipeline, action, norms);
            observed = observe_cost(gt, section.trace, v, frame);
            elastic_latency = observe_cost(gt_latency, section.trace, v, frame);
        }
        feedback = observed;

        row.split_index = action.split_index;
        row.observed_e = observed;
        if (row.update_window) {
            // Local fallback delivers the result; the exploratory offload only costs transmit work.
            const double full_local = on_robot_cost(pipeline, local_action, cond.cpu_scale);
            row.latency = full_local;
            row.cpu_rel = mm.cpu_local_per_s * full_local + mm.cpu_tx_per_s * tx_time;
            row.power_rel = mm.power_idle + mm.power_local_per_s * full_local + mm.power_tx_per_s * tx_time;
        } else {
            row.latency = local_time + elastic_latency;
            row.cpu_rel = mm.cpu_local_per_s * local_time + mm.cpu_tx_per_s * tx_time;
            row.power_rel = mm.power_idle + mm.power_local_per_s * local_time + mm.power_tx_per_s * tx_time;
        }
        run.rows.push_back(row);
        history.push_back(HistoryEntry{frame, action});
    }

    run.regret = cumulative_regret(history, gt, section.trace, pipeline, norms);
    for (std::size_t i = 0; i < run.rows.size(); ++i) run.rows[i].cumulative_regret = run.regret.cumulative[i];
    if (policy) {
        // Policy times are 1-based and name the frame whose feedback tripped the detector.
        for (auto t : policy->drift_events()) run.drift_events.push_back(t - 1);
        run.norm_violations = policy->norm_violations();
        run.final_predictor = policy->predictor();
    }
    return run;
}

std::vector<Segment> section_phases(const Section& section, const PolicyRun& elastic) {
    const std::uint64_t horizon = section.trace.horizon;
    const auto changes = section.trace.change_points();
    std::vector<Segment> out;
    if (changes.empty()) {
        out.push_back(Segment{"steady", std::min(section.warmup, horizon), horizon});
        return out;
    }
    out.push_back(Segment{"before", std::min(section.warmup, changes.front()), changes.front()});
    const bool numbered = changes.size() > 1;
    for (std::size_t i = 0; i < changes.size(); ++i) {
        const std::uint64_t begin = changes[i];
        const std::uint64_t limit = i + 1 < changes.size() ? changes[i + 1] : horizon;
        std::uint64_t end = begin;
        std::uint64_t f = begin;
        while (f < limit && !elastic.rows[f].update_window) ++f;
        if (f < limit) {
            while (f < limit && elastic.rows[f].update_window) ++f;
            end = f;
        }
        const std::string suffix = numbered ? fmt::format("-{}", i + 1) : "";
        out.push_back(Segment{"on" + suffix, begin, end});
        out.push_back(Segment{"after" + suffix, end, limit});
    }
    return out;
}

ExperimentResult run_experiment(const Scenario& scenario) {
    scenario.pipeline.validate();
    scenario.weights.validate();
    ExperimentResult result;
    result.scenario = scenario.name;
    for (const auto& section : scenario.sections) {
        SectionResult sr;
        sr.name = section.name;
        for (auto kind : kAllPolicies) sr.runs.push_back(run_policy(scenario, section, kind));
        sr.phases = section_phases(section, sr.run(PolicyKind::elastic));
        result.sections.push_back(std::move(sr));
    }
    return result;
}

} // namespace elastic
