#include "elastic/scenarios.hpp"

#include "elastic/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace elastic {

namespace {

constexpr double kMB = 1e6;

Scenario base_scenario(std::string name, Pipeline pipeline, double reference_bandwidth, std::uint64_t seed) {
    Scenario s;
    s.name = std::move(name);
    s.pipeline = std::move(pipeline);
    s.norms = ContextNorms::for_pipeline(s.pipeline);
    s.reference_bandwidth = reference_bandwidth;
    s.cloud_seconds_per_unit = 1.0;
    s.overhead = 0.02;
    s.noise_bound = 0.03;
    s.seed = seed;
    s.policy.beta.n_v = 1.75;
    s.policy.beta.n_x = s.noise_bound;
    return s;
}

} // namespace

double alpha_bound(const Scenario& s) {
    const GroundTruth gt = s.ground_truth();
    double bound = 0.0;
    for (const auto& sec : s.sections) {
        for (const auto& seg : sec.trace.segments)
            bound = std::max(bound, gt.alpha_at(Conditions{seg.bandwidth, seg.cpu_scale, seg.cloud_scale}).norm());
        for (const auto& g : sec.trace.glitches)
            bound = std::max(bound, gt.alpha_at(Conditions{g.bandwidth, 1.0, 1.0}).norm());
    }
    return bound;
}

namespace {

Section glitch_section(double before_mb, double after_mb, std::uint64_t horizon, std::uint64_t at) {
    Section sec;
    sec.name = fmt::format("{:g}M->{:g}M", before_mb, after_mb);
    sec.trace = ConditionTrace::steady(horizon, before_mb * kMB);
    sec.trace.glitches.push_back(Glitch{at, after_mb * kMB});
    sec.warmup = 500;
    return sec;
}

} // namespace

Pipeline slam_pipeline() {
    Pipeline p;
    p.input_bytes = 5'100'000;
    p.stages = {
        Stage{"decode", 0.60, 0.010, 3'000'000},
        Stage{"features", 0.45, 0.020, 1'000'000},
        Stage{"descriptors", 0.70, 0.030, 70'000},
        Stage{"homography", 0.86, 0.030, 1'000},
    };
    return p;
}

Pipeline grasp_pipeline() {
    Pipeline p;
    p.input_bytes = 5'100'000;
    p.stages = {
        Stage{"preprocess", 0.75, 0.010, 3'500'000},
        Stage{"backbone", 1.00, 0.040, 150'000},
        Stage{"grasp-head", 0.86, 0.040, 2'000},
    };
    return p;
}

Pipeline dialogue_pipeline() {
    Pipeline p;
    p.input_bytes = 4'000'000;
    p.stages = {
        Stage{"frontend", 0.40, 0.020, 3'000'000},
        Stage{"encoder", 1.20, 0.050, 200'000},
        Stage{"decoder", 1.02, 0.040, 500},
    };
    return p;
}

Pipeline pipeline_by_name(std::string_view name) {
    if (name == "slam") return slam_pipeline();
    if (name == "grasp") return grasp_pipeline();
    if (name == "dialogue") return dialogue_pipeline();
    throw ConfigError(fmt::format("unknown pipeline '{}' (known: slam, grasp, dialogue)", name));
}

Scenario custom_scenario(std::string name, Pipeline pipeline, double reference_bandwidth, std::uint64_t seed) {
    Scenario s = base_scenario(std::move(name), std::move(pipeline), reference_bandwidth, seed);
    s.policy.beta.n_alpha = kPresetAlphaScale;
    return s;
}

const std::vector<std::string>& preset_names() {
    static const std::vector<std::string> names = {"slam-sweep", "grasp-glitch", "dialogue-cpu", "stationary"};
    return names;
}

Scenario make_preset(std::string_view name, std::uint64_t seed) {
    Scenario s;
    if (name == "slam-sweep") {
        s = base_scenario("slam-sweep", slam_pipeline(), kMB, seed);
        for (double mb : {0.512, 1.0, 2.0, 5.0, 20.0}) {
            Section sec;
            sec.name = fmt::format("{:g}M", mb);
            sec.trace = ConditionTrace::steady(4000, mb * kMB);
            sec.warmup = 1000;
            s.sections.push_back(std::move(sec));
        }
    } else if (name == "grasp-glitch") {
        s = base_scenario("grasp-glitch", grasp_pipeline(), kMB, seed);
        s.sections.push_back(glitch_section(10, 3, 3000, 1500));
        s.sections.push_back(glitch_section(5, 1, 3000, 1500));
        s.sections.push_back(glitch_section(10, 1, 3000, 1500));
    } else if (name == "dialogue-cpu") {
        s = base_scenario("dialogue-cpu", dialogue_pipeline(), 2 * kMB, seed);
        Section sec;
        sec.name = "cpu";
        sec.trace.horizon = 4500;
        sec.trace.segments = {
            TraceSegment{0, 2 * kMB, 1.0, 1.0},
            TraceSegment{1500, 2 * kMB, 0.5, 1.0},
            TraceSegment{3000, 2 * kMB, 1.0, 1.0},
        };
        sec.warmup = 500;
        s.sections.push_back(std::move(sec));
    } else if (name == "stationary") {
        s = base_scenario("stationary", slam_pipeline(), kMB, seed);
        Section sec;
        sec.name = "1M";
        sec.trace = ConditionTrace::steady(20000, kMB);
        s.sections.push_back(std::move(sec));
    } else {
        throw ConfigError(fmt::format("unknown scenario preset '{}' (known: slam-sweep, grasp-glitch, "
                                      "dialogue-cpu, stationary)",
                                      name));
    }
    // The worst-case ||alpha*|| makes beta so wide that exploration dominates
    // the whole run; presets use a tuned radius and report the true bound.
    s.policy.beta.n_alpha = kPresetAlphaScale;
    return s;
}

} // namespace elastic
