#pragma once

#include "elastic/sim.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace elastic {

/// Built-in desk-scale scenarios:
///   slam-sweep    steady runs at 0.512, 1, 2, 5 and 20 MB/s
///   grasp-glitch  bandwidth drops 10->3, 5->1 and 10->1 MB/s mid-run
///   dialogue-cpu  robot CPU availability halves, then recovers
///   stationary    single long steady run used for regret analysis
const std::vector<std::string>& preset_names();

/// Confidence-radius scale the presets use in place of the worst-case ||alpha*||.
inline constexpr double kPresetAlphaScale = 0.5;

/// Largest ||alpha*(t)|| any section of `s` can produce.
double alpha_bound(const Scenario& s);

/// Throws ConfigError for unknown names.
Scenario make_preset(std::string_view name, std::uint64_t seed = 1);

/// Scenario defaults around a caller-supplied pipeline, with no sections.
Scenario custom_scenario(std::string name, Pipeline pipeline, double reference_bandwidth, std::uint64_t seed);

/// slam | grasp | dialogue
Pipeline pipeline_by_name(std::string_view name);

Pipeline slam_pipeline();
Pipeline grasp_pipeline();
Pipeline dialogue_pipeline();

} // namespace elastic
