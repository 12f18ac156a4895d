#pragma once

#include "elastic/error.hpp"
#include "elastic/runtime.hpp"
#include "elastic/sim.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace elastic {

class ConfigParseError : public ConfigError {
public:
    using ConfigError::ConfigError;
};

/// Value present but outside its documented range or of the wrong type.
class ConfigRangeError : public ConfigError {
public:
    ConfigRangeError(std::string key, const std::string& what) : ConfigError(what), key(std::move(key)) {}
    std::string key;
};

class UnknownKeyError : public ConfigError {
public:
    UnknownKeyError(std::string key, std::optional<std::string> suggestion, const std::string& what)
        : ConfigError(what), key(std::move(key)), suggestion(std::move(suggestion)) {}
    std::string key;
    std::optional<std::string> suggestion;
};

enum class RunMode { sim, live };

struct LiveOptions {
    std::optional<std::string> release_address; // unset: an in-process release node on loopback
    std::uint64_t frames = 200;
    double seconds_per_unit = 0.005; // busy-work per pipeline cost unit
    PressOptions press;
};

struct ExperimentConfig {
    RunMode mode = RunMode::sim;
    std::string preset; // empty for a custom scenario
    std::string out = "out";
    Scenario scenario;
    LiveOptions live;
    std::optional<std::string> listen; // release subcommand
};

/// Every key a config file may contain, in documentation order.
const std::vector<std::string>& config_keys();

/// Edit distance, used to suggest the intended key.
std::size_t levenshtein(std::string_view a, std::string_view b);

/// Command-line values that replace the corresponding config keys.
struct ConfigOverrides {
    std::optional<std::string> preset;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
};

/// Strict JSON parse (comments allowed). Throws ConfigParseError,
/// ConfigRangeError or UnknownKeyError.
ExperimentConfig parse_config(const std::string& text, const ConfigOverrides& overrides = {});
ExperimentConfig load_config(const std::string& path, const ConfigOverrides& overrides = {});

/// Config for a named preset with all defaults.
ExperimentConfig preset_config(const std::string& preset, std::uint64_t seed = 1);

} // namespace elastic
