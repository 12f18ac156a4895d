#include "elastic/config.hpp"

#include "elastic/scenarios.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace elastic {

using nlohmann::json;

namespace {

const std::vector<std::string> kStageKeys = {"name", "local_cost", "cloud_cost", "output_bytes"};
const std::vector<std::string> kPipelineKeys = {"input_bytes", "stages"};
const std::vector<std::string> kTraceKeys = {"horizon", "warmup", "segments", "glitches", "name"};
const std::vector<std::string> kSegmentKeys = {"start_frame", "bandwidth", "cpu_scale", "cloud_scale"};
const std::vector<std::string> kGlitchKeys = {"frame", "bandwidth"};

std::optional<std::string> nearest(const std::string& key, const std::vector<std::string>& known) {
    std::optional<std::string> best;
    std::size_t best_d = std::numeric_limits<std::size_t>::max();
    for (const auto& k : known) {
        const std::size_t d = levenshtein(key, k);
        if (d < best_d) {
            best_d = d;
            best = k;
        }
    }
    if (best && best_d <= std::max<std::size_t>(2, key.size() / 3)) return best;
    return std::nullopt;
}

void reject_unknown(const json& obj, const std::vector<std::string>& known, const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (std::find(known.begin(), known.end(), it.key()) != known.end()) continue;
        const auto hint = nearest(it.key(), known);
        const std::string prefix = where.empty() ? "" : where + ".";
        throw UnknownKeyError(it.key(), hint,
                              hint ? fmt::format("unknown key '{}{}' (did you mean '{}'?)", prefix, it.key(), *hint)
                                   : fmt::format("unknown key '{}{}'", prefix, it.key()));
    }
}

// Typed accessors: the key names the error, the rule names the allowed range.
double number(const json& j, const std::string& key) {
    if (!j.is_number()) throw ConfigRangeError(key, fmt::format("'{}' must be a number", key));
    return j.get<double>();
}

std::uint64_t unsigned_int(const json& j, const std::string& key) {
    if (!j.is_number_integer() || (j.is_number_integer() && !j.is_number_unsigned() && j.get<std::int64_t>() < 0))
        throw ConfigRangeError(key, fmt::format("'{}' must be a non-negative integer", key));
    return j.get<std::uint64_t>();
}

std::string text(const json& j, const std::string& key) {
    if (!j.is_string()) throw ConfigRangeError(key, fmt::format("'{}' must be a string", key));
    return j.get<std::string>();
}

bool boolean(const json& j, const std::string& key) {
    if (!j.is_boolean()) throw ConfigRangeError(key, fmt::format("'{}' must be true or false", key));
    return j.get<bool>();
}

[[noreturn]] void out_of_range(const std::string& key, double value, const std::string& rule) {
    throw ConfigRangeError(key, fmt::format("{} = {} is out of range: must be {}", key, value, rule));
}

double at_least(const json& j, const std::string& key, double lo) {
    const double v = number(j, key);
    if (!(v >= lo)) out_of_range(key, v, fmt::format("≥ {}", lo));
    return v;
}

double above(const json& j, const std::string& key, double lo) {
    const double v = number(j, key);
    if (!(v > lo)) out_of_range(key, v, fmt::format("> {}", lo));
    return v;
}

double in_open(const json& j, const std::string& key, double lo, double hi) {
    const double v = number(j, key);
    if (!(v > lo && v < hi)) out_of_range(key, v, fmt::format("in ({}, {})", lo, hi));
    return v;
}

std::uint64_t count_at_least(const json& j, const std::string& key, std::uint64_t lo) {
    const std::uint64_t v = unsigned_int(j, key);
    if (v < lo) out_of_range(key, static_cast<double>(v), fmt::format("≥ {}", lo));
    return v;
}

template <class E>
E choice(const json& j, const std::string& key, std::initializer_list<std::pair<const char*, E>> options) {
    const std::string v = text(j, key);
    std::string names;
    for (const auto& [name, value] : options) {
        if (v == name) return value;
        names += names.empty() ? name : std::string(" | ") + name;
    }
    throw ConfigRangeError(key, fmt::format("{} = '{}' is not one of {}", key, v, names));
}

Pipeline parse_pipeline(const json& j) {
    if (j.is_string()) return pipeline_by_name(j.get<std::string>());
    if (!j.is_object()) throw ConfigRangeError("pipeline", "'pipeline' must be a name or an object");
    reject_unknown(j, kPipelineKeys, "pipeline");
    Pipeline p;
    if (!j.contains("stages") || !j["stages"].is_array() || j["stages"].empty())
        throw ConfigRangeError("pipeline.stages", "'pipeline.stages' must be a non-empty array");
    if (j.contains("input_bytes")) p.input_bytes = unsigned_int(j["input_bytes"], "pipeline.input_bytes");
    std::size_t i = 0;
    for (const auto& st : j["stages"]) {
        const std::string where = fmt::format("pipeline.stages[{}]", i++);
        if (!st.is_object()) throw ConfigRangeError(where, fmt::format("'{}' must be an object", where));
        reject_unknown(st, kStageKeys, where);
        Stage s;
        s.name = st.contains("name") ? text(st["name"], where + ".name") : fmt::format("stage{}", i - 1);
        if (!st.contains("local_cost") || !st.contains("cloud_cost") || !st.contains("output_bytes"))
            throw ConfigRangeError(where, fmt::format("'{}' needs local_cost, cloud_cost and output_bytes", where));
        s.local_cost = at_least(st["local_cost"], where + ".local_cost", 0.0);
        s.cloud_cost = at_least(st["cloud_cost"], where + ".cloud_cost", 0.0);
        s.output_bytes = unsigned_int(st["output_bytes"], where + ".output_bytes");
        p.stages.push_back(std::move(s));
    }
    if (p.stages.size() > 65535) throw ConfigRangeError("pipeline.stages", "at most 65535 stages fit the wire format");
    p.validate();
    return p;
}

Section parse_trace(const json& j) {
    if (!j.is_object()) throw ConfigRangeError("trace", "'trace' must be an object");
    reject_unknown(j, kTraceKeys, "trace");
    Section sec;
    sec.name = j.contains("name") ? text(j["name"], "trace.name") : "custom";
    if (!j.contains("horizon")) throw ConfigRangeError("trace.horizon", "'trace.horizon' is required");
    sec.trace.horizon = count_at_least(j["horizon"], "trace.horizon", 1);
    if (j.contains("warmup")) sec.warmup = unsigned_int(j["warmup"], "trace.warmup");
    if (!j.contains("segments") || !j["segments"].is_array() || j["segments"].empty())
        throw ConfigRangeError("trace.segments", "'trace.segments' must be a non-empty array");
    std::size_t i = 0;
    for (const auto& s : j["segments"]) {
        const std::string where = fmt::format("trace.segments[{}]", i++);
        if (!s.is_object()) throw ConfigRangeError(where, fmt::format("'{}' must be an object", where));
        reject_unknown(s, kSegmentKeys, where);
        TraceSegment seg;
        if (s.contains("start_frame")) seg.start_frame = unsigned_int(s["start_frame"], where + ".start_frame");
        if (!s.contains("bandwidth")) throw ConfigRangeError(where, fmt::format("'{}.bandwidth' is required", where));
        seg.bandwidth = above(s["bandwidth"], where + ".bandwidth", 0.0);
        if (s.contains("cpu_scale")) seg.cpu_scale = above(s["cpu_scale"], where + ".cpu_scale", 0.0);
        if (s.contains("cloud_scale")) seg.cloud_scale = above(s["cloud_scale"], where + ".cloud_scale", 0.0);
        sec.trace.segments.push_back(seg);
    }
    if (j.contains("glitches")) {
        if (!j["glitches"].is_array()) throw ConfigRangeError("trace.glitches", "'trace.glitches' must be an array");
        i = 0;
        for (const auto& g : j["glitches"]) {
            const std::string where = fmt::format("trace.glitches[{}]", i++);
            if (!g.is_object()) throw ConfigRangeError(where, fmt::format("'{}' must be an object", where));
            reject_unknown(g, kGlitchKeys, where);
            if (!g.contains("frame") || !g.contains("bandwidth"))
                throw ConfigRangeError(where, fmt::format("'{}' needs frame and bandwidth", where));
            sec.trace.glitches.push_back(
                Glitch{unsigned_int(g["frame"], where + ".frame"), above(g["bandwidth"], where + ".bandwidth", 0.0)});
        }
    }
    sec.trace.validate();
    return sec;
}

} // namespace

std::size_t levenshtein(std::string_view a, std::string_view b) {
    std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j)
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> keys = {
        "mode",          "preset",           "seed",          "out",
        "objective",     "pipeline",         "trace",         "gamma",
        "forcing_i",     "forcing_ratio",    "horizon_mode",  "horizon",
        "theta",         "drift_window",     "consecutive_needed", "drift_min_samples",
        "sigma_nonkey",  "sigma_key",        "entropy_threshold", "entropy_mode",
        "n_alpha",       "n_x",              "n_v",           "epsilon",
        "direction_rule", "start_in_update_window", "reference_bandwidth", "noise_bound",
        "noise_kind",    "overhead",         "cloud_seconds_per_unit", "frame_bytes",
        "release_address", "listen",         "frames",        "seconds_per_unit",
        "link_bandwidth", "timeout_multiplier", "timeout_floor", "initial_timeout",
        "timeout_feedback"};
    return keys;
}

ExperimentConfig preset_config(const std::string& preset, std::uint64_t seed) {
    ExperimentConfig cfg;
    cfg.preset = preset;
    cfg.scenario = make_preset(preset, seed);
    return cfg;
}

ExperimentConfig parse_config(const std::string& body, const ConfigOverrides& overrides) {
    json j;
    try {
        j = json::parse(body, nullptr, true, /*ignore_comments=*/true);
    } catch (const json::parse_error& e) {
        throw ConfigParseError(fmt::format("config is not valid JSON: {}", e.what()));
    }
    if (!j.is_object()) throw ConfigParseError("config must be a JSON object");
    reject_unknown(j, config_keys(), "");
    if (overrides.preset) j["preset"] = *overrides.preset;
    if (overrides.seed) j["seed"] = *overrides.seed;
    if (overrides.out) j["out"] = *overrides.out;

    ExperimentConfig cfg;
    if (j.contains("mode")) cfg.mode = choice<RunMode>(j["mode"], "mode", {{"sim", RunMode::sim}, {"live", RunMode::live}});
    const std::uint64_t seed = j.contains("seed") ? unsigned_int(j["seed"], "seed") : 1;

    std::optional<Pipeline> pipeline;
    if (j.contains("pipeline")) pipeline = parse_pipeline(j["pipeline"]);
    const double ref_bw = j.contains("reference_bandwidth") ? above(j["reference_bandwidth"], "reference_bandwidth", 0.0) : 1e6;

    if (j.contains("preset")) {
        cfg.preset = text(j["preset"], "preset");
        try {
            cfg.scenario = make_preset(cfg.preset, seed);
        } catch (const ConfigError& e) {
            throw ConfigRangeError("preset", e.what());
        }
        if (pipeline) {
            cfg.scenario.pipeline = *pipeline;
            cfg.scenario.norms = ContextNorms::for_pipeline(*pipeline);
        }
        if (j.contains("reference_bandwidth")) cfg.scenario.reference_bandwidth = ref_bw;
    } else {
        if (!pipeline) throw ConfigRangeError("pipeline", "config needs 'preset' or 'pipeline'");
        cfg.scenario = custom_scenario("custom", *pipeline, ref_bw, seed);
    }
    Scenario& s = cfg.scenario;
    s.seed = seed;
    if (j.contains("trace")) s.sections = {parse_trace(j["trace"])};
    if (cfg.mode == RunMode::sim && s.sections.empty())
        throw ConfigRangeError("trace", "sim mode needs 'preset' or 'trace'");

    PolicyConfig& p = s.policy;
    if (j.contains("out")) cfg.out = text(j["out"], "out");
    if (j.contains("objective"))
        s.objective = choice<Objective>(j["objective"], "objective",
                                        {{"latency", Objective::latency}, {"cpu", Objective::cpu}, {"power", Objective::power}});
    if (j.contains("gamma")) p.gamma = at_least(j["gamma"], "gamma", 1.0);
    if (j.contains("forcing_i")) p.i_param = above(j["forcing_i"], "forcing_i", 1.0);
    if (j.contains("forcing_ratio")) p.ratio = above(j["forcing_ratio"], "forcing_ratio", 1.0);
    if (j.contains("horizon_mode"))
        p.horizon_mode = choice<ForcedSchedule::Mode>(j["horizon_mode"], "horizon_mode",
                                                      {{"known", ForcedSchedule::Mode::known_horizon},
                                                       {"unknown", ForcedSchedule::Mode::unknown_horizon}});
    if (j.contains("horizon")) p.horizon = count_at_least(j["horizon"], "horizon", 1);
    if (j.contains("theta")) p.drift_threshold = above(j["theta"], "theta", 0.0);
    if (j.contains("drift_window")) p.drift_window = count_at_least(j["drift_window"], "drift_window", 1);
    if (j.contains("consecutive_needed"))
        p.consecutive_needed = count_at_least(j["consecutive_needed"], "consecutive_needed", 1);
    if (j.contains("drift_min_samples")) p.drift_min_samples = unsigned_int(j["drift_min_samples"], "drift_min_samples");
    if (j.contains("sigma_nonkey")) s.weights.sigma_nonkey = in_open(j["sigma_nonkey"], "sigma_nonkey", 0.0, 1.0);
    if (j.contains("sigma_key")) s.weights.sigma_key = in_open(j["sigma_key"], "sigma_key", 0.0, 1.0);
    if (!(s.weights.sigma_nonkey < s.weights.sigma_key))
        throw ConfigRangeError("sigma_nonkey", fmt::format("sigma_nonkey = {} must be < sigma_key = {}",
                                                           s.weights.sigma_nonkey, s.weights.sigma_key));
    p.beta.sigma_key = s.weights.sigma_key;
    if (j.contains("entropy_threshold"))
        s.weights.threshold = in_open(j["entropy_threshold"], "entropy_threshold", 0.0, 1.0);
    if (j.contains("entropy_mode"))
        s.entropy_mode = choice<EntropyMode>(j["entropy_mode"], "entropy_mode",
                                             {{"marginal", EntropyMode::marginal}, {"pairwise", EntropyMode::pairwise}});
    if (j.contains("n_alpha")) p.beta.n_alpha = above(j["n_alpha"], "n_alpha", 0.0);
    if (j.contains("n_x")) p.beta.n_x = at_least(j["n_x"], "n_x", 0.0);
    if (j.contains("n_v")) p.beta.n_v = above(j["n_v"], "n_v", 0.0);
    if (j.contains("epsilon")) p.beta.epsilon = in_open(j["epsilon"], "epsilon", 0.0, 1.0);
    if (j.contains("direction_rule"))
        p.direction_rule = choice<DirectionRule>(j["direction_rule"], "direction_rule",
                                                 {{"standard", DirectionRule::standard}, {"paper", DirectionRule::standard}, {"inverted", DirectionRule::inverted}});
    if (j.contains("start_in_update_window"))
        p.start_in_update_window = boolean(j["start_in_update_window"], "start_in_update_window");
    if (j.contains("noise_bound")) s.noise_bound = at_least(j["noise_bound"], "noise_bound", 0.0);
    if (j.contains("noise_kind"))
        s.noise_kind = choice<NoiseKind>(j["noise_kind"], "noise_kind",
                                         {{"uniform", NoiseKind::uniform}, {"gaussian", NoiseKind::truncated_gaussian}});
    if (j.contains("overhead")) s.overhead = at_least(j["overhead"], "overhead", 0.0);
    if (j.contains("cloud_seconds_per_unit"))
        s.cloud_seconds_per_unit = above(j["cloud_seconds_per_unit"], "cloud_seconds_per_unit", 0.0);
    if (j.contains("frame_bytes")) s.frame_bytes = count_at_least(j["frame_bytes"], "frame_bytes", 2);

    LiveOptions& live = cfg.live;
    if (j.contains("release_address")) {
        live.release_address = text(j["release_address"], "release_address");
        Endpoint::parse(*live.release_address);
    }
    if (j.contains("listen")) {
        cfg.listen = text(j["listen"], "listen");
        Endpoint::parse(*cfg.listen);
    }
    if (j.contains("frames")) live.frames = count_at_least(j["frames"], "frames", 1);
    if (j.contains("seconds_per_unit")) live.seconds_per_unit = above(j["seconds_per_unit"], "seconds_per_unit", 0.0);
    if (j.contains("link_bandwidth")) live.press.link_bandwidth = at_least(j["link_bandwidth"], "link_bandwidth", 0.0);
    if (j.contains("timeout_multiplier"))
        live.press.timeout_multiplier = above(j["timeout_multiplier"], "timeout_multiplier", 0.0);
    if (j.contains("timeout_floor")) live.press.timeout_floor = above(j["timeout_floor"], "timeout_floor", 0.0);
    if (j.contains("initial_timeout")) live.press.initial_timeout = above(j["initial_timeout"], "initial_timeout", 0.0);
    if (j.contains("timeout_feedback"))
        live.press.timeout_as_feedback =
            choice<bool>(j["timeout_feedback"], "timeout_feedback", {{"timeout", true}, {"discard", false}});

    p.validate();
    s.weights.validate();
    return cfg;
}

ExperimentConfig load_config(const std::string& path, const ConfigOverrides& overrides) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigParseError(fmt::format("cannot read config '{}'", path));
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), overrides);
}

} // namespace elastic
