#include "elastic/harness.hpp"

#include "elastic/error.hpp"
#include "elastic/runtime.hpp"
#include "elastic/scenarios.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <thread>

namespace elastic {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kCheckpointFormat = "elastic-checkpoint v1";

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw RuntimeFailure(fmt::format("cannot open '{}' for writing", path.string()));
    return out;
}

std::string opt_num(const std::optional<double>& v) { return v ? fmt::format("{:.6g}", *v) : std::string{}; }

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

// Sensor payload of the pipeline's input size for live runs.
std::vector<std::uint8_t> live_input(std::uint64_t seed, std::uint64_t frame, std::size_t size) {
    std::vector<std::uint8_t> out(size);
    std::uint64_t state = splitmix64(seed ^ splitmix64(frame + 0xF00Dull));
    for (std::size_t i = 0; i < size; ++i) {
        if (i % 8 == 0) state = splitmix64(state);
        out[i] = static_cast<std::uint8_t>(state >> (8 * (i % 8)));
    }
    return out;
}

void write_rows(const fs::path& path, const std::vector<MetricsRow>& rows, RunArtifacts& art) {
    auto out = open_out(path);
    write_metrics_csv(out, rows);
    art.files.push_back(path.string());
}

void write_summaries(const fs::path& dir, const std::string& title, const std::vector<SummaryRow>& rows,
                     RunArtifacts& art) {
    {
        auto out = open_out(dir / "summary.txt");
        write_summary_text(out, title, rows);
    }
    {
        auto out = open_out(dir / "summary.csv");
        write_summary_csv(out, rows);
    }
    art.files.push_back((dir / "summary.txt").string());
    art.files.push_back((dir / "summary.csv").string());
}

RunArtifacts run_sim(const ExperimentConfig& cfg, std::ostream& log) {
    const Scenario& s = cfg.scenario;
    const fs::path dir(cfg.out);
    fs::create_directories(dir);

    RunArtifacts art;
    art.result = run_experiment(s);
    const double bound = alpha_bound(s);
    if (bound > s.policy.beta.n_alpha)
        log << fmt::format("note: confidence scale n_alpha = {:g} is below the largest ||alpha*|| = {:.3g}; "
                           "beta is a tuned radius, not a worst-case bound\n",
                           s.policy.beta.n_alpha, bound);

    for (const auto& sec : art.result.sections) {
        for (const auto& run : sec.runs)
            write_rows(dir / fmt::format("{}__{}__{}.csv", file_stem(s.name), file_stem(sec.name), policy_name(run.kind)),
                       run.rows, art);
        const auto& el = sec.run(PolicyKind::elastic);
        if (el.norm_violations > 0)
            log << fmt::format("note: section {}: {} context vectors exceed n_v\n", sec.name, el.norm_violations);
        for (auto f : el.drift_events) log << fmt::format("section {}: drift detected at frame {}\n", sec.name, f);
    }

    const auto rows = summary_rows(art.result);
    write_summaries(dir, fmt::format("scenario {} (seed {}, objective {})", s.name, s.seed, objective_name(s.objective)),
                    rows, art);
    write_checkpoint((dir / "checkpoint.json").string(), art.result);
    art.files.push_back((dir / "checkpoint.json").string());
    return art;
}

RunArtifacts run_live(const ExperimentConfig& cfg, std::ostream& log) {
    const Scenario& s = cfg.scenario;
    const LiveOptions& live = cfg.live;
    const fs::path dir(cfg.out);
    fs::create_directories(dir);

    std::optional<ReleaseServer> server;
    Endpoint ep;
    if (live.release_address) {
        ep = Endpoint::parse(*live.release_address);
    } else {
        server.emplace(s.pipeline, StageExecutor{live.seconds_per_unit, 1.0});
        server->start(Endpoint::parse("127.0.0.1:0"));
        ep = Endpoint{"127.0.0.1", server->port()};
        log << fmt::format("started release node on {}\n", ep.to_string());
    }

    PressClient client(ep, live.press);
    try {
        client.connect();
    } catch (const RuntimeFailure& e) {
        throw RuntimeFailure(fmt::format("release node {} unreachable: {}", ep.to_string(), e.what()));
    }
    wire::Message ping;
    ping.type = wire::MsgType::ping;
    const OffloadReply pong = client.request(ping);
    if (pong.status != OffloadStatus::ok || pong.message.type != wire::MsgType::ping)
        throw RuntimeFailure(fmt::format("release node {} did not answer PING: {}", ep.to_string(), pong.detail));

    PolicyConfig pc = s.policy;
    if (pc.horizon_mode == ForcedSchedule::Mode::known_horizon) pc.horizon = live.frames;
    pc.local_cost_weight = live.seconds_per_unit;
    ElasticPolicy policy(s.pipeline, s.norms, pc);
    PressNode press(s.pipeline, StageExecutor{live.seconds_per_unit, 1.0}, &client);
    const FrameSource frames{s.frame_bytes, s.seed, s.entropy_mode};
    const MetricModel& mm = s.metrics;

    std::vector<MetricsRow> rows;
    std::optional<double> feedback;
    std::size_t failures = 0;
    for (std::uint64_t f = 0; f < live.frames; ++f) {
        const FrameWeight w = step_weight(frames.entropy(f), s.weights);
        const Decision d = policy.step(w, feedback, 1.0);
        const auto input = live_input(s.seed, f, s.pipeline.input_bytes);
        const PressOutcome o = press.execute(f, input, d.action, d.update_window);
        if (o.status != OffloadStatus::ok && !d.action.is_pure_local) {
            ++failures;
            if (failures <= 5) log << fmt::format("frame {}: offload {} ({})\n", f, offload_status_name(o.status), o.detail);
        }
        feedback = d.action.is_pure_local ? std::nullopt : o.feedback;

        MetricsRow r;
        r.frame_id = f;
        r.t = d.t;
        r.split_index = d.action.split_index;
        r.forced = d.forced;
        r.sigma = d.sigma;
        if (!d.action.is_pure_local) r.predicted_e = d.predicted_e;
        r.observed_e = feedback;
        r.latency = o.latency;
        const double tx = live.press.link_bandwidth > 0.0
                              ? static_cast<double>(d.action.transmit_bytes) / live.press.link_bandwidth
                              : 0.0;
        r.cpu_rel = mm.cpu_local_per_s * o.local_time + mm.cpu_tx_per_s * tx;
        r.power_rel = mm.power_idle + mm.power_local_per_s * o.local_time + mm.power_tx_per_s * tx;
        r.bandwidth = live.press.link_bandwidth;
        r.update_window = d.update_window;
        rows.push_back(r);
    }
    if (failures > 5) log << fmt::format("{} offloads failed in total\n", failures);

    RunArtifacts art;
    write_rows(dir / "live__elastic.csv", rows, art);
    std::vector<SummaryRow> summary;
    for (const auto& st : summarize_rows(rows, segments_by_window(rows)))
        summary.push_back(SummaryRow{"live", st.label, st.begin, st.end, "elastic", st, 0.0});
    write_summaries(dir, fmt::format("live run against {} ({} frames)", ep.to_string(), live.frames), summary, art);
    if (server) server->stop();
    return art;
}

} // namespace

std::string file_stem(const std::string& label) {
    std::string out;
    for (char c : label) {
        if (std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '_') {
            out += c;
        } else if (!out.empty() && out.back() != '-') {
            out += '-';
        }
    }
    while (!out.empty() && out.back() == '-') out.pop_back();
    return out.empty() ? "section" : out;
}

std::vector<SummaryRow> summary_rows(const ExperimentResult& result) {
    std::vector<SummaryRow> out;
    for (const auto& sec : result.sections) {
        for (const auto& phase : sec.phases) {
            if (phase.end <= phase.begin) continue;
            for (const auto& run : sec.runs) {
                const auto stats = summarize_rows(run.rows, {phase});
                out.push_back(SummaryRow{sec.name, phase.label, phase.begin, phase.end, policy_name(run.kind),
                                         stats.front(), run.regret.loglog_slope});
            }
        }
    }
    return out;
}

void write_summary_text(std::ostream& out, const std::string& title, const std::vector<SummaryRow>& rows) {
    out << title << '\n';
    std::string section, phase;
    for (const auto& r : rows) {
        if (r.section != section || r.phase != phase) {
            section = r.section;
            phase = r.phase;
            out << fmt::format("\n{} / {} [{}, {})\n", section, phase, r.begin, r.end);
            out << fmt::format("  {:<14}{:>10}{:>10}{:>11}{:>7}{:>9}{:>9}\n", "policy", "latency", "cpu_rel",
                               "power_rel", "split", "frames", "slope");
        }
        out << fmt::format("  {:<14}{:>10.3f}{:>10.3f}{:>11.1f}{:>7}{:>9}{:>9.3f}\n", r.policy, r.stats.mean_latency,
                           r.stats.mean_cpu, r.stats.mean_power, r.stats.modal_split, r.stats.frames, r.regret_slope);
    }
}

void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows) {
    out << "section,phase,begin,end,policy,frames,mean_latency,mean_cpu,mean_power,modal_split,regret_slope,"
           "final_regret\n";
    for (const auto& r : rows)
        out << fmt::format("{},{},{},{},{},{},{:.9g},{:.9g},{:.9g},{},{:.9g},{}\n", r.section, r.phase, r.begin, r.end,
                           r.policy, r.stats.frames, r.stats.mean_latency, r.stats.mean_cpu, r.stats.mean_power,
                           r.stats.modal_split, r.regret_slope, opt_num(r.stats.final_regret));
}

void write_checkpoint(const std::string& path, const ExperimentResult& result) {
    json j;
    j["format"] = kCheckpointFormat;
    j["scenario"] = result.scenario;
    j["sections"] = json::array();
    for (const auto& sec : result.sections) {
        const auto& run = sec.run(PolicyKind::elastic);
        if (!run.final_predictor) continue;
        const RidgePredictor& p = *run.final_predictor;
        json q = json::array();
        for (Eigen::Index i = 0; i < p.design().rows(); ++i) {
            json row = json::array();
            for (Eigen::Index k = 0; k < p.design().cols(); ++k) row.push_back(p.design()(i, k));
            q.push_back(row);
        }
        json resp = json::array();
        for (Eigen::Index i = 0; i < p.response().size(); ++i) resp.push_back(p.response()[i]);
        j["sections"].push_back({{"name", sec.name}, {"gamma", p.gamma()}, {"samples", p.samples()}, {"Q", q}, {"p", resp}});
    }
    auto out = open_out(path);
    out << j.dump(2) << '\n';
}

std::vector<std::pair<std::string, RidgePredictor>> read_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw RuntimeFailure(fmt::format("cannot read checkpoint '{}'", path));
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw RuntimeFailure(fmt::format("checkpoint '{}' is not valid JSON: {}", path, e.what()));
    }
    if (j.value("format", "") != kCheckpointFormat)
        throw RuntimeFailure(fmt::format("checkpoint '{}' has an unsupported format", path));
    std::vector<std::pair<std::string, RidgePredictor>> out;
    for (const auto& sec : j.at("sections")) {
        const auto& q = sec.at("Q");
        const auto n = static_cast<Eigen::Index>(q.size());
        Matrix Q(n, n);
        Vector p(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index k = 0; k < n; ++k) Q(i, k) = q.at(i).at(k).get<double>();
            p[i] = sec.at("p").at(i).get<double>();
        }
        out.emplace_back(sec.at("name").get<std::string>(),
                         RidgePredictor::from_parts(sec.at("gamma").get<double>(), Q, p,
                                                    sec.at("samples").get<std::uint64_t>()));
    }
    return out;
}

RunArtifacts run_experiment_config(const ExperimentConfig& cfg, std::ostream& log) {
    return cfg.mode == RunMode::sim ? run_sim(cfg, log) : run_live(cfg, log);
}

void summarize_csv(const std::string& csv_path, Segmentation mode, const std::vector<std::uint64_t>& bounds,
                   std::ostream& text, const std::string& table_path) {
    const auto rows = read_metrics_csv(csv_path);
    if (rows.empty()) throw SchemaError(fmt::format("'{}' has no data rows", csv_path));
    const std::uint64_t first = rows.front().frame_id;
    const std::uint64_t last = rows.back().frame_id + 1;

    std::vector<Segment> segments;
    switch (mode) {
    case Segmentation::window: segments = segments_by_window(rows); break;
    case Segmentation::whole: segments.push_back(Segment{"all", first, last}); break;
    case Segmentation::bounds: {
        std::uint64_t begin = first;
        std::size_t i = 0;
        for (auto b : bounds) {
            if (b <= begin || b >= last)
                throw ConfigError(fmt::format("segment boundary {} must lie strictly inside ({}, {}) and increase",
                                              b, begin, last));
            segments.push_back(Segment{fmt::format("segment-{}", ++i), begin, b});
            begin = b;
        }
        segments.push_back(Segment{fmt::format("segment-{}", ++i), begin, last});
        break;
    }
    }

    std::vector<double> cumulative;
    for (const auto& r : rows)
        if (r.cumulative_regret) cumulative.push_back(*r.cumulative_regret);
    const double slope = cumulative.size() == rows.size() ? loglog_slope(cumulative) : 0.0;

    std::vector<SummaryRow> out;
    const std::string name = fs::path(csv_path).stem().string();
    for (const auto& st : summarize_rows(rows, segments))
        out.push_back(SummaryRow{name, st.label, st.begin, st.end, "-", st, slope});
    write_summary_text(text, fmt::format("summary of {}", csv_path), out);
    if (!table_path.empty()) {
        auto f = open_out(table_path);
        write_summary_csv(f, out);
    }
}

void run_release(const ExperimentConfig& cfg, const Endpoint& listen, const std::atomic<bool>& stop, std::ostream& log) {
    ReleaseServer server(cfg.scenario.pipeline, StageExecutor{cfg.live.seconds_per_unit, 1.0});
    server.start(listen);
    log << fmt::format("release node listening on {}:{} ({} stages)\n", listen.host, server.port(),
                       cfg.scenario.pipeline.size())
        << std::flush;
    while (!stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
    server.stop();
    log << fmt::format("release node stopped after {} replies ({} errors)\n", server.requests_served(),
                       server.errors_sent());
}

} // namespace elastic
