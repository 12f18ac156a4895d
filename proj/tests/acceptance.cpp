// Acceptance gate: one PASS/FAIL line per criterion, non-zero exit on any failure.

#include "elastic/config.hpp"
#include "elastic/harness.hpp"
#include "elastic/policy.hpp"
#include "elastic/runtime.hpp"
#include "elastic/scenarios.hpp"
#include "elastic/sim.hpp"
#include "elastic/wire.hpp"
#include "net_support.hpp"
#include "support.hpp"

#include <fmt/format.h>

#include <chrono>
#include <unistd.h>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <random>
#include <sstream>

using namespace elastic;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void criterion(int id, const std::string& title, double budget_s, const std::function<Outcome()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, fmt::format("exception: {}", e.what())};
    }
    const double took = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (took >= budget_s) {
        o.pass = false;
        o.detail += fmt::format("; over time budget {:.0f} s", budget_s);
    }
    if (!o.pass) ++failures;
    fmt::print("{}  {:>2}  {}  ({}; {:.2f} s)\n", o.pass ? "PASS" : "FAIL", id, title, o.detail, took);
    std::fflush(stdout);
}

double phase_mean(const PolicyRun& run, std::uint64_t begin, std::uint64_t end) {
    double s = 0;
    for (std::uint64_t f = begin; f < end; ++f) s += run.rows[f].latency;
    return s / static_cast<double>(end - begin);
}

const Segment& phase(const SectionResult& sec, const std::string& label) {
    for (const auto& p : sec.phases)
        if (p.label == label) return p;
    throw std::runtime_error("missing phase " + label);
}

const SectionResult& section(const ExperimentResult& r, const std::string& name) {
    for (const auto& s : r.sections)
        if (s.name == name) return s;
    throw std::runtime_error("missing section " + name);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// ---------------------------------------------------------------------------

Outcome predictor_equivalence() {
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> g(0.0, 1.0);
    double worst = 0.0;
    for (int stream = 0; stream < 100; ++stream) {
        const std::size_t d = 1 + rng() % 8;
        const std::size_t n = rng() % 201;
        const double gamma = 1.0 + 4.0 * std::uniform_real_distribution<double>(0, 1)(rng);
        RidgePredictor p(gamma, d);
        std::vector<oracle::Vec> xs;
        oracle::Vec ys;
        for (std::size_t s = 0; s < n; ++s) {
            oracle::Vec x(d);
            Vector v(static_cast<Eigen::Index>(d));
            for (std::size_t i = 0; i < d; ++i) v[i] = x[i] = g(rng);
            const double y = 5.0 * g(rng);
            xs.push_back(x);
            ys.push_back(y);
            p.observe(v, y);
            if (s % 13 == 0) (void)p.estimate();
        }
        const oracle::Vec want = n ? oracle::batch_ridge(xs, ys, gamma, d) : oracle::Vec(d, 0.0);
        const Vector got = p.estimate();
        double scale = 0, err = 0;
        for (std::size_t i = 0; i < d; ++i) {
            scale = std::max(scale, std::abs(want[i]));
            err = std::max(err, std::abs(got[i] - want[i]));
        }
        worst = std::max(worst, scale > 0 ? err / scale : err);
    }
    return {worst < 1e-9, fmt::format("100 streams, max relative error {:.2e}", worst)};
}

Outcome forced_exactness() {
    const auto a = forced_sequence(10000, 10);
    std::vector<std::uint64_t> tens;
    for (std::uint64_t t = 10; t <= 10000; t += 10) tens.push_back(t);
    const auto b = forced_sequence(16, 4);
    const bool ok = a == tens && a == oracle::forced_by_scan(10000, 10) && b == std::vector<std::uint64_t>{4, 8, 12, 16} &&
                    b == oracle::forced_by_scan(16, 4);
    return {ok, fmt::format("|S(10000,10)| = {}, S(16,4) size {}", a.size(), b.size())};
}

Outcome selection_brute_force() {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int mismatches = 0, forced = 0, filtered = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        Pipeline p;
        const std::size_t n = 1 + rng() % 8;
        p.input_bytes = 1 + rng() % 8'000'000;
        for (std::size_t i = 0; i < n; ++i) p.stages.push_back(Stage{"s", 3 * u(rng), u(rng), 1 + rng() % 8'000'000});
        const auto acts = enumerate_actions(p);
        const auto norms = ContextNorms::for_pipeline(p);

        // random SPD Q = gamma I + sum v v^T and arbitrary p
        const double gamma = 1.0 + 5 * u(rng);
        Matrix q = gamma * Matrix::Identity(kContextDim, kContextDim);
        const int k = static_cast<int>(rng() % 30);
        for (int s = 0; s < k; ++s) {
            Vector v = Vector::Random(kContextDim);
            q += v * v.transpose();
        }
        Vector pv = 3.0 * Vector::Random(kContextDim);
        const auto pred = RidgePredictor::from_parts(gamma, q, pv, static_cast<std::uint64_t>(k));

        std::vector<Vector> ctx;
        std::vector<double> local;
        const double cpu = 0.3 + 2 * u(rng);
        for (const auto& a : acts) {
            ctx.push_back(context_of(p, a, norms));
            local.push_back(on_robot_cost(p, a, cpu));
        }
        DirectionFilter filter;
        if (rng() % 2) filter.record(acts[rng() % (acts.size() - 1)], 3 * u(rng), 3 * u(rng));

        SelectionInput in;
        in.predictor = &pred;
        in.beta = 6 * u(rng);
        in.sigma = u(rng);
        in.actions = acts;
        in.contexts = ctx;
        in.local_costs = local;
        in.forced = rng() % 4 == 0;
        in.filter = filter.populated() ? &filter : nullptr;
        in.rule = rng() % 2 ? DirectionRule::standard : DirectionRule::inverted;
        const Decision d = select_action(in);
        forced += in.forced;
        filtered += in.filter && !in.forced;

        oracle::Mat qm(kContextDim, oracle::Vec(kContextDim));
        oracle::Vec pm(kContextDim);
        for (std::size_t i = 0; i < kContextDim; ++i) {
            pm[i] = pv[i];
            for (std::size_t j = 0; j < kContextDim; ++j) qm[i][j] = q(i, j);
        }
        const auto alpha = oracle::solve(qm, pm);

        double best = std::numeric_limits<double>::infinity();
        std::size_t arg = 0;
        std::uint64_t arg_bytes = 0;
        for (const auto& a : acts) {
            if (in.forced && a.is_pure_local) continue;
            if (in.filter && !in.forced && !a.is_pure_local && a.split_index != filter.last_action->split_index &&
                filter.last_predicted != *filter.last_actual) {
                const bool over = filter.last_predicted > *filter.last_actual;
                const bool want_less = in.rule == DirectionRule::standard ? over : !over;
                const auto pivot = filter.last_action->transmit_bytes;
                if (want_less ? a.transmit_bytes >= pivot : a.transmit_bytes <= pivot) continue;
            }
            double score = local[a.split_index];
            if (!a.is_pure_local) {
                const oracle::Vec v(ctx[a.split_index].data(), ctx[a.split_index].data() + kContextDim);
                score += oracle::dot(alpha, v) - in.beta * std::sqrt((1 - in.sigma) * oracle::quad_inverse(qm, v));
            }
            const bool better = score < best - 1e-12 ||
                                (std::abs(score - best) <= 1e-12 && a.transmit_bytes < arg_bytes);
            if (better) {
                best = score;
                arg = a.split_index;
                arg_bytes = a.transmit_bytes;
            }
        }
        if (d.action.split_index != arg) ++mismatches;
    }
    return {mismatches == 0,
            fmt::format("1000 states ({} forced, {} filtered), {} mismatches", forced, filtered, mismatches)};
}

Outcome sublinear_regret() {
    double elastic_sum = 0, local_sum = 0, regret_sum = 0;
    const int seeds = 20;
    std::uint64_t horizon = 0;
    for (int seed = 1; seed <= seeds; ++seed) {
        const Scenario s = make_preset("stationary", static_cast<std::uint64_t>(seed));
        const Section& sec = s.sections.front();
        horizon = sec.trace.horizon;
        const auto el = run_policy(s, sec, PolicyKind::elastic);
        const auto lo = run_policy(s, sec, PolicyKind::static_local);
        elastic_sum += el.regret.loglog_slope;
        local_sum += lo.regret.loglog_slope;
        regret_sum += el.regret.cumulative.back();
    }
    const double e = elastic_sum / seeds, l = local_sum / seeds;
    const double t = static_cast<double>(horizon);
    return {e < 0.95 && l > 0.98,
            fmt::format("T = {}, mean slope elastic {:.3f}, static-local {:.3f}; mean final regret {:.1f} vs "
                        "T^0.75 ln T = {:.0f} (reported only)",
                        horizon, e, l, regret_sum / seeds, std::pow(t, 0.75) * std::log(t))};
}

Outcome table1_ordering() {
    const auto r = run_experiment(make_preset("slam-sweep", 1));
    std::string detail;
    bool ok = true;
    for (const char* name : {"0.512M", "1M", "2M", "5M", "20M"}) {
        const auto& sec = section(r, name);
        const auto& ph = phase(sec, "steady");
        const double e = phase_mean(sec.run(PolicyKind::elastic), ph.begin, ph.end);
        const double c = phase_mean(sec.run(PolicyKind::static_cloud), ph.begin, ph.end);
        const double l = phase_mean(sec.run(PolicyKind::static_local), ph.begin, ph.end);
        detail += fmt::format("{}: E {:.3f} C {:.3f} L {:.3f}; ", name, e, c, l);
        const std::string n = name;
        if (n == "0.512M" || n == "1M") ok &= e < std::min(c, l);
        if (n == "5M" || n == "20M") ok &= std::abs(e - c) <= 0.01 * c && e < l;
    }
    detail.resize(detail.size() - 2);
    return {ok, detail};
}

Outcome table2_glitch() {
    const Scenario s = make_preset("grasp-glitch", 1);
    const auto r = run_experiment(s);
    bool ok = true;
    std::string detail;
    for (const char* name : {"5M->1M", "10M->1M"}) {
        const auto& sec = section(r, name);
        const std::uint64_t glitch = sec.phases[1].begin;
        const std::uint64_t horizon = sec.run(PolicyKind::oracle).rows.size();
        const auto& el = sec.run(PolicyKind::elastic);
        const double oracle = phase_mean(sec.run(PolicyKind::oracle), glitch, horizon);
        const double cloud = phase_mean(sec.run(PolicyKind::static_cloud), glitch, horizon);

        // first frame where the trailing 50-frame mean is within 10% of the oracle
        const std::uint64_t w = 50;
        std::optional<std::uint64_t> reached;
        for (std::uint64_t f = glitch + w; f <= glitch + 500 && f <= horizon; ++f)
            if (phase_mean(el, f - w, f) <= 1.1 * oracle) {
                reached = f - glitch;
                break;
            }

        std::optional<std::uint64_t> fired;
        for (auto d : el.drift_events)
            if (d >= glitch) {
                fired = d;
                break;
            }
        std::uint64_t observed = 0;
        if (fired)
            for (std::uint64_t f = glitch; f <= *fired; ++f) observed += el.rows[f].observed_e.has_value();

        const bool sec_ok = reached && cloud > 2 * oracle && fired && observed <= s.policy.consecutive_needed;
        ok &= sec_ok;
        detail += fmt::format("{}: oracle {:.3f}, cloud {:.3f}, within 10% after {} frames, drift after {} observed; ",
                              name, oracle, cloud, reached ? fmt::format("{}", *reached) : "never",
                              fired ? fmt::format("{}", observed) : "none");
    }
    detail.resize(detail.size() - 2);
    return {ok, detail};
}

Outcome table3_cpu() {
    const Scenario s = make_preset("dialogue-cpu", 1);
    const auto r = run_experiment(s);
    const auto& sec = r.sections.front();
    const auto& el = sec.run(PolicyKind::elastic);
    const auto& before = phase(sec, "before");
    const auto& after = phase(sec, "after-1");
    const auto st = summarize_rows(el.rows, {before, after});
    const auto acts = enumerate_actions(s.pipeline);
    const auto bytes_before = acts[st[0].modal_split].transmit_bytes;
    const auto bytes_after = acts[st[1].modal_split].transmit_bytes;
    const double local = phase_mean(sec.run(PolicyKind::static_local), after.begin, after.end);
    const bool ok = bytes_after > bytes_before && st[1].mean_latency < local;
    return {ok, fmt::format("modal split {} -> {} ({} -> {} bytes), post-change latency {:.3f} vs pure local {:.3f}",
                            st[0].modal_split, st[1].modal_split, bytes_before, bytes_after, st[1].mean_latency, local)};
}

Outcome runtime_invariance() {
    Pipeline p;
    p.input_bytes = 8192;
    p.stages = {Stage{"a", 0.2, 0.01, 6000}, Stage{"b", 0.3, 0.01, 2500}, Stage{"c", 0.2, 0.02, 900},
                Stage{"d", 0.1, 0.01, 64}};
    ReleaseServer server(p);
    server.start(Endpoint::parse("127.0.0.1:0"));
    PressClient client(Endpoint{"127.0.0.1", server.port()});
    const StageExecutor ex;
    PressNode press(p, ex, &client);
    const auto acts = enumerate_actions(p);

    std::mt19937_64 rng(8);
    int mismatched = 0, bad_status = 0;
    for (std::uint64_t f = 0; f < 100; ++f) {
        std::vector<std::uint8_t> in(p.input_bytes);
        for (auto& b : in) b = static_cast<std::uint8_t>(rng());
        const auto want = ex.run_range(p, 0, p.size(), in, false);
        for (const auto& a : acts) {
            const auto out = press.execute(1000 + f, in, a, false);
            mismatched += out.result != want;
            bad_status += out.status != OffloadStatus::ok;
        }
    }

    // malformed requests over one raw connection, one ERROR each
    netsupport::RawConn c(server.port());
    using netsupport::header_bytes;
    auto pad = [](std::vector<std::uint8_t> h, std::size_t n) {
        h.resize(h.size() + n, 0x5A);
        return h;
    };
    const std::vector<std::pair<std::vector<std::uint8_t>, std::uint64_t>> bad = {
        {std::vector<std::uint8_t>(20, 0x00), 0}, {pad(header_bytes(9, 0, 501, 0, 4), 4), 501},
        {pad(header_bytes(1, 7, 502, 0, 0), 0), 502}, {pad(header_bytes(1, 0, 503, 4, 16), 16), 503},
        {pad(header_bytes(1, 1, 504, 0, 1), 1), 504}};
    int wrong_errors = 0;
    for (const auto& [bytes, id] : bad) {
        c.send(bytes);
        const auto reply = c.next();
        if (!reply || reply->type != wire::MsgType::error || reply->frame_id != id) ++wrong_errors;
        if (c.next(100)) ++wrong_errors;
    }
    // frame-id matching on a burst of pipelined requests
    int id_mismatch = 0;
    for (std::uint64_t id = 600; id < 650; ++id) c.send(pad(header_bytes(1, 0, id, 3, 900), 900));
    for (std::uint64_t id = 600; id < 650; ++id) {
        const auto reply = c.next();
        if (!reply || reply->frame_id != id || reply->type != wire::MsgType::result) ++id_mismatch;
    }
    server.stop();
    const bool ok = mismatched == 0 && bad_status == 0 && wrong_errors == 0 && id_mismatch == 0;
    return {ok, fmt::format("500 executions, {} output mismatches, {} failed offloads, {} malformed-request faults, "
                            "{} id mismatches",
                            mismatched, bad_status, wrong_errors, id_mismatch)};
}

Outcome wire_golden() {
    wire::Message m;
    m.type = wire::MsgType::frame;
    m.frame_id = 1;
    const std::vector<std::uint8_t> golden = {0x45, 0x4C, 0x52, 0x53, 0x01, 0x00, 0x01, 0x00, 0x00, 0x00,
                                              0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00};
    const bool golden_ok = wire::encode(m) == golden;
    std::mt19937_64 rng(5);
    int failures_rt = 0;
    for (int i = 0; i < 10000; ++i) {
        wire::Message x;
        x.type = static_cast<wire::MsgType>(rng() % 4);
        x.frame_id = rng();
        x.split_index = static_cast<std::uint16_t>(rng());
        x.payload.resize(rng() % 512);
        for (auto& b : x.payload) b = static_cast<std::uint8_t>(rng());
        const auto bytes = wire::encode(x);
        if (bytes.size() != 20 + x.payload.size() || wire::decode(bytes) != x) ++failures_rt;
    }
    return {golden_ok && failures_rt == 0,
            fmt::format("golden {}, {} of 10000 roundtrips failed", golden_ok ? "matches" : "differs", failures_rt)};
}

Outcome determinism() {
    const fs::path root = fs::temp_directory_path() / fmt::format("elastic-accept-{}", ::getpid());
    std::size_t compared = 0, differing = 0;
    for (const auto& name : preset_names()) {
        std::vector<std::string> files;
        for (const char* run : {"a", "b"}) {
            auto cfg = preset_config(name, 17);
            cfg.out = (root / name / run).string();
            std::ostringstream log;
            files = run_experiment_config(cfg, log).files;
        }
        for (const auto& f : files) {
            const auto rel = fs::path(f).filename();
            ++compared;
            differing += slurp(root / name / "a" / rel) != slurp(root / name / "b" / rel);
        }
    }
    fs::remove_all(root);
    return {compared > 0 && differing == 0, fmt::format("{} artifacts compared, {} differ", compared, differing)};
}

} // namespace

int main() {
    criterion(1, "predictor matches the batch ridge closed form", 5, predictor_equivalence);
    criterion(2, "forced-sampling sequences are exact", 1, forced_exactness);
    criterion(3, "selection equals exhaustive argmin", 10, selection_brute_force);
    criterion(4, "empirical regret is sublinear in a stationary environment", 120, sublinear_regret);
    criterion(5, "slam-sweep latency ordering across bandwidths", 60, table1_ordering);
    criterion(6, "grasp-glitch drift detection and recovery", 60, table2_glitch);
    criterion(7, "dialogue-cpu adapts toward the cloud when the robot CPU halves", 60, table3_cpu);
    criterion(8, "runtime output is split-invariant and protocol-total", 30, runtime_invariance);
    criterion(9, "wire format golden bytes and roundtrip", 5, wire_golden);
    criterion(10, "same seed, byte-identical CSVs for every preset", 600, determinism);
    fmt::print("{} of 10 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
