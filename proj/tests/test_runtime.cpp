#include "elastic/error.hpp"
#include "elastic/runtime.hpp"
#include "net_support.hpp"

#include <doctest.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <numeric>
#include <random>

using namespace elastic;
using netsupport::RawConn;
using netsupport::header_bytes;

namespace {

Pipeline four_stage() {
    Pipeline p;
    p.input_bytes = 4096;
    p.stages = {Stage{"a", 0.2, 0.01, 3000}, Stage{"b", 0.3, 0.01, 1500}, Stage{"c", 0.2, 0.02, 700},
                Stage{"d", 0.1, 0.01, 64}};
    return p;
}

std::vector<std::uint8_t> random_bytes(std::mt19937_64& rng, std::size_t n) {
    std::vector<std::uint8_t> out(n);
    for (auto& b : out) b = static_cast<std::uint8_t>(rng());
    return out;
}

// Listening socket that never accepts or answers.
struct BlackHole {
    int fd = -1;
    std::uint16_t port = 0;
    BlackHole() {
        fd = ::socket(AF_INET, SOCK_STREAM, 0);
        sockaddr_in a{};
        a.sin_family = AF_INET;
        ::inet_pton(AF_INET, "127.0.0.1", &a.sin_addr);
        ::bind(fd, reinterpret_cast<sockaddr*>(&a), sizeof a);
        ::listen(fd, 4);
        socklen_t len = sizeof a;
        ::getsockname(fd, reinterpret_cast<sockaddr*>(&a), &len);
        port = ntohs(a.sin_port);
    }
    ~BlackHole() { ::close(fd); }
};

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    auto ranks = [](const std::vector<double>& v) {
        std::vector<std::size_t> idx(v.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
        std::vector<double> r(v.size());
        for (std::size_t i = 0; i < idx.size(); ++i) r[idx[i]] = static_cast<double>(i);
        return r;
    };
    const auto rx = ranks(x), ry = ranks(y);
    const double n = static_cast<double>(x.size());
    double d2 = 0;
    for (std::size_t i = 0; i < x.size(); ++i) d2 += (rx[i] - ry[i]) * (rx[i] - ry[i]);
    return 1 - 6 * d2 / (n * (n * n - 1));
}

} // namespace

TEST_CASE("stage kernels compose across any split") {
    const auto p = four_stage();
    const StageExecutor ex;
    std::mt19937_64 rng(1);
    for (int i = 0; i < 20; ++i) {
        const auto in = random_bytes(rng, 1 + rng() % 5000);
        const auto full = ex.run_range(p, 0, p.size(), in, false);
        CHECK(full.size() == 64);
        for (std::size_t k = 0; k <= p.size(); ++k) {
            const auto prefix = ex.run_range(p, 0, k, in, false);
            CHECK(prefix.size() == (k == 0 ? in.size() : p.stages[k - 1].output_bytes));
            CHECK(ex.run_range(p, k, p.size(), prefix, true) == full);
        }
    }
    // different inputs give different outputs
    CHECK(ex.run_range(p, 0, 4, std::vector<std::uint8_t>{1, 2}, false) !=
          ex.run_range(p, 0, 4, std::vector<std::uint8_t>{1, 3}, false));
}

TEST_CASE("endpoint parsing and listen precedence") {
    const auto ep = Endpoint::parse("10.0.0.2:7450");
    CHECK(ep.host == "10.0.0.2");
    CHECK(ep.port == 7450);
    CHECK_THROWS_AS(Endpoint::parse("nocolon"), ConfigError);
    CHECK_THROWS_AS(Endpoint::parse("h:99999"), ConfigError);
    CHECK_THROWS_AS(Endpoint::parse("h:"), ConfigError);

    CHECK(resolve_listen(std::string("1.2.3.4:5"), "6.7.8.9:10").port == 5);
    CHECK(resolve_listen(std::nullopt, "6.7.8.9:10").port == 10);
    CHECK(resolve_listen(std::nullopt, nullptr).port == 7450);
    CHECK(resolve_listen(std::nullopt, "").port == 7450);
}

TEST_CASE("release node results equal single-process execution") {
    const auto p = four_stage();
    ReleaseServer server(p);
    server.start(Endpoint::parse("127.0.0.1:0"));
    PressClient client(Endpoint{"127.0.0.1", server.port()});
    client.connect();
    const StageExecutor ex;
    std::mt19937_64 rng(2);

    for (std::uint64_t id = 100; id < 140; ++id) {
        const std::size_t k = rng() % p.size();
        const auto in = random_bytes(rng, 1 + rng() % 4096);
        const auto prefix = ex.run_range(p, 0, k, in, false);
        wire::Message m;
        m.type = wire::MsgType::frame;
        m.frame_id = id;
        m.split_index = static_cast<std::uint16_t>(k);
        m.payload = prefix;
        const auto r = client.request(m);
        REQUIRE(r.status == OffloadStatus::ok);
        CHECK(r.message.type == wire::MsgType::result);
        CHECK(r.message.frame_id == id);
        CHECK(r.message.payload == ex.run_range(p, k, p.size(), prefix, false));
    }

    wire::Message ping;
    ping.type = wire::MsgType::ping;
    ping.frame_id = 77;
    const auto pong = client.request(ping);
    CHECK(pong.message.type == wire::MsgType::ping);
    CHECK(pong.message.frame_id == 77);
    server.stop();
}

TEST_CASE("every malformed request gets exactly one ERROR and the connection survives") {
    const auto p = four_stage();
    ReleaseServer server(p);
    server.start(Endpoint::parse("127.0.0.1:0"));
    RawConn c(server.port());

    struct Case {
        std::vector<std::uint8_t> bytes;
        wire::Reason reason;
        std::uint64_t id;
    };
    auto with_payload = [](std::vector<std::uint8_t> h, std::size_t n) {
        h.resize(h.size() + n, 0xEE);
        return h;
    };
    std::vector<std::uint8_t> junk(wire::kHeaderSize, 0x11);
    const std::vector<Case> cases = {
        {junk, wire::Reason::bad_magic, 0},
        {with_payload(header_bytes(2, 0, 11, 0, 5), 5), wire::Reason::unsupported_version, 11},
        {with_payload(header_bytes(1, 9, 12, 0, 3), 3), wire::Reason::unknown_type, 12},
        {with_payload(header_bytes(1, 0, 13, 4, 8), 8), wire::Reason::bad_split, 13},
        {with_payload(header_bytes(1, 0, 14, 40, 0), 0), wire::Reason::bad_split, 14},
        {with_payload(header_bytes(1, 1, 15, 0, 2), 2), wire::Reason::unexpected_type, 15},
        {with_payload(header_bytes(1, 3, 16, 0, 1), 1), wire::Reason::unexpected_type, 16},
    };
    for (const auto& cs : cases) {
        c.send(cs.bytes);
        const auto reply = c.next();
        REQUIRE(reply);
        CHECK(reply->type == wire::MsgType::error);
        CHECK(reply->frame_id == cs.id);
        const auto err = wire::parse_error(*reply);
        REQUIRE(err);
        CHECK(err->first == cs.reason);
        CHECK_FALSE(c.next(150)); // exactly one reply
    }

    // still serving after all of the above
    const auto in = std::vector<std::uint8_t>(100, 3);
    c.send(with_payload(header_bytes(1, 0, 20, 0, 0), 0));
    const auto ok = c.next();
    REQUIRE(ok);
    CHECK(ok->type == wire::MsgType::result);
    CHECK(ok->frame_id == 20);

    // a request cut short by the peer still gets its ERROR
    auto partial = header_bytes(1, 0, 21, 1, 50);
    partial.resize(partial.size() + 10, 1);
    c.send(partial);
    ::shutdown(c.fd, SHUT_WR);
    const auto trunc = c.next();
    REQUIRE(trunc);
    CHECK(wire::parse_error(*trunc)->first == wire::Reason::truncated);
    CHECK(trunc->frame_id == 21);
    server.stop();
}

TEST_CASE("press node output is invariant to the split") {
    const auto p = four_stage();
    ReleaseServer server(p);
    server.start(Endpoint::parse("127.0.0.1:0"));
    PressClient client(Endpoint{"127.0.0.1", server.port()});
    const StageExecutor ex;
    PressNode press(p, ex, &client);
    PressNode offline(p, ex, nullptr);
    const auto acts = enumerate_actions(p);
    std::mt19937_64 rng(3);
    for (std::uint64_t f = 0; f < 25; ++f) {
        const auto in = random_bytes(rng, p.input_bytes);
        const auto want = ex.run_range(p, 0, p.size(), in, false);
        const auto local = offline.execute(f, in, acts.back(), false);
        CHECK(local.result == want);
        CHECK_FALSE(local.feedback);
        for (const auto& a : acts) {
            const auto out = press.execute(f, in, a, f % 5 == 0);
            CHECK(out.result == want);
            if (!a.is_pure_local) {
                CHECK(out.status == OffloadStatus::ok);
                REQUIRE(out.feedback);
                CHECK(*out.feedback > 0.0);
            }
            CHECK(out.latency >= out.local_time * 0.999);
        }
    }
    server.stop();
}

TEST_CASE("dead endpoint falls back to local with pessimistic feedback") {
    const auto p = four_stage();
    std::uint16_t port = 0;
    {
        ReleaseServer s(p);
        s.start(Endpoint::parse("127.0.0.1:0"));
        port = s.port();
    }
    PressOptions opt;
    opt.initial_timeout = 1.0;
    PressClient client(Endpoint{"127.0.0.1", port}, opt);
    CHECK_THROWS_AS(client.connect(), RuntimeFailure);
    const StageExecutor ex;
    PressNode press(p, ex, &client);
    const std::vector<std::uint8_t> in(p.input_bytes, 9);
    const auto out = press.execute(1, in, enumerate_actions(p)[1], false);
    CHECK(out.status == OffloadStatus::refused);
    CHECK(out.fallback);
    CHECK(out.result == ex.run_range(p, 0, p.size(), in, false));
    REQUIRE(out.feedback);
    CHECK(*out.feedback == doctest::Approx(1.0));

    opt.timeout_as_feedback = false;
    PressClient discard(Endpoint{"127.0.0.1", port}, opt);
    PressNode press2(p, ex, &discard);
    CHECK_FALSE(press2.execute(2, in, enumerate_actions(p)[0], false).feedback);
}

TEST_CASE("silent release node times out and the frame still completes") {
    const auto p = four_stage();
    BlackHole hole;
    PressOptions opt;
    opt.initial_timeout = 0.2;
    opt.timeout_floor = 0.2;
    PressClient client(Endpoint{"127.0.0.1", hole.port}, opt);
    const StageExecutor ex{0.01, 1.0};
    PressNode press(p, ex, &client);
    const std::vector<std::uint8_t> in(p.input_bytes, 5);
    const auto want = ex.run_range(p, 0, p.size(), in, false);

    const auto a = press.execute(1, in, enumerate_actions(p)[2], false);
    CHECK(a.status == OffloadStatus::timeout);
    CHECK(a.result == want);
    CHECK(*a.feedback == doctest::Approx(0.2));
    CHECK(a.latency >= 0.2);
    CHECK(a.latency < 0.2 + p.total_local_cost() * 0.01 + 0.5);

    // inside an update window the local path is authoritative
    const auto b = press.execute(2, in, enumerate_actions(p)[0], true);
    CHECK(b.result == want);
    CHECK(b.fallback);
    CHECK(b.status == OffloadStatus::timeout);
    CHECK(*b.feedback == doctest::Approx(0.2));
}

TEST_CASE("timeout tracks the rolling round trip") {
    PressOptions opt;
    opt.timeout_floor = 1.0;
    opt.timeout_multiplier = 5.0;
    const auto p = four_stage();
    ReleaseServer server(p);
    server.start(Endpoint::parse("127.0.0.1:0"));
    PressClient client(Endpoint{"127.0.0.1", server.port()}, opt);
    CHECK(client.current_timeout() == doctest::Approx(opt.initial_timeout));
    wire::Message ping;
    ping.type = wire::MsgType::ping;
    client.request(ping);
    CHECK(client.current_timeout() == doctest::Approx(1.0)); // loopback RTT is far below the floor
    server.stop();

    CHECK_THROWS_AS(PressClient(Endpoint{}, PressOptions{0.0}), ConfigError);
}

TEST_CASE("latency grows with transmitted bytes on a shaped link") {
    Pipeline p;
    p.input_bytes = 1;
    p.stages = {Stage{"sink", 0.0, 0.0, 16}};
    ReleaseServer server(p);
    server.start(Endpoint::parse("127.0.0.1:0"));
    PressOptions opt;
    opt.link_bandwidth = 40e6;
    PressClient client(Endpoint{"127.0.0.1", server.port()}, opt);
    PressNode press(p, StageExecutor{}, &client);
    const Action cloud = enumerate_actions(p).front();

    std::mt19937_64 rng(4);
    std::vector<double> bytes, latency;
    for (std::uint64_t f = 0; f < 200; ++f) {
        const std::size_t n = 1000 + rng() % 400'000;
        const auto out = press.execute(f, std::vector<std::uint8_t>(n, 1), cloud, false);
        REQUIRE(out.status == OffloadStatus::ok);
        bytes.push_back(static_cast<double>(n));
        latency.push_back(out.latency);
    }
    CHECK(spearman(bytes, latency) > 0.9);
    server.stop();
}
