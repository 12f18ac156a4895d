#pragma once

#include "elastic/action_space.hpp"
#include "elastic/stage_exec.hpp"
#include "elastic/wire.hpp"

#include <atomic>
#include <chrono>
#include <cstdint>
#include <deque>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace elastic {

struct Endpoint {
    std::string host = "127.0.0.1";
    std::uint16_t port = 0;

    /// "host:port"; throws ConfigError on malformed input.
    static Endpoint parse(const std::string& text);
    std::string to_string() const;
};

/// Cloud-side half: executes the pipeline suffix named by each FRAME.
/// One thread per connection; requests on a connection are served in order.
class ReleaseServer {
public:
    ReleaseServer(Pipeline pipeline, StageExecutor executor = {});
    ~ReleaseServer();
    ReleaseServer(const ReleaseServer&) = delete;
    ReleaseServer& operator=(const ReleaseServer&) = delete;

    /// Binds and starts accepting in the background. Port 0 picks a free port.
    /// Throws RuntimeFailure if the listener cannot be set up.
    void start(const Endpoint& listen);
    void stop();

    std::uint16_t port() const { return port_; }
    std::uint64_t requests_served() const { return served_.load(); }
    std::uint64_t errors_sent() const { return errors_.load(); }

    /// Response to one decoded request; exposed for tests.
    wire::Message respond(const wire::Header& header, std::vector<std::uint8_t> payload) const;

private:
    void accept_loop();
    void serve_connection(int fd);

    Pipeline pipeline_;
    StageExecutor executor_;
    int listen_fd_ = -1;
    std::uint16_t port_ = 0;
    std::atomic<bool> stopping_{false};
    std::thread acceptor_;
    std::mutex mu_;
    std::vector<std::thread> workers_;
    std::vector<int> open_fds_;
    mutable std::atomic<std::uint64_t> served_{0};
    mutable std::atomic<std::uint64_t> errors_{0};
};

enum class OffloadStatus { ok, timeout, refused, error };

const char* offload_status_name(OffloadStatus s);

struct OffloadReply {
    OffloadStatus status = OffloadStatus::ok;
    wire::Message message;
    double round_trip = 0.0; // seconds
    double timeout_used = 0.0;
    std::string detail;
};

struct PressOptions {
    double timeout_multiplier = 5.0;
    double timeout_floor = 1.0;   // seconds
    double initial_timeout = 10.0; // before any round trip has been measured
    std::size_t rtt_window = 20;
    /// Pacing of uploads in bytes per second; 0 sends at link speed.
    double link_bandwidth = 0.0;
    /// Timeout or failed offloads report the timeout as the observed cost;
    /// when false the sample is discarded.
    bool timeout_as_feedback = true;

    void validate() const;
};

/// Robot-side connection to a release node. Not thread safe.
class PressClient {
public:
    PressClient(Endpoint endpoint, PressOptions options = {});
    ~PressClient();
    PressClient(const PressClient&) = delete;
    PressClient& operator=(const PressClient&) = delete;

    /// Throws RuntimeFailure if the endpoint refuses.
    void connect();
    bool connected() const { return fd_ >= 0; }
    void close();

    /// Sends one request and waits for the reply with the current timeout.
    /// After a timeout the connection is dropped so a late reply cannot be
    /// matched to the next request.
    OffloadReply request(const wire::Message& m);

    /// max(floor, multiplier * rolling mean RTT), or the initial timeout.
    double current_timeout() const;
    const PressOptions& options() const { return options_; }

private:
    void send_all(const std::uint8_t* data, std::size_t len, std::chrono::steady_clock::time_point deadline);

    Endpoint endpoint_;
    PressOptions options_;
    int fd_ = -1;
    std::deque<double> rtts_;
};

struct PressOutcome {
    std::vector<std::uint8_t> result;
    double latency = 0.0;      // frame ingestion to result availability, seconds
    double local_time = 0.0;   // on-robot prefix compute, seconds
    std::optional<double> feedback; // observed elastic cost for the policy
    OffloadStatus status = OffloadStatus::ok;
    bool fallback = false;     // result came from the local path
    std::string detail;
};

/// Press node: runs the local prefix, ships the intermediate and collects the result.
class PressNode {
public:
    PressNode(Pipeline pipeline, StageExecutor executor, PressClient* client);

    /// Pure-local actions never touch the network. With `update_window` set a
    /// full local run proceeds concurrently and supplies the result, while the
    /// exploratory offload still yields feedback.
    PressOutcome execute(std::uint64_t frame_id, std::span<const std::uint8_t> input, const Action& action,
                         bool update_window);

private:
    PressOutcome offload(std::uint64_t frame_id, std::span<const std::uint8_t> input, const Action& action);

    Pipeline pipeline_;
    StageExecutor executor_;
    PressClient* client_;
};

/// Listen address for the release CLI: explicit value, else ELASTIC_RELEASE_LISTEN, else the default.
Endpoint resolve_listen(const std::optional<std::string>& configured, const char* env_value,
                        const std::string& fallback = "127.0.0.1:7450");

} // namespace elastic
