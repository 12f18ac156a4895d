#include "elastic/runtime.hpp"

#include "elastic/error.hpp"

#include <fmt/format.h>

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cstring>
#include <future>
#include <numeric>

namespace elastic {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// Reads until `len` bytes arrive or the peer closes; returns the count read.
std::size_t read_up_to(int fd, std::uint8_t* buf, std::size_t len) {
    std::size_t got = 0;
    while (got < len) {
        const ssize_t n = ::recv(fd, buf + got, len - got, 0);
        if (n == 0) break;
        if (n < 0) {
            if (errno == EINTR) continue;
            break;
        }
        got += static_cast<std::size_t>(n);
    }
    return got;
}

bool write_all(int fd, const std::uint8_t* data, std::size_t len) {
    while (len > 0) {
        const ssize_t n = ::send(fd, data, len, MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR) continue;
            return false;
        }
        data += n;
        len -= static_cast<std::size_t>(n);
    }
    return true;
}

bool send_message(int fd, const wire::Message& m) {
    const auto bytes = wire::encode(m);
    return write_all(fd, bytes.data(), bytes.size());
}

sockaddr_in resolve(const Endpoint& ep) {
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(ep.port);
    if (::inet_pton(AF_INET, ep.host.c_str(), &addr.sin_addr) == 1) return addr;
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    if (::getaddrinfo(ep.host.c_str(), nullptr, &hints, &res) != 0 || res == nullptr)
        throw RuntimeFailure(fmt::format("cannot resolve host '{}'", ep.host));
    addr.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
    ::freeaddrinfo(res);
    return addr;
}

// Waits for `events` on fd until the deadline; false on timeout.
bool wait_fd(int fd, short events, Clock::time_point deadline) {
    for (;;) {
        const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now()).count();
        if (left <= 0) return false;
        pollfd p{fd, events, 0};
        const int rc = ::poll(&p, 1, static_cast<int>(std::min<long long>(left, 1000)));
        if (rc > 0) return true;
        if (rc < 0 && errno != EINTR) return false;
    }
}

struct TimedOut {};
struct PeerClosed {};

void recv_exact(int fd, std::uint8_t* buf, std::size_t len, Clock::time_point deadline) {
    std::size_t got = 0;
    while (got < len) {
        if (!wait_fd(fd, POLLIN, deadline)) throw TimedOut{};
        const ssize_t n = ::recv(fd, buf + got, len - got, 0);
        if (n == 0) throw PeerClosed{};
        if (n < 0) {
            if (errno == EINTR || errno == EAGAIN) continue;
            throw PeerClosed{};
        }
        got += static_cast<std::size_t>(n);
    }
}

} // namespace

// ---------------------------------------------------------------------------

Endpoint Endpoint::parse(const std::string& text) {
    const auto colon = text.rfind(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == text.size())
        throw ConfigError(fmt::format("address '{}' is not of the form host:port", text));
    Endpoint ep;
    ep.host = text.substr(0, colon);
    const std::string port = text.substr(colon + 1);
    unsigned value = 0;
    const auto [ptr, ec] = std::from_chars(port.data(), port.data() + port.size(), value);
    if (ec != std::errc{} || ptr != port.data() + port.size() || value > 65535)
        throw ConfigError(fmt::format("address '{}': port must be in [0, 65535]", text));
    ep.port = static_cast<std::uint16_t>(value);
    return ep;
}

std::string Endpoint::to_string() const { return fmt::format("{}:{}", host, port); }

Endpoint resolve_listen(const std::optional<std::string>& configured, const char* env_value,
                        const std::string& fallback) {
    if (configured && !configured->empty()) return Endpoint::parse(*configured);
    if (env_value != nullptr && *env_value != '\0') return Endpoint::parse(env_value);
    return Endpoint::parse(fallback);
}

// ---------------------------------------------------------------------------
// Release node

ReleaseServer::ReleaseServer(Pipeline pipeline, StageExecutor executor)
    : pipeline_(std::move(pipeline)), executor_(executor) {
    pipeline_.validate();
}

ReleaseServer::~ReleaseServer() { stop(); }

void ReleaseServer::start(const Endpoint& listen) {
    if (listen_fd_ >= 0) throw std::logic_error("release server already started");
    const sockaddr_in addr = resolve(listen);
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw RuntimeFailure(fmt::format("socket: {}", std::strerror(errno)));
    const int one = 1;
    ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    if (::bind(fd, reinterpret_cast<const sockaddr*>(&addr), sizeof addr) < 0) {
        const int err = errno;
        ::close(fd);
        throw RuntimeFailure(fmt::format("bind {}: {}", listen.to_string(), std::strerror(err)));
    }
    if (::listen(fd, 16) < 0) {
        const int err = errno;
        ::close(fd);
        throw RuntimeFailure(fmt::format("listen {}: {}", listen.to_string(), std::strerror(err)));
    }
    sockaddr_in bound{};
    socklen_t blen = sizeof bound;
    ::getsockname(fd, reinterpret_cast<sockaddr*>(&bound), &blen);
    port_ = ntohs(bound.sin_port);
    listen_fd_ = fd;
    stopping_ = false;
    acceptor_ = std::thread([this] { accept_loop(); });
}

void ReleaseServer::stop() {
    if (listen_fd_ < 0) return;
    stopping_ = true;
    ::shutdown(listen_fd_, SHUT_RDWR);
    if (acceptor_.joinable()) acceptor_.join();
    ::close(listen_fd_);
    listen_fd_ = -1;
    std::vector<std::thread> workers;
    {
        std::lock_guard lock(mu_);
        for (int fd : open_fds_) ::shutdown(fd, SHUT_RDWR);
        workers.swap(workers_);
    }
    for (auto& w : workers)
        if (w.joinable()) w.join();
}

void ReleaseServer::accept_loop() {
    while (!stopping_) {
        const int fd = ::accept(listen_fd_, nullptr, nullptr);
        if (fd < 0) {
            if (errno == EINTR) continue;
            if (stopping_) break;
            continue;
        }
        const int one = 1;
        ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
        std::lock_guard lock(mu_);
        if (stopping_) {
            ::close(fd);
            break;
        }
        open_fds_.push_back(fd);
        workers_.emplace_back([this, fd] { serve_connection(fd); });
    }
}

wire::Message ReleaseServer::respond(const wire::Header& h, std::vector<std::uint8_t> payload) const {
    using wire::MsgType;
    using wire::Reason;
    if (h.version != wire::kVersion)
        return wire::make_error(h.frame_id, Reason::unsupported_version, fmt::format("version {}", h.version));
    if (h.type > static_cast<std::uint8_t>(MsgType::error))
        return wire::make_error(h.frame_id, Reason::unknown_type, fmt::format("type {}", h.type));

    switch (static_cast<MsgType>(h.type)) {
    case MsgType::ping: {
        wire::Message m;
        m.type = MsgType::ping;
        m.frame_id = h.frame_id;
        m.split_index = h.split_index;
        m.payload = std::move(payload);
        return m;
    }
    case MsgType::frame: {
        if (h.split_index >= pipeline_.size())
            return wire::make_error(h.frame_id, Reason::bad_split,
                                    fmt::format("split {} leaves nothing to run (n = {})", h.split_index,
                                                pipeline_.size()));
        wire::Message m;
        m.type = MsgType::result;
        m.frame_id = h.frame_id;
        m.split_index = h.split_index;
        m.payload = executor_.run_range(pipeline_, h.split_index, pipeline_.size(), payload, true);
        return m;
    }
    default:
        return wire::make_error(h.frame_id, Reason::unexpected_type, "release node accepts FRAME and PING only");
    }
}

void ReleaseServer::serve_connection(int fd) {
    std::uint8_t hdr[wire::kHeaderSize];
    auto reply = [&](const wire::Message& m) {
        if (m.type == wire::MsgType::error) ++errors_;
        ++served_;
        return send_message(fd, m);
    };

    while (!stopping_) {
        const std::size_t got = read_up_to(fd, hdr, sizeof hdr);
        if (got == 0) break;
        wire::Header h;
        try {
            h = wire::decode_header(std::span<const std::uint8_t>(hdr, got));
        } catch (const wire::BadMagic&) {
            // Without a trusted length only the header-sized chunk can be consumed.
            if (!reply(wire::make_error(0, wire::Reason::bad_magic, "bad magic"))) break;
            if (got < sizeof hdr) break;
            continue;
        } catch (const wire::Truncated& e) {
            reply(wire::make_error(0, wire::Reason::truncated, e.what()));
            break;
        }

        if (h.payload_len > wire::kMaxPayload) {
            std::vector<std::uint8_t> sink(1 << 16);
            std::uint64_t left = h.payload_len;
            while (left > 0) {
                const std::size_t chunk = static_cast<std::size_t>(std::min<std::uint64_t>(left, sink.size()));
                const std::size_t n = read_up_to(fd, sink.data(), chunk);
                if (n == 0) break;
                left -= n;
            }
            if (!reply(wire::make_error(h.frame_id, wire::Reason::payload_too_large,
                                        fmt::format("payload_len {} exceeds {}", h.payload_len, wire::kMaxPayload))) ||
                left > 0)
                break;
            continue;
        }

        std::vector<std::uint8_t> payload(h.payload_len);
        const std::size_t n = read_up_to(fd, payload.data(), payload.size());
        if (n < payload.size()) {
            reply(wire::make_error(h.frame_id, wire::Reason::truncated,
                                   fmt::format("payload truncated: {} of {} bytes", n, payload.size())));
            break;
        }
        if (!reply(respond(h, std::move(payload)))) break;
    }

    std::lock_guard lock(mu_);
    std::erase(open_fds_, fd);
    ::close(fd);
}

// ---------------------------------------------------------------------------
// Press client

const char* offload_status_name(OffloadStatus s) {
    switch (s) {
    case OffloadStatus::ok: return "ok";
    case OffloadStatus::timeout: return "timeout";
    case OffloadStatus::refused: return "refused";
    case OffloadStatus::error: return "error";
    }
    return "?";
}

void PressOptions::validate() const {
    if (!(timeout_multiplier > 0.0)) throw ConfigError("timeout_multiplier must be > 0");
    if (!(timeout_floor > 0.0)) throw ConfigError("timeout_floor must be > 0");
    if (!(initial_timeout > 0.0)) throw ConfigError("initial_timeout must be > 0");
    if (rtt_window == 0) throw ConfigError("rtt_window must be >= 1");
    if (link_bandwidth < 0.0) throw ConfigError("link_bandwidth must be >= 0");
}

PressClient::PressClient(Endpoint endpoint, PressOptions options)
    : endpoint_(std::move(endpoint)), options_(options) {
    options_.validate();
}

PressClient::~PressClient() { close(); }

void PressClient::connect() {
    if (fd_ >= 0) return;
    const sockaddr_in addr = resolve(endpoint_);
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw RuntimeFailure(fmt::format("socket: {}", std::strerror(errno)));
    if (::connect(fd, reinterpret_cast<const sockaddr*>(&addr), sizeof addr) < 0) {
        const int err = errno;
        ::close(fd);
        throw RuntimeFailure(fmt::format("connect {}: {}", endpoint_.to_string(), std::strerror(err)));
    }
    const int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    fd_ = fd;
}

void PressClient::close() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
}

double PressClient::current_timeout() const {
    if (rtts_.empty()) return std::max(options_.initial_timeout, options_.timeout_floor);
    const double mean = std::accumulate(rtts_.begin(), rtts_.end(), 0.0) / static_cast<double>(rtts_.size());
    return std::max(options_.timeout_floor, options_.timeout_multiplier * mean);
}

void PressClient::send_all(const std::uint8_t* data, std::size_t len, Clock::time_point deadline) {
    const auto start = Clock::now();
    const std::size_t chunk = options_.link_bandwidth > 0.0 ? std::size_t{16} << 10 : len;
    std::size_t sent = 0;
    while (sent < len) {
        const std::size_t n = std::min(chunk, len - sent);
        std::size_t done = 0;
        while (done < n) {
            if (!wait_fd(fd_, POLLOUT, deadline)) throw TimedOut{};
            const ssize_t w = ::send(fd_, data + sent + done, n - done, MSG_NOSIGNAL | MSG_DONTWAIT);
            if (w < 0) {
                if (errno == EINTR || errno == EAGAIN) continue;
                throw PeerClosed{};
            }
            done += static_cast<std::size_t>(w);
        }
        sent += n;
        if (options_.link_bandwidth > 0.0) {
            const auto due = start + std::chrono::duration_cast<Clock::duration>(
                                         std::chrono::duration<double>(static_cast<double>(sent) / options_.link_bandwidth));
            if (due > deadline) {
                std::this_thread::sleep_until(deadline);
                throw TimedOut{};
            }
            std::this_thread::sleep_until(due);
        }
    }
}

OffloadReply PressClient::request(const wire::Message& m) {
    OffloadReply r;
    r.timeout_used = current_timeout();
    const auto t0 = Clock::now();
    const auto deadline = t0 + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(r.timeout_used));

    if (fd_ < 0) {
        try {
            connect();
        } catch (const RuntimeFailure& e) {
            r.status = OffloadStatus::refused;
            r.detail = e.what();
            return r;
        }
    }

    try {
        const auto bytes = wire::encode(m);
        send_all(bytes.data(), bytes.size(), deadline);
        std::uint8_t hdr[wire::kHeaderSize];
        recv_exact(fd_, hdr, sizeof hdr, deadline);
        const wire::Header h = wire::decode_header(hdr);
        if (h.payload_len > wire::kMaxPayload) throw wire::DecodeError(wire::Reason::payload_too_large, "reply too large");
        std::vector<std::uint8_t> buf(wire::kHeaderSize + h.payload_len);
        std::copy(hdr, hdr + wire::kHeaderSize, buf.begin());
        recv_exact(fd_, buf.data() + wire::kHeaderSize, h.payload_len, deadline);
        r.message = wire::decode(buf);
    } catch (const TimedOut&) {
        close();
        r.status = OffloadStatus::timeout;
        r.round_trip = seconds_since(t0);
        r.detail = fmt::format("no reply within {:.3f} s", r.timeout_used);
        return r;
    } catch (const PeerClosed&) {
        close();
        r.status = OffloadStatus::error;
        r.round_trip = seconds_since(t0);
        r.detail = "connection closed by release node";
        return r;
    } catch (const wire::DecodeError& e) {
        close();
        r.status = OffloadStatus::error;
        r.round_trip = seconds_since(t0);
        r.detail = fmt::format("malformed reply: {}", e.what());
        return r;
    }

    r.round_trip = seconds_since(t0);
    if (r.message.frame_id != m.frame_id) {
        close();
        r.status = OffloadStatus::error;
        r.detail = fmt::format("reply frame_id {} does not match request {}", r.message.frame_id, m.frame_id);
        return r;
    }
    if (auto err = wire::parse_error(r.message)) {
        r.status = OffloadStatus::error;
        r.detail = fmt::format("release node error {}: {}", wire::reason_name(err->first), err->second);
        return r;
    }
    r.status = OffloadStatus::ok;
    rtts_.push_back(r.round_trip);
    while (rtts_.size() > options_.rtt_window) rtts_.pop_front();
    return r;
}

// ---------------------------------------------------------------------------
// Press node

PressNode::PressNode(Pipeline pipeline, StageExecutor executor, PressClient* client)
    : pipeline_(std::move(pipeline)), executor_(executor), client_(client) {
    pipeline_.validate();
}

PressOutcome PressNode::offload(std::uint64_t frame_id, std::span<const std::uint8_t> input, const Action& action) {
    const auto t0 = Clock::now();
    PressOutcome out;
    std::vector<std::uint8_t> prefix = executor_.run_range(pipeline_, 0, action.split_index, input, false);
    out.local_time = seconds_since(t0);

    OffloadReply reply;
    if (client_ == nullptr) {
        reply.status = OffloadStatus::refused;
        reply.detail = "no release endpoint configured";
    } else {
        wire::Message m;
        m.type = wire::MsgType::frame;
        m.frame_id = frame_id;
        m.split_index = static_cast<std::uint16_t>(action.split_index);
        m.payload = prefix;
        reply = client_->request(m);
    }
    out.status = reply.status;
    out.detail = reply.detail;

    if (reply.status == OffloadStatus::ok) {
        out.result = std::move(reply.message.payload);
        out.feedback = reply.round_trip;
    } else {
        // Finish the suffix on the robot; the output is the same bytes either way.
        out.fallback = true;
        out.result = executor_.run_range(pipeline_, action.split_index, pipeline_.size(), prefix, false);
        const bool pessimistic = client_ == nullptr || client_->options().timeout_as_feedback;
        if (pessimistic) out.feedback = reply.timeout_used > 0.0 ? reply.timeout_used : reply.round_trip;
    }
    out.latency = seconds_since(t0);
    return out;
}

PressOutcome PressNode::execute(std::uint64_t frame_id, std::span<const std::uint8_t> input, const Action& action,
                                bool update_window) {
    if (action.split_index > pipeline_.size()) throw std::invalid_argument("split index outside the pipeline");
    const auto t0 = Clock::now();
    if (action.is_pure_local || action.split_index == pipeline_.size()) {
        PressOutcome out;
        out.result = executor_.run_range(pipeline_, 0, pipeline_.size(), input, false);
        out.latency = out.local_time = seconds_since(t0);
        return out;
    }
    if (!update_window) return offload(frame_id, input, action);

    std::vector<std::uint8_t> copy(input.begin(), input.end());
    auto local = std::async(std::launch::async, [this, copy = std::move(copy), t0] {
        auto bytes = executor_.run_range(pipeline_, 0, pipeline_.size(), copy, false);
        return std::pair{std::move(bytes), seconds_since(t0)};
    });
    PressOutcome explored = offload(frame_id, input, action);
    auto [bytes, done_at] = local.get();

    PressOutcome out;
    out.result = std::move(bytes);
    out.latency = done_at;
    out.local_time = done_at;
    out.feedback = explored.feedback;
    out.status = explored.status;
    out.detail = explored.detail;
    out.fallback = true;
    return out;
}

} // namespace elastic
