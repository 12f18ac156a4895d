#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace elastic::wire {

inline constexpr std::uint8_t kMagic[4] = {'E', 'L', 'R', 'S'};
inline constexpr std::uint8_t kVersion = 0x01;
inline constexpr std::size_t kHeaderSize = 20;
/// Upper bound on payload_len accepted from the network.
inline constexpr std::uint32_t kMaxPayload = 256u << 20;

enum class MsgType : std::uint8_t { frame = 0x00, result = 0x01, ping = 0x02, error = 0x03 };

/// Reason byte leading every ERROR payload.
enum class Reason : std::uint8_t {
    bad_magic = 1,
    unsupported_version = 2,
    truncated = 3,
    unknown_type = 4,
    bad_split = 5,
    payload_too_large = 6,
    unexpected_type = 7,
};

const char* reason_name(Reason r);

struct Message {
    MsgType type = MsgType::frame;
    std::uint64_t frame_id = 0;
    std::uint16_t split_index = 0;
    std::vector<std::uint8_t> payload;

    friend bool operator==(const Message&, const Message&) = default;
};

/// Layout: magic(4) version(1) type(1) frame_id(8 LE) split(2 LE) payload_len(4 LE) payload.
struct Header {
    std::uint8_t version = kVersion;
    std::uint8_t type = 0;
    std::uint64_t frame_id = 0;
    std::uint16_t split_index = 0;
    std::uint32_t payload_len = 0;
};

class DecodeError : public std::runtime_error {
public:
    DecodeError(Reason reason, const std::string& what) : std::runtime_error(what), reason_(reason) {}
    Reason reason() const { return reason_; }

private:
    Reason reason_;
};

class BadMagic : public DecodeError {
public:
    BadMagic() : DecodeError(Reason::bad_magic, "bad magic") {}
};

class UnsupportedVersion : public DecodeError {
public:
    explicit UnsupportedVersion(std::uint8_t v)
        : DecodeError(Reason::unsupported_version, "unsupported version " + std::to_string(v)), version(v) {}
    std::uint8_t version;
};

class Truncated : public DecodeError {
public:
    Truncated(std::size_t need, std::size_t have)
        : DecodeError(Reason::truncated,
                      "truncated message: need " + std::to_string(need) + " bytes, have " + std::to_string(have)) {}
};

class UnknownType : public DecodeError {
public:
    explicit UnknownType(std::uint8_t t)
        : DecodeError(Reason::unknown_type, "unknown message type " + std::to_string(t)), type(t) {}
    std::uint8_t type;
};

std::vector<std::uint8_t> encode(const Message& m);
void encode_header(const Header& h, std::uint8_t* out);

/// Checks magic only; version and type are left for the caller so a server can
/// consume the payload before rejecting.
Header decode_header(std::span<const std::uint8_t> bytes);

/// Full decode of a single message occupying exactly `bytes`.
Message decode(std::span<const std::uint8_t> bytes);

Message make_error(std::uint64_t frame_id, Reason reason, const std::string& detail);

/// Reason and text of an ERROR message; nullopt for any other type or an empty payload.
std::optional<std::pair<Reason, std::string>> parse_error(const Message& m);

} // namespace elastic::wire
