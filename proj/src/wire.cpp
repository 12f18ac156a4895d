#include "elastic/wire.hpp"

#include <algorithm>
#include <cstring>

namespace elastic::wire {

namespace {

template <class T>
void put_le(std::uint8_t* out, T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) out[i] = static_cast<std::uint8_t>(v >> (8 * i));
}

template <class T>
T get_le(const std::uint8_t* in) {
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<T>(in[i]) << (8 * i));
    return v;
}

bool known_type(std::uint8_t t) { return t <= static_cast<std::uint8_t>(MsgType::error); }

} // namespace

const char* reason_name(Reason r) {
    switch (r) {
    case Reason::bad_magic: return "bad-magic";
    case Reason::unsupported_version: return "unsupported-version";
    case Reason::truncated: return "truncated";
    case Reason::unknown_type: return "unknown-type";
    case Reason::bad_split: return "bad-split";
    case Reason::payload_too_large: return "payload-too-large";
    case Reason::unexpected_type: return "unexpected-type";
    }
    return "unknown-reason";
}

void encode_header(const Header& h, std::uint8_t* out) {
    std::memcpy(out, kMagic, 4);
    out[4] = h.version;
    out[5] = h.type;
    put_le<std::uint64_t>(out + 6, h.frame_id);
    put_le<std::uint16_t>(out + 14, h.split_index);
    put_le<std::uint32_t>(out + 16, h.payload_len);
}

std::vector<std::uint8_t> encode(const Message& m) {
    if (m.payload.size() > UINT32_MAX) throw std::length_error("payload exceeds 32-bit length field");
    std::vector<std::uint8_t> out(kHeaderSize + m.payload.size());
    encode_header(Header{kVersion, static_cast<std::uint8_t>(m.type), m.frame_id, m.split_index,
                         static_cast<std::uint32_t>(m.payload.size())},
                  out.data());
    std::copy(m.payload.begin(), m.payload.end(), out.begin() + kHeaderSize);
    return out;
}

Header decode_header(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kHeaderSize) {
        // A short buffer that already disagrees on magic is reported as such.
        if (!std::equal(bytes.begin(), bytes.begin() + std::min<std::size_t>(bytes.size(), 4), kMagic))
            throw BadMagic();
        throw Truncated(kHeaderSize, bytes.size());
    }
    if (!std::equal(bytes.begin(), bytes.begin() + 4, kMagic)) throw BadMagic();
    Header h;
    h.version = bytes[4];
    h.type = bytes[5];
    h.frame_id = get_le<std::uint64_t>(bytes.data() + 6);
    h.split_index = get_le<std::uint16_t>(bytes.data() + 14);
    h.payload_len = get_le<std::uint32_t>(bytes.data() + 16);
    return h;
}

Message decode(std::span<const std::uint8_t> bytes) {
    const Header h = decode_header(bytes);
    if (h.version != kVersion) throw UnsupportedVersion(h.version);
    if (!known_type(h.type)) throw UnknownType(h.type);
    const std::size_t need = kHeaderSize + h.payload_len;
    if (bytes.size() < need) throw Truncated(need, bytes.size());
    if (bytes.size() > need) throw DecodeError(Reason::truncated, "trailing bytes after payload");
    Message m;
    m.type = static_cast<MsgType>(h.type);
    m.frame_id = h.frame_id;
    m.split_index = h.split_index;
    m.payload.assign(bytes.begin() + kHeaderSize, bytes.end());
    return m;
}

Message make_error(std::uint64_t frame_id, Reason reason, const std::string& detail) {
    Message m;
    m.type = MsgType::error;
    m.frame_id = frame_id;
    m.payload.reserve(1 + detail.size());
    m.payload.push_back(static_cast<std::uint8_t>(reason));
    m.payload.insert(m.payload.end(), detail.begin(), detail.end());
    return m;
}

std::optional<std::pair<Reason, std::string>> parse_error(const Message& m) {
    if (m.type != MsgType::error || m.payload.empty()) return std::nullopt;
    return std::pair{static_cast<Reason>(m.payload[0]), std::string(m.payload.begin() + 1, m.payload.end())};
}

} // namespace elastic::wire
