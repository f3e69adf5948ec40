#pragma once

#include "telesim/config.hpp"
#include "telesim/haptics.hpp"
#include "telesim/operator.hpp"
#include "telesim/sim_time.hpp"
#include "telesim/trial_log.hpp"
#include "telesim/world.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace telesim {

// Frame layout, all integers big-endian:
//
//   offset  size  field
//   0       2     magic "TS"
//   2       1     protocol version (1)
//   3       1     kind
//   4       8     sequence (u64)
//   12      8     sim timestamp in ms (i64)
//   20      4     payload length (u32)
//   24      n     payload, UTF-8 JSON text; empty when the payload is null
//
// A message with a null payload is exactly kWireHeaderSize bytes.

inline constexpr std::uint8_t kWireVersion = 1;
inline constexpr std::size_t kWireHeaderSize = 24;
inline constexpr std::uint32_t kWireMaxPayload = 16u << 20;

enum class WireKind : std::uint8_t {
    hello = 1,
    config = 2,
    input = 3,
    visual_frame = 4,
    haptic_frame = 5,
    event = 6,
    trial_control = 7,
    questionnaire = 8,
};

std::string_view to_string(WireKind k);
WireKind wire_kind_from_string(std::string_view s);

struct WireMessage {
    WireKind kind = WireKind::event;
    std::uint64_t sequence = 0;
    SimTime sim_time = 0;
    Json payload; // null, or any JSON value

    friend bool operator==(const WireMessage&, const WireMessage&) = default;
};

std::vector<std::uint8_t> encode(const WireMessage& m);

/// Decodes exactly one frame occupying all of `bytes`. Throws ProtocolError
/// (offset relative to the start of `bytes`) on any malformation, including
/// truncation and trailing bytes.
WireMessage decode(std::span<const std::uint8_t> bytes);

/// Incremental decoder for a byte stream. A malformed frame throws
/// ProtocolError with its absolute stream offset and is skipped, so the
/// stream stays usable afterwards.
class FrameDecoder {
  public:
    void feed(std::span<const std::uint8_t> bytes);
    void feed(std::string_view bytes);

    /// Next complete message, or nullopt if more bytes are needed.
    std::optional<WireMessage> next();

    /// Bytes held for an incomplete frame.
    std::size_t pending() const { return buffer_.size() - start_; }
    /// Throws ProtocolError if the stream ended inside a frame.
    void finish() const;
    std::uint64_t consumed() const { return offset_; }

  private:
    void drop(std::size_t n);
    void resync();

    std::vector<std::uint8_t> buffer_;
    std::size_t start_ = 0;
    std::uint64_t offset_ = 0; // stream offset of buffer_[start_]
};

// ---- payloads ---------------------------------------------------------------------

Json world_state_to_json(const WorldState& w);
Json force_sample_to_json(const ForceSample& s);
ForceSample force_sample_from_json(const Json& j);

Json input_to_json(const OperatorInput& in);
/// Parses an input payload {"dp": [x,y,z], "dq": [w,x,y,z], "grip": N}; all keys optional.
OperatorInput input_from_json(const Json& j, SimTime t);

WireMessage visual_frame_message(const VisualFrame& f, SimTime delivered, std::uint64_t frame_id);
/// Gauge payload for displays without a force device: magnitude and unit direction.
WireMessage haptic_frame_message(const HapticFrame& f, SimTime delivered);
WireMessage event_message(const EventRow& e);
WireMessage notice(std::string kind, std::string detail, SimTime t = 0);

} // namespace telesim
