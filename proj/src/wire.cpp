#include "telesim/wire.hpp"

#include "telesim/errors.hpp"

#include <algorithm>
#include <array>

namespace telesim {

namespace {

constexpr std::array<std::pair<WireKind, std::string_view>, 8> kKindNames{{
    {WireKind::hello, "hello"},
    {WireKind::config, "config"},
    {WireKind::input, "input"},
    {WireKind::visual_frame, "visual_frame"},
    {WireKind::haptic_frame, "haptic_frame"},
    {WireKind::event, "event"},
    {WireKind::trial_control, "trial_control"},
    {WireKind::questionnaire, "questionnaire"},
}};

void put_be(std::vector<std::uint8_t>& out, std::uint64_t v, int bytes) {
    for (int i = bytes - 1; i >= 0; --i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_be(const std::uint8_t* p, int bytes) {
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) v = (v << 8) | p[i];
    return v;
}

struct Header {
    WireKind kind;
    std::uint64_t sequence;
    SimTime sim_time;
    std::uint32_t length;
};

// Validates a complete 24-byte header; `base` is the offset used in errors.
Header parse_header(const std::uint8_t* p, std::size_t base) {
    if (p[0] != 'T' || p[1] != 'S') throw ProtocolError(base, "bad magic");
    if (p[2] != kWireVersion) throw ProtocolError(base + 2, "unsupported protocol version " + std::to_string(p[2]));
    if (p[3] < 1 || p[3] > kKindNames.size()) throw ProtocolError(base + 3, "unknown message kind " + std::to_string(p[3]));
    Header h;
    h.kind = static_cast<WireKind>(p[3]);
    h.sequence = get_be(p + 4, 8);
    h.sim_time = static_cast<SimTime>(get_be(p + 12, 8));
    h.length = static_cast<std::uint32_t>(get_be(p + 20, 4));
    if (h.length > kWireMaxPayload) throw ProtocolError(base + 20, "payload length " + std::to_string(h.length) + " exceeds limit");
    return h;
}

Json parse_payload(const std::uint8_t* p, std::size_t n, std::size_t base) {
    if (n == 0) return nullptr;
    try {
        return Json::parse(p, p + n);
    } catch (const Json::parse_error& e) {
        const std::size_t at = e.byte > 0 ? e.byte - 1 : 0;
        throw ProtocolError(base + std::min(at, n), std::string("malformed payload: ") + e.what());
    }
}

Json vec(const Eigen::Vector3d& v) { return Json::array({v.x(), v.y(), v.z()}); }

Eigen::Vector3d vec_from(const Json& j) {
    if (!j.is_array() || j.size() != 3) throw InputError("expected a 3-element array");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

} // namespace

std::string_view to_string(WireKind k) {
    for (const auto& [kind, name] : kKindNames) {
        if (kind == k) return name;
    }
    return "unknown";
}

WireKind wire_kind_from_string(std::string_view s) {
    for (const auto& [kind, name] : kKindNames) {
        if (name == s) return kind;
    }
    throw InputError("unknown message kind '" + std::string(s) + "'");
}

std::vector<std::uint8_t> encode(const WireMessage& m) {
    const std::string body = m.payload.is_null() ? std::string() : m.payload.dump();
    if (body.size() > kWireMaxPayload) throw InputError("payload too large for one frame");
    std::vector<std::uint8_t> out;
    out.reserve(kWireHeaderSize + body.size());
    out.push_back('T');
    out.push_back('S');
    out.push_back(kWireVersion);
    out.push_back(static_cast<std::uint8_t>(m.kind));
    put_be(out, m.sequence, 8);
    put_be(out, static_cast<std::uint64_t>(m.sim_time), 8);
    put_be(out, body.size(), 4);
    out.insert(out.end(), body.begin(), body.end());
    return out;
}

WireMessage decode(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kWireHeaderSize) throw ProtocolError(bytes.size(), "truncated header");
    const Header h = parse_header(bytes.data(), 0);
    const std::size_t total = kWireHeaderSize + h.length;
    if (bytes.size() < total) throw ProtocolError(bytes.size(), "truncated payload");
    if (bytes.size() > total) throw ProtocolError(total, "trailing bytes after frame");
    return {h.kind, h.sequence, h.sim_time, parse_payload(bytes.data() + kWireHeaderSize, h.length, kWireHeaderSize)};
}

void FrameDecoder::feed(std::span<const std::uint8_t> bytes) {
    if (start_ > 0 && start_ == buffer_.size()) {
        buffer_.clear();
        start_ = 0;
    }
    buffer_.insert(buffer_.end(), bytes.begin(), bytes.end());
}

void FrameDecoder::feed(std::string_view bytes) {
    feed(std::span(reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()));
}

void FrameDecoder::drop(std::size_t n) {
    start_ += n;
    offset_ += n;
    if (start_ > 4096 && start_ * 2 > buffer_.size()) {
        buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(start_));
        start_ = 0;
    }
}

// Skips at least one byte, then up to the next candidate magic.
void FrameDecoder::resync() {
    std::size_t i = start_ + 1;
    while (i < buffer_.size() && buffer_[i] != 'T') ++i;
    drop(i - start_);
}

std::optional<WireMessage> FrameDecoder::next() {
    const std::size_t avail = pending();
    if (avail == 0) return std::nullopt;
    const std::uint8_t* p = buffer_.data() + start_;
    // reject a bad magic as soon as it is visible
    if (p[0] != 'T' || (avail >= 2 && p[1] != 'S')) {
        const std::uint64_t at = offset_;
        resync();
        throw ProtocolError(at, "bad magic");
    }
    if (avail < kWireHeaderSize) return std::nullopt;
    Header h;
    try {
        h = parse_header(p, offset_);
    } catch (const ProtocolError&) {
        resync();
        throw;
    }
    const std::size_t total = kWireHeaderSize + h.length;
    if (avail < total) return std::nullopt;
    Json payload;
    try {
        payload = parse_payload(p + kWireHeaderSize, h.length, offset_ + kWireHeaderSize);
    } catch (const ProtocolError&) {
        drop(total);
        throw;
    }
    drop(total);
    return WireMessage{h.kind, h.sequence, h.sim_time, std::move(payload)};
}

void FrameDecoder::finish() const {
    if (pending() > 0) throw ProtocolError(offset_ + pending(), "stream ended inside a frame");
}

// ---- payloads ---------------------------------------------------------------------

Json world_state_to_json(const WorldState& w) {
    Json objects = Json::array();
    for (const SceneObject& o : w.objects) {
        objects.push_back({{"id", o.id},
                           {"tag", std::string(to_string(o.tag))},
                           {"position", vec(o.pose.position)},
                           {"orientation", Json::array({o.pose.orientation.w(), o.pose.orientation.x(),
                                                        o.pose.orientation.y(), o.pose.orientation.z()})},
                           {"half_extents", vec(o.half_extents)},
                           {"grasped", o.grasped}});
    }
    Json q = Json::array();
    for (int i = 0; i < w.robot_joints.angles.size(); ++i) q.push_back(w.robot_joints.angles[i]);
    const auto& eo = w.end_effector.orientation;
    return {{"time", w.time},
            {"joints", q},
            {"aperture", w.robot_joints.gripper_aperture},
            {"ee_position", vec(w.end_effector.position)},
            {"ee_orientation", Json::array({eo.w(), eo.x(), eo.y(), eo.z()})},
            {"grasp", w.grasp_binding ? Json(*w.grasp_binding) : Json(nullptr)},
            {"script_index", w.script_index},
            {"objects", objects}};
}

Json force_sample_to_json(const ForceSample& s) {
    Json modes = Json::object();
    for (std::size_t i = 0; i < kNumForceModes; ++i) {
        modes[std::string(to_string(static_cast<ForceMode>(i)))] = vec(s.mode_breakdown[i]);
    }
    return {{"force", vec(s.force)},
            {"torque_z", s.torque_z},
            {"clamped", s.clamped},
            {"timestamp", s.timestamp},
            {"modes", modes}};
}

ForceSample force_sample_from_json(const Json& j) {
    ForceSample s;
    try {
        s.force = vec_from(j.at("force"));
        s.torque_z = j.at("torque_z").get<double>();
        s.clamped = j.at("clamped").get<bool>();
        s.timestamp = j.at("timestamp").get<double>();
        const Json& modes = j.at("modes");
        for (std::size_t i = 0; i < kNumForceModes; ++i) {
            s.mode_breakdown[i] = vec_from(modes.at(std::string(to_string(static_cast<ForceMode>(i)))));
        }
    } catch (const Json::exception& e) {
        throw InputError(std::string("malformed force sample: ") + e.what());
    }
    return s;
}

Json input_to_json(const OperatorInput& in) {
    const auto& q = in.rotation_delta;
    return {{"dp", vec(in.position_delta)}, {"dq", Json::array({q.w(), q.x(), q.y(), q.z()})}, {"grip", in.grip_force}};
}

OperatorInput input_from_json(const Json& j, SimTime t) {
    OperatorInput in;
    in.timestamp = t;
    if (!j.is_object()) throw InputError("input payload must be an object");
    try {
        if (j.contains("dp")) in.position_delta = vec_from(j.at("dp"));
        if (j.contains("dq")) {
            const Json& q = j.at("dq");
            if (!q.is_array() || q.size() != 4) throw InputError("dq must be [w, x, y, z]");
            Eigen::Quaterniond r(q[0].get<double>(), q[1].get<double>(), q[2].get<double>(), q[3].get<double>());
            if (!(r.norm() > 1e-9)) throw InputError("dq has zero norm");
            in.rotation_delta = r.normalized();
        }
        if (j.contains("grip")) in.grip_force = j.at("grip").get<double>();
    } catch (const Json::exception& e) {
        throw InputError(std::string("malformed input: ") + e.what());
    }
    if (!in.position_delta.allFinite() || !std::isfinite(in.grip_force) || in.grip_force < 0.0) {
        throw InputError("input values must be finite and grip >= 0");
    }
    return in;
}

WireMessage visual_frame_message(const VisualFrame& f, SimTime delivered, std::uint64_t frame_id) {
    Json p = {{"id", frame_id}, {"emitted", f.emitted}};
    p["world"] = f.world ? world_state_to_json(*f.world) : Json(nullptr);
    return {WireKind::visual_frame, 0, delivered, std::move(p)};
}

WireMessage haptic_frame_message(const HapticFrame& f, SimTime delivered) {
    const double mag = f.sample.magnitude();
    const Eigen::Vector3d dir = mag > 0.0 ? Eigen::Vector3d(f.sample.force / mag) : Eigen::Vector3d::Zero();
    Json p = {{"emitted", f.emitted},
              {"magnitude", mag},
              {"direction", vec(dir)},
              {"torque_z", f.sample.torque_z},
              {"clamped", f.sample.clamped}};
    return {WireKind::haptic_frame, 0, delivered, std::move(p)};
}

WireMessage event_message(const EventRow& e) {
    return {WireKind::event, 0, e.t, {{"kind", e.kind}, {"object_id", e.object_id}, {"value", e.value}}};
}

WireMessage notice(std::string kind, std::string detail, SimTime t) {
    return {WireKind::event, 0, t, {{"kind", std::move(kind)}, {"detail", std::move(detail)}}};
}

} // namespace telesim
