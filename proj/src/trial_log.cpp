#include "telesim/trial_log.hpp"

#include "telesim/errors.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <string_view>
#include <utility>

namespace telesim {

namespace fs = std::filesystem;

namespace {

using Columns = std::vector<std::pair<const char*, const char*>>;

const Columns& tick_columns() {
    static const Columns c = {
        {"t_ms", "simulation time"},
        {"q1", "joint 1 angle, rad"}, {"q2", "joint 2 angle, rad"}, {"q3", "joint 3 angle, rad"},
        {"q4", "joint 4 angle, rad"}, {"q5", "joint 5 angle, rad"}, {"q6", "joint 6 angle, rad"},
        {"q7", "joint 7 angle, rad"},
        {"aperture_m", "gripper aperture"},
        {"ee_x", "end effector position, m"}, {"ee_y", ""}, {"ee_z", ""},
        {"ee_qw", "end effector orientation quaternion"}, {"ee_qx", ""}, {"ee_qy", ""}, {"ee_qz", ""},
        {"grasp", "grasped cube id, -1 if none"},
        {"script_index", "placed cubes so far"},
        {"emitted", "channel event ids enqueued this tick, ';'-separated"},
        {"delivered", "channel event ids drained this tick, ';'-separated"},
        {"fx", "rendered haptic force after clamp, N"}, {"fy", ""}, {"fz", ""},
        {"torque_z", "rendered torque, N m"},
        {"clamped", "1 if the actuator clamp was active"},
    };
    return c;
}

const Columns& input_columns() {
    static const Columns c = {
        {"t_ms", "operator tick time"},
        {"dx", "commanded position delta, m"}, {"dy", ""}, {"dz", ""},
        {"rw", "commanded rotation delta quaternion"}, {"rx", ""}, {"ry", ""}, {"rz", ""},
        {"grip_n", "grip force, N"},
        {"command_id", "event id of the joint command sent"},
        {"ik_ok", "0 if IK failed and the previous joints were resent"},
        {"waiting", "1 while the operator waits for feedback"},
    };
    return c;
}

const Columns& frame_columns() {
    static const Columns c = {
        {"id", "visual event id"},
        {"emitted_ms", "snapshot time"},
        {"delivered_ms", "delivery time, empty if still in flight at trial end"},
    };
    return c;
}

const Columns& event_columns() {
    static const Columns c = {
        {"t_ms", "event time"},
        {"kind", "grasp, grasp_rejected, release, placement, drop_rejected, clamped_input, grasp_command, "
                 "confirm_grasp, release_command, confirm_release, retry, ik_failure"},
        {"object_id", "cube id, -1 if none"},
        {"value", "placement accuracy in m for placements, IK residual for ik_failure, else 0"},
    };
    return c;
}

const Columns& pupil_columns() {
    static const Columns c = {
        {"t_ms", "sample time"},
        {"diameter_mm", "pupil diameter, empty while missing"},
        {"luminance", "display luminance of the frame shown"},
    };
    return c;
}

const Columns& post_columns() {
    static const Columns c = {
        {"perceived_visual_ms", "reported visual delay, empty if skipped"},
        {"perceived_haptic_ms", "reported haptic delay"},
        {"perceived_gap_ms", "reported visuomotor gap"},
        {"tlx_total", "NASA-TLX total"},
        {"tlx_confidence", "NASA-TLX self-confidence"},
        {"tlx_frustration", "NASA-TLX frustration"},
    };
    return c;
}

std::string version_line(const char* kind) {
    return std::string("# ") + kLogFormat + " v" + std::to_string(kLogVersion) + " " + kind + "\n";
}

std::string header(const Columns& cols) {
    std::string h;
    for (std::size_t i = 0; i < cols.size(); ++i) {
        if (i) h += ',';
        h += cols[i].first;
    }
    return h + "\n";
}

Json dictionary(const Columns& cols) {
    Json j = Json::array();
    for (const auto& [name, desc] : cols) j.push_back(Json::array({name, desc}));
    return j;
}

void put(std::string& out, double v) { out += format_double(v); }
void put(std::string& out, std::int64_t v) { out += std::to_string(v); }
void put(std::string& out, std::uint64_t v) { out += std::to_string(v); }

void put_ids(std::string& out, const std::vector<std::uint64_t>& ids) {
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (i) out += ';';
        out += std::to_string(ids[i]);
    }
}

struct Sep {
    std::string& out;
    bool first = true;
    void next() {
        if (!first) out += ',';
        first = false;
    }
};

void put_opt(std::string& out, const std::optional<double>& v) {
    if (v) put(out, *v);
}

// ---- parsing ---------------------------------------------------------------------

class Reader {
  public:
    Reader(std::string_view text, std::string file) : text_(text), file_(std::move(file)) {}

    bool next(std::string_view& line) {
        if (pos_ >= text_.size()) return false;
        const std::size_t end = text_.find('\n', pos_);
        if (end == std::string_view::npos) {
            line = text_.substr(pos_);
            pos_ = text_.size();
        } else {
            line = text_.substr(pos_, end - pos_);
            pos_ = end + 1;
        }
        ++line_no_;
        return true;
    }

    [[noreturn]] void fail(const std::string& detail) const { throw ParseError(file_, line_no_, detail); }

    void expect_preamble(const char* kind, const Columns& cols) {
        std::string_view line;
        if (!next(line)) fail("missing version line");
        const std::string prefix = std::string("# ") + kLogFormat + " v";
        if (line.substr(0, prefix.size()) != prefix) fail("not a trial log file");
        const std::string_view rest = line.substr(prefix.size());
        int version = 0;
        const auto [p, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), version);
        if (ec != std::errc()) fail("unreadable format version");
        if (version != kLogVersion) {
            throw FormatVersionError(file_ + ": log format version " + std::to_string(version) +
                                     " is not supported (expected " + std::to_string(kLogVersion) + ")");
        }
        if (std::string_view(p, static_cast<std::size_t>(rest.data() + rest.size() - p)) != std::string(" ") + kind) {
            fail(std::string("expected a '") + kind + "' file");
        }
        if (!next(line) || std::string(line) + "\n" != header(cols)) fail("unexpected column header");
    }

    std::vector<std::string_view> fields(std::string_view line, std::size_t expected) const {
        std::vector<std::string_view> out;
        std::size_t start = 0;
        while (true) {
            const std::size_t comma = line.find(',', start);
            out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
        if (out.size() != expected) {
            fail("expected " + std::to_string(expected) + " fields, found " + std::to_string(out.size()));
        }
        return out;
    }

    double real(std::string_view f) const {
        if (f.empty()) return kMissing;
        double v = 0.0;
        const auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
        if (ec != std::errc() || p != f.data() + f.size()) fail("bad number '" + std::string(f) + "'");
        return v;
    }

    std::optional<double> optional_real(std::string_view f) const {
        if (f.empty()) return std::nullopt;
        return real(f);
    }

    template <class I>
    I integer(std::string_view f) const {
        I v{};
        const auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
        if (f.empty() || ec != std::errc() || p != f.data() + f.size()) {
            fail("bad integer '" + std::string(f) + "'");
        }
        return v;
    }

    bool flag(std::string_view f) const {
        if (f == "0") return false;
        if (f == "1") return true;
        fail("bad flag '" + std::string(f) + "'");
    }

    std::vector<std::uint64_t> ids(std::string_view f) const {
        std::vector<std::uint64_t> out;
        if (f.empty()) return out;
        std::size_t start = 0;
        while (true) {
            const std::size_t semi = f.find(';', start);
            out.push_back(integer<std::uint64_t>(f.substr(start, semi == std::string_view::npos ? semi : semi - start)));
            if (semi == std::string_view::npos) break;
            start = semi + 1;
        }
        return out;
    }

  private:
    std::string_view text_;
    std::string file_;
    std::size_t pos_ = 0;
    std::size_t line_no_ = 0;
};

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(path.string(), "cannot open for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw IoError(path.string(), "read failed");
    return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(path.string(), "cannot open for writing");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.flush();
    if (!out) throw IoError(path.string(), "write failed");
}

} // namespace

std::string format_double(double v) {
    if (std::isnan(v)) return {};
    char buf[64];
    const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
}

LogPaths::LogPaths(const fs::path& stem)
    : meta(stem.string() + ".meta.json"), ticks(stem.string() + ".ticks.csv"), inputs(stem.string() + ".inputs.csv"),
      frames(stem.string() + ".frames.csv"), events(stem.string() + ".events.csv"), pupil(stem.string() + ".pupil.csv"),
      post(stem.string() + ".post.csv") {}

fs::path log_stem(const fs::path& path) {
    const std::string s = path.string();
    for (const char* suffix :
         {".meta.json", ".ticks.csv", ".inputs.csv", ".frames.csv", ".events.csv", ".pupil.csv", ".post.csv"}) {
        const std::string suf(suffix);
        if (s.size() > suf.size() && s.compare(s.size() - suf.size(), suf.size(), suf) == 0) {
            return s.substr(0, s.size() - suf.size());
        }
    }
    return path;
}

LogText serialize_log(const TrialLog& log) {
    LogText text;

    Json meta;
    meta["format"] = kLogFormat;
    meta["version"] = kLogVersion;
    meta["config"] = log.config;
    meta["aborted"] = log.aborted;
    meta["abort_reason"] = log.abort_reason;
    meta["duration_ms"] = log.duration;
    meta["ticks_recorded"] = log.ticks_recorded;
    meta["high_water"] = {{"command", log.high_water[0]}, {"visual", log.high_water[1]}, {"haptic", log.high_water[2]}};
    meta["columns"] = {{"ticks", dictionary(tick_columns())},   {"inputs", dictionary(input_columns())},
                       {"frames", dictionary(frame_columns())}, {"events", dictionary(event_columns())},
                       {"pupil", dictionary(pupil_columns())},  {"post", dictionary(post_columns())}};
    text.meta = meta.dump(2) + "\n";

    {
        std::string& out = text.ticks;
        out = version_line("ticks") + header(tick_columns());
        out.reserve(out.size() + log.ticks.size() * 200);
        for (const TickRow& r : log.ticks) {
            Sep s{out};
            s.next(); put(out, r.t);
            for (int i = 0; i < kNumJoints; ++i) { s.next(); put(out, r.q[i]); }
            s.next(); put(out, r.aperture);
            for (int i = 0; i < 3; ++i) { s.next(); put(out, r.ee_position[i]); }
            s.next(); put(out, r.ee_orientation.w());
            s.next(); put(out, r.ee_orientation.x());
            s.next(); put(out, r.ee_orientation.y());
            s.next(); put(out, r.ee_orientation.z());
            s.next(); put(out, static_cast<std::int64_t>(r.grasp));
            s.next(); put(out, static_cast<std::uint64_t>(r.script_index));
            s.next(); put_ids(out, r.emitted);
            s.next(); put_ids(out, r.delivered);
            for (int i = 0; i < 3; ++i) { s.next(); put(out, r.force[i]); }
            s.next(); put(out, r.torque_z);
            s.next(); out += r.clamped ? '1' : '0';
            out += '\n';
        }
    }
    {
        std::string& out = text.inputs;
        out = version_line("inputs") + header(input_columns());
        for (const InputRow& r : log.inputs) {
            Sep s{out};
            s.next(); put(out, r.t);
            for (int i = 0; i < 3; ++i) { s.next(); put(out, r.position_delta[i]); }
            s.next(); put(out, r.rotation_delta.w());
            s.next(); put(out, r.rotation_delta.x());
            s.next(); put(out, r.rotation_delta.y());
            s.next(); put(out, r.rotation_delta.z());
            s.next(); put(out, r.grip_force);
            s.next(); put(out, r.command_id);
            s.next(); out += r.ik_ok ? '1' : '0';
            s.next(); out += r.waiting ? '1' : '0';
            out += '\n';
        }
    }
    {
        std::string& out = text.frames;
        out = version_line("frames") + header(frame_columns());
        for (const FrameRow& r : log.frames) {
            put(out, r.id);
            out += ',';
            put(out, r.emitted);
            out += ',';
            if (r.delivered) put(out, *r.delivered);
            out += '\n';
        }
    }
    {
        std::string& out = text.events;
        out = version_line("events") + header(event_columns());
        for (const EventRow& r : log.events) {
            put(out, r.t);
            out += ',' + r.kind + ',';
            put(out, static_cast<std::int64_t>(r.object_id));
            out += ',';
            put(out, r.value);
            out += '\n';
        }
    }
    {
        std::string& out = text.pupil;
        out = version_line("pupil") + header(pupil_columns());
        for (const PupilSample& r : log.pupil) {
            put(out, r.timestamp);
            out += ',';
            put(out, r.diameter);
            out += ',';
            put(out, r.luminance);
            out += '\n';
        }
    }
    {
        std::string& out = text.post;
        out = version_line("post") + header(post_columns());
        if (log.post) {
            const PostTrial& p = *log.post;
            Sep s{out};
            for (const auto* v : {&p.perceived_visual, &p.perceived_haptic, &p.perceived_gap, &p.tlx_total,
                                  &p.tlx_confidence, &p.tlx_frustration}) {
                s.next();
                put_opt(out, *v);
            }
            out += '\n';
        }
    }
    return text;
}

TrialLog parse_log(const LogText& text, const std::string& origin) {
    TrialLog log;
    Json meta;
    try {
        meta = Json::parse(text.meta);
    } catch (const Json::parse_error& e) {
        throw ParseError(origin + ".meta.json", 0, e.what());
    }
    if (!meta.is_object() || meta.value("format", "") != kLogFormat) {
        throw ParseError(origin + ".meta.json", 0, "not a trial log");
    }
    const int version = meta.value("version", -1);
    if (version != kLogVersion) {
        throw FormatVersionError(origin + ": log format version " + std::to_string(version) +
                                 " is not supported (expected " + std::to_string(kLogVersion) + ")");
    }
    try {
        log.config = meta.at("config");
        log.aborted = meta.at("aborted").get<bool>();
        log.abort_reason = meta.at("abort_reason").get<std::string>();
        log.duration = meta.at("duration_ms").get<SimTime>();
        log.ticks_recorded = meta.at("ticks_recorded").get<bool>();
        const Json& hw = meta.at("high_water");
        log.high_water = {hw.at("command").get<std::size_t>(), hw.at("visual").get<std::size_t>(),
                          hw.at("haptic").get<std::size_t>()};
    } catch (const Json::exception& e) {
        throw ParseError(origin + ".meta.json", 0, e.what());
    }

    std::string_view line;
    {
        Reader rd(text.ticks, origin + ".ticks.csv");
        rd.expect_preamble("ticks", tick_columns());
        while (rd.next(line)) {
            const auto f = rd.fields(line, tick_columns().size());
            TickRow r;
            std::size_t k = 0;
            r.t = rd.integer<SimTime>(f[k++]);
            for (int i = 0; i < kNumJoints; ++i) r.q[i] = rd.real(f[k++]);
            r.aperture = rd.real(f[k++]);
            for (int i = 0; i < 3; ++i) r.ee_position[i] = rd.real(f[k++]);
            const double w = rd.real(f[k++]), x = rd.real(f[k++]), y = rd.real(f[k++]), z = rd.real(f[k++]);
            r.ee_orientation = Eigen::Quaterniond(w, x, y, z);
            r.grasp = rd.integer<int>(f[k++]);
            r.script_index = rd.integer<std::size_t>(f[k++]);
            r.emitted = rd.ids(f[k++]);
            r.delivered = rd.ids(f[k++]);
            for (int i = 0; i < 3; ++i) r.force[i] = rd.real(f[k++]);
            r.torque_z = rd.real(f[k++]);
            r.clamped = rd.flag(f[k++]);
            if (!log.ticks.empty() && r.t < log.ticks.back().t) rd.fail("tick time decreased");
            log.ticks.push_back(std::move(r));
        }
    }
    {
        Reader rd(text.inputs, origin + ".inputs.csv");
        rd.expect_preamble("inputs", input_columns());
        while (rd.next(line)) {
            const auto f = rd.fields(line, input_columns().size());
            InputRow r;
            std::size_t k = 0;
            r.t = rd.integer<SimTime>(f[k++]);
            for (int i = 0; i < 3; ++i) r.position_delta[i] = rd.real(f[k++]);
            const double w = rd.real(f[k++]), x = rd.real(f[k++]), y = rd.real(f[k++]), z = rd.real(f[k++]);
            r.rotation_delta = Eigen::Quaterniond(w, x, y, z);
            r.grip_force = rd.real(f[k++]);
            r.command_id = rd.integer<std::uint64_t>(f[k++]);
            r.ik_ok = rd.flag(f[k++]);
            r.waiting = rd.flag(f[k++]);
            if (!log.inputs.empty() && r.t < log.inputs.back().t) rd.fail("input time decreased");
            log.inputs.push_back(r);
        }
    }
    {
        Reader rd(text.frames, origin + ".frames.csv");
        rd.expect_preamble("frames", frame_columns());
        while (rd.next(line)) {
            const auto f = rd.fields(line, frame_columns().size());
            FrameRow r;
            r.id = rd.integer<std::uint64_t>(f[0]);
            r.emitted = rd.integer<SimTime>(f[1]);
            if (!f[2].empty()) r.delivered = rd.integer<SimTime>(f[2]);
            log.frames.push_back(r);
        }
    }
    {
        Reader rd(text.events, origin + ".events.csv");
        rd.expect_preamble("events", event_columns());
        while (rd.next(line)) {
            const auto f = rd.fields(line, event_columns().size());
            EventRow r;
            r.t = rd.integer<SimTime>(f[0]);
            r.kind = std::string(f[1]);
            if (r.kind.empty()) rd.fail("empty event kind");
            r.object_id = rd.integer<int>(f[2]);
            r.value = rd.real(f[3]);
            if (!log.events.empty() && r.t < log.events.back().t) rd.fail("event time decreased");
            log.events.push_back(std::move(r));
        }
    }
    {
        Reader rd(text.pupil, origin + ".pupil.csv");
        rd.expect_preamble("pupil", pupil_columns());
        while (rd.next(line)) {
            const auto f = rd.fields(line, pupil_columns().size());
            PupilSample s;
            s.timestamp = rd.integer<SimTime>(f[0]);
            s.diameter = rd.real(f[1]);
            s.luminance = rd.real(f[2]);
            if (std::isnan(s.luminance)) rd.fail("missing luminance");
            log.pupil.push_back(s);
        }
    }
    {
        Reader rd(text.post, origin + ".post.csv");
        rd.expect_preamble("post", post_columns());
        if (rd.next(line)) {
            const auto f = rd.fields(line, post_columns().size());
            PostTrial p;
            p.perceived_visual = rd.optional_real(f[0]);
            p.perceived_haptic = rd.optional_real(f[1]);
            p.perceived_gap = rd.optional_real(f[2]);
            p.tlx_total = rd.optional_real(f[3]);
            p.tlx_confidence = rd.optional_real(f[4]);
            p.tlx_frustration = rd.optional_real(f[5]);
            log.post = p;
            if (rd.next(line)) rd.fail("more than one questionnaire row");
        }
    }

    // every delivered id must reference an emitted one
    if (log.ticks_recorded) {
        std::vector<std::uint64_t> emitted;
        for (const TickRow& r : log.ticks) emitted.insert(emitted.end(), r.emitted.begin(), r.emitted.end());
        std::sort(emitted.begin(), emitted.end());
        for (std::size_t i = 0; i < log.ticks.size(); ++i) {
            for (std::uint64_t id : log.ticks[i].delivered) {
                if (!std::binary_search(emitted.begin(), emitted.end(), id)) {
                    throw ParseError(origin + ".ticks.csv", i + 3,
                                     "delivered event " + std::to_string(id) + " was never emitted");
                }
            }
        }
    }
    return log;
}

void write_log(const TrialLog& log, const fs::path& stem) {
    if (stem.has_parent_path() && !stem.parent_path().empty()) {
        std::error_code ec;
        fs::create_directories(stem.parent_path(), ec);
        if (ec) throw IoError(stem.parent_path().string(), ec.message());
    }
    const LogText text = serialize_log(log);
    const LogPaths p(stem);
    write_file(p.ticks, text.ticks);
    write_file(p.inputs, text.inputs);
    write_file(p.frames, text.frames);
    write_file(p.events, text.events);
    write_file(p.pupil, text.pupil);
    write_file(p.post, text.post);
    write_file(p.meta, text.meta);
}

TrialLog read_log(const fs::path& path) {
    const fs::path stem = log_stem(path);
    const LogPaths p(stem);
    LogText text;
    text.meta = read_file(p.meta);
    text.ticks = read_file(p.ticks);
    text.inputs = read_file(p.inputs);
    text.frames = read_file(p.frames);
    text.events = read_file(p.events);
    text.pupil = read_file(p.pupil);
    text.post = read_file(p.post);
    return parse_log(text, stem.string());
}

std::vector<std::string> diff_logs(const TrialLog& a, const TrialLog& b) {
    const LogText ta = serialize_log(a);
    const LogText tb = serialize_log(b);
    std::vector<std::string> out;
    auto compare = [&](const char* name, const std::string& x, const std::string& y) {
        if (x == y) return;
        std::size_t line = 1;
        std::size_t i = 0;
        while (i < x.size() && i < y.size() && x[i] == y[i]) {
            if (x[i] == '\n') ++line;
            ++i;
        }
        out.push_back(std::string(name) + ": first difference at line " + std::to_string(line));
    };
    compare("meta", ta.meta, tb.meta);
    compare("ticks", ta.ticks, tb.ticks);
    compare("inputs", ta.inputs, tb.inputs);
    compare("frames", ta.frames, tb.frames);
    compare("events", ta.events, tb.events);
    compare("pupil", ta.pupil, tb.pupil);
    compare("post", ta.post, tb.post);
    return out;
}

} // namespace telesim
