#include "telesim/server.hpp"

#include "telesim/errors.hpp"
#include "telesim/session.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <deque>
#include <iostream>

namespace telesim {

namespace {

using Clock = std::chrono::steady_clock;

std::string sys_error(const char* what) { return std::string(what) + ": " + std::strerror(errno); }

bool write_all(int fd, const std::uint8_t* p, std::size_t n) {
    while (n > 0) {
        const ssize_t w = ::send(fd, p, n, MSG_NOSIGNAL);
        if (w < 0) {
            if (errno == EINTR) continue;
            return false;
        }
        p += w;
        n -= static_cast<std::size_t>(w);
    }
    return true;
}

// One client connection: a reader thread feeds the inbox, everything else
// runs on the connection's own thread.
class Connection {
  public:
    explicit Connection(int fd) : fd_(fd) {
        reader_ = std::thread([this] { read_loop(); });
    }

    ~Connection() {
        ::shutdown(fd_, SHUT_RDWR);
        if (reader_.joinable()) reader_.join();
        ::close(fd_);
    }

    bool send(WireMessage m) {
        std::lock_guard lock(write_mutex_);
        if (closed_) return false;
        m.sequence = ++sequence_;
        const auto bytes = encode(m);
        if (!write_all(fd_, bytes.data(), bytes.size())) mark_closed();
        return !closed_;
    }

    std::optional<WireMessage> wait(std::chrono::milliseconds timeout) {
        std::unique_lock lock(in_mutex_);
        in_cv_.wait_for(lock, timeout, [&] { return !inbox_.empty() || closed_; });
        if (inbox_.empty()) return std::nullopt;
        WireMessage m = std::move(inbox_.front());
        inbox_.pop_front();
        return m;
    }

    std::deque<WireMessage> drain() {
        std::lock_guard lock(in_mutex_);
        std::deque<WireMessage> out;
        out.swap(inbox_);
        return out;
    }

    bool closed() const { return closed_; }

  private:
    void mark_closed() {
        closed_ = true;
        in_cv_.notify_all();
    }

    void read_loop() {
        FrameDecoder decoder;
        std::uint8_t buf[65536];
        while (true) {
            const ssize_t n = ::recv(fd_, buf, sizeof buf, 0);
            if (n < 0 && errno == EINTR) continue;
            if (n <= 0) break;
            decoder.feed(std::span<const std::uint8_t>(buf, static_cast<std::size_t>(n)));
            while (true) {
                try {
                    auto m = decoder.next();
                    if (!m) break;
                    {
                        std::lock_guard lock(in_mutex_);
                        inbox_.push_back(std::move(*m));
                    }
                    in_cv_.notify_all();
                } catch (const ProtocolError& e) {
                    send(notice("protocol_error", e.what()));
                }
            }
        }
        std::lock_guard lock(in_mutex_);
        mark_closed();
    }

    int fd_;
    std::thread reader_;
    std::mutex write_mutex_;
    std::uint64_t sequence_ = 0;
    std::mutex in_mutex_;
    std::condition_variable in_cv_;
    std::deque<WireMessage> inbox_;
    std::atomic<bool> closed_{false};
};

Json accepted_payload(const TrialConfig& c) {
    return {{"kind", "accepted"},
            {"label", c.condition.label()},
            {"visual_delay_ms", c.condition.visual_delay},
            {"onset_delay_ms", c.condition.onset_delay},
            {"mode", c.mode == OperatorMode::live ? "live" : "scripted"},
            {"duration_cap_s", c.duration_cap_s}};
}

std::string action_of(const WireMessage& m) {
    if (!m.payload.is_object() || !m.payload.contains("action") || !m.payload["action"].is_string()) return {};
    return m.payload["action"].get<std::string>();
}

struct TrialOutcome {
    TrialLog log;
    bool disconnected = false;
    double wall_seconds = 0.0;
    double max_drift_ms = 0.0;
};

TrialOutcome run_live_trial(Connection& c, const TrialConfig& config, const ServerOptions& options,
                            const std::atomic<bool>& stopping) {
    std::unique_ptr<InputSource> source;
    LiveInput* live = nullptr;
    if (config.mode == OperatorMode::live) {
        auto l = std::make_unique<LiveInput>();
        live = l.get();
        source = std::move(l);
    } else {
        const Pose start = forward_kinematics(config.arm_model(), JointState{ready_configuration(), 0.0, 0.0});
        source = std::make_unique<ScriptedInput>(config, start);
    }
    Session session(config, std::move(source));

    std::uint64_t frame_id = 0;
    std::optional<std::pair<HapticFrame, SimTime>> haptic;
    SessionHooks hooks;
    hooks.on_visual = [&](const VisualFrame& f, SimTime delivered) {
        c.send(visual_frame_message(f, delivered, frame_id++));
    };
    hooks.on_haptic = [&](const HapticFrame& f, SimTime delivered) { haptic.emplace(f, delivered); };
    hooks.on_event = [&](const EventRow& e) { c.send(event_message(e)); };
    session.set_hooks(std::move(hooks));

    TrialOutcome out;
    c.send({WireKind::trial_control, 0, 0, {{"state", "running"}, {"label", config.condition.label()}}});
    const auto t0 = Clock::now();
    std::int64_t gauge_tick = 0;
    std::optional<PostTrial> early_post;
    bool aborted = false;

    while (!session.done()) {
        const SimTime t = session.now();
        if (options.paced) std::this_thread::sleep_until(t0 + std::chrono::milliseconds(t));
        const double lag = std::chrono::duration<double, std::milli>(Clock::now() - t0).count() - static_cast<double>(t);
        out.max_drift_ms = std::max(out.max_drift_ms, std::abs(lag));

        for (WireMessage& m : c.drain()) {
            try {
                if (m.kind == WireKind::input) {
                    if (live) live->push(input_from_json(m.payload, t));
                } else if (m.kind == WireKind::trial_control && action_of(m) == "stop") {
                    session.abort("stopped by client");
                    aborted = true;
                } else if (m.kind == WireKind::questionnaire) {
                    early_post = post_trial_from_json(m.payload);
                } else {
                    c.send(notice("error", "unexpected " + std::string(to_string(m.kind)) + " during a trial", t));
                }
            } catch (const Error& e) {
                c.send(notice("error", e.what(), t));
            }
        }
        if (c.closed()) {
            session.abort("client disconnected");
            out.disconnected = true;
            break;
        }
        if (stopping) {
            session.abort("server stopping");
            aborted = true;
        }
        if (session.done()) break;

        session.step();
        if (t == periodic_tick_time(gauge_tick, config.visual_rate_hz)) {
            if (haptic) c.send(haptic_frame_message(haptic->first, haptic->second));
            ++gauge_tick;
        }
    }
    out.wall_seconds = std::chrono::duration<double>(Clock::now() - t0).count();

    const SimTime end = session.now();
    std::optional<PostTrial> post = early_post;
    if (!out.disconnected) {
        c.send({WireKind::trial_control, 0, end, {{"state", aborted ? "aborted" : "finished"}, {"duration_ms", end}}});
        const auto deadline = Clock::now() + options.questionnaire_timeout;
        while (!post && !c.closed() && !stopping && Clock::now() < deadline) {
            auto m = c.wait(std::chrono::milliseconds(100));
            if (!m) continue;
            if (m->kind == WireKind::questionnaire) {
                try {
                    post = post_trial_from_json(m->payload);
                } catch (const Error& e) {
                    c.send(notice("error", e.what(), end));
                }
            } else if (m->kind != WireKind::input) {
                c.send(notice("error", "awaiting questionnaire", end));
            }
        }
    }
    out.log = session.finish(post);
    return out;
}

} // namespace

Server::Server(ServerOptions options) : options_(std::move(options)) {}

Server::~Server() {
    stop();
    for (std::thread& t : workers_) {
        if (t.joinable()) t.join();
    }
    if (listen_fd_ >= 0) ::close(listen_fd_);
}

void Server::start() {
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) throw IoError("socket", sys_error("socket"));
    const int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(options_.port);
    if (::inet_pton(AF_INET, options_.bind_address.c_str(), &addr.sin_addr) != 1) {
        throw ConfigError("bad bind address '" + options_.bind_address + "'");
    }
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0) {
        throw IoError(options_.bind_address + ":" + std::to_string(options_.port), sys_error("bind"));
    }
    if (::listen(listen_fd_, 8) < 0) throw IoError("listen", sys_error("listen"));
    socklen_t len = sizeof addr;
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
}

void Server::run() {
    if (listen_fd_ < 0) start();
    while (!stopping_) {
        pollfd p{listen_fd_, POLLIN, 0};
        const int r = ::poll(&p, 1, 100);
        if (r <= 0) continue;
        const int fd = ::accept(listen_fd_, nullptr, nullptr);
        if (fd < 0) continue;
        const int one = 1;
        ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
        const std::uint64_t id = next_id_++;
        std::lock_guard lock(mutex_);
        workers_.emplace_back([this, fd, id] { serve_connection(fd, id); });
    }
    std::vector<std::thread> workers;
    {
        std::lock_guard lock(mutex_);
        workers.swap(workers_);
    }
    for (std::thread& t : workers) t.join();
}

void Server::stop() {
    stopping_ = true;
    cv_.notify_all();
}

std::vector<SessionReport> Server::reports() const {
    std::lock_guard lock(mutex_);
    return reports_;
}

bool Server::wait_for_reports(std::size_t n, std::chrono::milliseconds timeout) const {
    std::unique_lock lock(mutex_);
    return cv_.wait_for(lock, timeout, [&] { return reports_.size() >= n; });
}

void Server::add_report(SessionReport r) {
    {
        std::lock_guard lock(mutex_);
        reports_.push_back(std::move(r));
    }
    cv_.notify_all();
}

void Server::serve_connection(int fd, std::uint64_t id) {
    Connection c(fd);
    bool greeted = false;
    std::optional<TrialConfig> config;
    int trial = 0;

    while (!stopping_) {
        auto m = c.wait(std::chrono::milliseconds(100));
        if (!m) {
            if (c.closed()) break;
            continue;
        }
        switch (m->kind) {
        case WireKind::hello:
            greeted = true;
            c.send({WireKind::hello, 0, 0, {{"server", "telesim"}, {"protocol", kWireVersion}}});
            break;
        case WireKind::config:
            if (!greeted) {
                c.send(notice("error", "send hello first"));
                break;
            }
            try {
                if (!m->payload.is_object()) throw ConfigError("config payload must be an object");
                Json merged = options_.base_config;
                merged.merge_patch(m->payload);
                config = config_from_json(merged, options_.base_dir);
                c.send({WireKind::event, 0, 0, accepted_payload(*config)});
            } catch (const Error& e) {
                config.reset();
                c.send(notice("rejected", e.what()));
            }
            break;
        case WireKind::trial_control: {
            if (action_of(*m) != "start") {
                c.send(notice("error", "no trial is running"));
                break;
            }
            if (!config) {
                c.send(notice("error", "no accepted config"));
                break;
            }
            TrialOutcome out;
            try {
                out = run_live_trial(c, *config, options_, stopping_);
            } catch (const Error& e) {
                c.send(notice("error", e.what()));
                break;
            }
            SessionReport r;
            r.log_stem = options_.log_dir / ("trial-" + std::to_string(id) + "-" + std::to_string(trial++) + "-" +
                                             config->condition.label() + "-s" + std::to_string(config->seed));
            r.aborted = out.log.aborted;
            r.abort_reason = out.log.abort_reason;
            r.sim_duration = out.log.duration;
            r.wall_seconds = out.wall_seconds;
            r.max_drift_ms = out.max_drift_ms;
            try {
                std::filesystem::create_directories(options_.log_dir);
                write_log(out.log, r.log_stem);
                c.send(notice("log_written", r.log_stem.string(), out.log.duration));
            } catch (const Error& e) {
                std::cerr << "telesim: " << e.what() << "\n";
                c.send(notice("error", e.what(), out.log.duration));
            }
            add_report(r);
            if (options_.once) stop();
            break;
        }
        case WireKind::input:
            break; // stray inputs between trials are dropped
        default:
            c.send(notice("error", "unexpected " + std::string(to_string(m->kind))));
            break;
        }
    }
}

// ---- client -----------------------------------------------------------------------

WireClient::WireClient(const std::string& host, std::uint16_t port) {
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    if (::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) != 0 || !res) {
        throw IoError(host, "cannot resolve");
    }
    fd_ = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
    const int rc = fd_ < 0 ? -1 : ::connect(fd_, res->ai_addr, res->ai_addrlen);
    ::freeaddrinfo(res);
    if (rc < 0) {
        const std::string err = sys_error("connect");
        if (fd_ >= 0) ::close(fd_);
        throw IoError(host + ":" + std::to_string(port), err);
    }
    const int one = 1;
    ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

WireClient::~WireClient() {
    if (fd_ >= 0) ::close(fd_);
}

void WireClient::send(WireMessage m) {
    m.sequence = ++sequence_;
    const auto bytes = encode(m);
    send_raw(bytes);
}

void WireClient::send_raw(std::span<const std::uint8_t> bytes) {
    if (fd_ < 0 || !write_all(fd_, bytes.data(), bytes.size())) throw IoError("connection", "send failed");
}

std::optional<WireMessage> WireClient::receive(std::chrono::milliseconds timeout) {
    const auto deadline = Clock::now() + timeout;
    while (true) {
        if (auto m = decoder_.next()) return m;
        if (closed_) return std::nullopt;
        const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now()).count();
        if (left <= 0) return std::nullopt;
        pollfd p{fd_, POLLIN, 0};
        if (::poll(&p, 1, static_cast<int>(left)) <= 0) continue;
        std::uint8_t buf[65536];
        const ssize_t n = ::recv(fd_, buf, sizeof buf, 0);
        if (n <= 0) {
            closed_ = true;
            continue;
        }
        decoder_.feed(std::span<const std::uint8_t>(buf, static_cast<std::size_t>(n)));
    }
}

void WireClient::close() {
    if (fd_ >= 0) {
        ::shutdown(fd_, SHUT_RDWR);
        ::close(fd_);
        fd_ = -1;
    }
    closed_ = true;
}

} // namespace telesim
