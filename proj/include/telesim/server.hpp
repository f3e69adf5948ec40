#pragma once

#include "telesim/config.hpp"
#include "telesim/wire.hpp"

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace telesim {

struct ServerOptions {
    std::string bind_address = "127.0.0.1";
    std::uint16_t port = 0; // 0 picks a free port
    Json base_config = Json::object(); // client config messages are merged over this
    std::filesystem::path base_dir;    // resolves relative scene files
    std::filesystem::path log_dir = "logs";
    bool once = false; // stop after the first trial log is written
    std::chrono::milliseconds questionnaire_timeout{300000};
    bool paced = true; // false lets sim time free-run
};

struct SessionReport {
    std::filesystem::path log_stem;
    bool aborted = false;
    std::string abort_reason;
    SimTime sim_duration = 0;
    double wall_seconds = 0.0;
    double max_drift_ms = 0.0; // largest |wall - sim| seen during the trial
};

// Protocol, per connection:
//   client hello            -> server hello {"server", "protocol"}
//   client config {patch}   -> event "accepted" {label, ...} or event "rejected" {detail}
//   client trial_control {"action": "start"} -> trial_control {"state": "running"}, then
//       visual_frame at delivery, haptic_frame at the operator rate, world events
//   client input {dp, dq, grip} while running (live operator mode)
//   client trial_control {"action": "stop"} aborts the running trial
//   end of trial            -> trial_control {"state": "finished" | "aborted"}
//   client questionnaire {PostTrial} -> event "log_written" {detail: stem}
// A disconnect mid-trial aborts it and writes the partial log.
class Server {
  public:
    explicit Server(ServerOptions options);
    ~Server();

    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;

    /// Binds and listens; port() is valid afterwards.
    void start();
    /// Accepts connections until stop(), or until the first trial finishes with `once`.
    void run();
    void stop();
    std::uint16_t port() const { return port_; }

    std::vector<SessionReport> reports() const;
    /// Blocks until at least `n` trial logs were written or the timeout passes.
    bool wait_for_reports(std::size_t n, std::chrono::milliseconds timeout) const;

  private:
    void serve_connection(int fd, std::uint64_t id);
    void add_report(SessionReport r);

    ServerOptions options_;
    int listen_fd_ = -1;
    std::uint16_t port_ = 0;
    std::atomic<bool> stopping_{false};
    std::atomic<std::uint64_t> next_id_{0};

    mutable std::mutex mutex_;
    mutable std::condition_variable cv_;
    std::vector<SessionReport> reports_;
    std::vector<std::thread> workers_;
};

/// Minimal blocking client, used by tests and tooling.
class WireClient {
  public:
    WireClient(const std::string& host, std::uint16_t port);
    ~WireClient();

    WireClient(const WireClient&) = delete;
    WireClient& operator=(const WireClient&) = delete;

    void send(WireMessage m);
    void send_raw(std::span<const std::uint8_t> bytes);
    /// Next message, or nullopt on timeout or once the server closed.
    std::optional<WireMessage> receive(std::chrono::milliseconds timeout);
    /// Receives until a message satisfies `pred`; nullopt on timeout.
    template <class Pred>
    std::optional<WireMessage> receive_until(Pred pred, std::chrono::milliseconds timeout) {
        const auto deadline = std::chrono::steady_clock::now() + timeout;
        while (true) {
            const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline -
                                                                                   std::chrono::steady_clock::now());
            if (left.count() <= 0) return std::nullopt;
            auto m = receive(left);
            if (!m) {
                if (closed_) return std::nullopt;
                continue;
            }
            if (pred(*m)) return m;
        }
    }
    void close();
    bool closed() const { return closed_; }

  private:
    int fd_ = -1;
    bool closed_ = false;
    std::uint64_t sequence_ = 0;
    FrameDecoder decoder_;
};

} // namespace telesim
