#include "telesim/config.hpp"
#include "telesim/errors.hpp"
#include "telesim/metrics.hpp"
#include "telesim/server.hpp"
#include "telesim/session.hpp"
#include "telesim/trial_log.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <set>

namespace fs = std::filesystem;
using namespace telesim;

namespace {

Server* g_server = nullptr;

void on_signal(int) {
    if (g_server) g_server->stop();
}

Json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError(path.string(), "cannot open");
    try {
        return Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

int cmd_run(const fs::path& config_path, bool headless, int serve_port, const std::string& bind, fs::path out,
            const fs::path& log_dir, bool once, std::optional<std::uint64_t> seed) {
    Json base = read_json(config_path);
    if (seed) base["seed"] = *seed;
    const fs::path base_dir = config_path.parent_path();
    TrialConfig config = config_from_json(base, base_dir);

    if (serve_port >= 0 && !headless) {
        ServerOptions opts;
        opts.bind_address = bind;
        opts.port = static_cast<std::uint16_t>(serve_port);
        opts.base_config = base;
        opts.base_dir = base_dir;
        opts.log_dir = log_dir;
        opts.once = once;
        Server server(opts);
        server.start();
        g_server = &server;
        std::signal(SIGINT, on_signal);
        std::signal(SIGTERM, on_signal);
        std::cout << "telesim: serving " << config.condition.label() << " on " << bind << ":" << server.port()
                  << std::endl;
        server.run();
        g_server = nullptr;
        for (const SessionReport& r : server.reports()) {
            std::cout << r.log_stem.string() << (r.aborted ? " (aborted: " + r.abort_reason + ")" : "") << "\n";
        }
        return 0;
    }

    const TrialLog log = run_trial(config);
    if (out.empty()) {
        out = log_dir / (config_path.stem().string() + "-" + config.condition.label() + "-s" + std::to_string(config.seed));
    }
    if (!out.parent_path().empty()) fs::create_directories(out.parent_path());
    write_log(log, out);

    const Performance perf = performance_from_events(log.events, config.scene.script.steps.size());
    std::cout << out.string() << ": " << config.condition.label() << " seed " << config.seed << ", "
              << log.duration << " ms, " << perf.cubes.size() << "/" << config.scene.script.steps.size()
              << " cubes, ToT " << std::fixed << std::setprecision(3) << perf.time_on_task << " s\n";
    return perf.complete ? 0 : 2;
}

int cmd_analyze(const std::vector<std::string>& inputs, const fs::path& report, const std::string& test) {
    std::set<fs::path> stems;
    std::vector<fs::path> ordered;
    for (const std::string& in : inputs) {
        const fs::path stem = log_stem(in);
        if (stems.insert(stem).second) ordered.push_back(stem);
    }
    std::vector<TrialMetrics> trials;
    for (const fs::path& stem : ordered) {
        trials.push_back(compute_metrics(read_log(stem)));
        const TrialMetrics& m = trials.back();
        if (!m.pupil_error.empty()) std::cerr << stem.string() << ": pupil: " << m.pupil_error << "\n";
    }
    const PairedTest kind = test == "t" ? PairedTest::t : PairedTest::wilcoxon;
    write_report(trials, report, kind);
    for (const ReportTable& t : standard_tables(trials, kind)) std::cout << t.title << "\n" << format_table(t) << "\n";
    std::cout << "report written to " << report.string() << "\n";
    return 0;
}

int cmd_replay(const fs::path& path, const fs::path& out) {
    const TrialLog original = read_log(path);
    const TrialLog again = replay(original);
    if (!out.empty()) {
        if (!out.parent_path().empty()) fs::create_directories(out.parent_path());
        write_log(again, out);
    }
    const auto diffs = diff_logs(original, again);
    if (diffs.empty()) {
        std::cout << "replay identical (" << again.duration << " ms)\n";
        return 0;
    }
    for (const std::string& d : diffs) std::cout << d << "\n";
    return 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"telesim: teleoperation delay simulation and analysis"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "run one trial headless, or host live trials");
    std::string config_path;
    bool headless = false;
    int serve_port = -1;
    std::string bind = "127.0.0.1";
    std::string out;
    std::string log_dir = "logs";
    bool once = false;
    std::optional<std::uint64_t> seed;
    run->add_option("--config", config_path, "trial config (JSON)")->required()->check(CLI::ExistingFile);
    auto* headless_flag = run->add_flag("--headless", headless, "run the scripted operator without a client");
    run->add_option("--serve", serve_port, "serve the wire protocol on this TCP port (0 picks one)")
        ->excludes(headless_flag);
    run->add_option("--bind", bind, "address to listen on");
    run->add_option("--out", out, "log stem for a headless run");
    run->add_option("--log-dir", log_dir, "directory for trial logs");
    run->add_flag("--once", once, "exit after the first served trial");
    run->add_option("--seed", seed, "override the config seed");

    auto* analyze = app.add_subcommand("analyze", "compute metrics and comparison tables from trial logs");
    std::vector<std::string> logs;
    std::string report_dir;
    std::string test = "wilcoxon";
    analyze->add_option("logs", logs, "trial logs (stems or any of their files)")->required();
    analyze->add_option("--report", report_dir, "output directory")->required();
    analyze->add_option("--test", test, "paired test")->check(CLI::IsMember({"wilcoxon", "t"}));

    auto* replay_cmd = app.add_subcommand("replay", "re-run a logged trial and compare");
    std::string replay_path;
    std::string replay_out;
    replay_cmd->add_option("log", replay_path, "trial log")->required();
    replay_cmd->add_option("--out", replay_out, "write the replayed log to this stem");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) return cmd_run(config_path, headless, serve_port, bind, out, log_dir, once, seed);
        if (*analyze) return cmd_analyze(logs, report_dir, test);
        if (*replay_cmd) return cmd_replay(replay_path, replay_out);
    } catch (const Error& e) {
        std::cerr << "telesim: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
