#include "telesim/errors.hpp"
#include "telesim/metrics.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace telesim;
namespace fs = std::filesystem;

namespace {

TrialMetrics fake(ConditionKind kind, SimTime v, std::uint64_t seed, double tot, double pa = 0.005) {
    TrialMetrics m;
    const ConditionSpec c = make_condition(kind, v);
    m.label = c.label();
    m.kind = kind;
    m.visual_delay = c.visual_delay;
    m.haptic_delay = c.haptic_delay;
    m.seed = seed;
    CubeResult cube;
    cube.accuracy = pa;
    cube.time_on_task = tot;
    m.performance.cubes.push_back(cube);
    m.performance.time_on_task = tot;
    m.performance.placement_accuracy = pa;
    m.performance.complete = true;
    return m;
}

std::optional<double> tot(const TrialMetrics& m) { return m.performance.time_on_task; }

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

} // namespace

TEST_CASE("perception deltas are perceived minus actual") {
    const PerceptionReport r = perception_deltas({100, 200, 100}, {750, 250, 500});
    CHECK(r.delta_visual == -650.0);
    CHECK(r.delta_haptic == -50.0);
    CHECK(r.delta_gap == -400.0);
    CHECK(perception_deltas({900, 0, 0}, {750, 0, 750}).delta_visual == 150.0);
    CHECK_THROWS_AS(perception_deltas({-1, 0, 0}, {0, 0, 0}), InputError);
    CHECK_THROWS_AS(perception_deltas({0, 0, 0}, {0, std::nan(""), 0}), InputError);
}

TEST_CASE("actual delays of each condition") {
    const DelayTriple a = actual_delays(make_condition(ConditionKind::asynchronous, 750));
    CHECK(a.visual == 750.0);
    CHECK(a.haptic == 250.0);
    CHECK(a.gap == 500.0);
    const DelayTriple s = actual_delays(make_condition(ConditionKind::synchronous, 1000));
    CHECK(s.gap == 0.0);
    const DelayTriple n = actual_delays(make_condition(ConditionKind::anchoring, 500));
    CHECK(n.visual == 500.0);
    CHECK(n.haptic == 0.0);
    CHECK(n.gap == 500.0);
}

TEST_CASE("performance from events") {
    const std::vector<EventRow> events{
        {1000, "grasp", 1, 0.0},      {1500, "release", 1, 0.0},   {1600, "grasp", 1, 0.0},
        {4000, "placement", 1, 0.004}, {5000, "grasp", 2, 0.0},    {7250, "placement", 2, 0.002},
        {7300, "confirm_release", 2, 0.0}, {6000, "confirm_grasp", 2, 0.0},
    };
    const Performance p = performance_from_events(events, 4);
    REQUIRE(p.cubes.size() == 2);
    CHECK(p.cubes[0].grab == 1000); // first grasp, not the regrasp
    CHECK(p.cubes[0].time_on_task == 3.0);
    CHECK(p.cubes[1].time_on_task == 2.25);
    CHECK(p.time_on_task == 5.25);
    CHECK(p.placement_accuracy == doctest::Approx(0.003));
    CHECK_FALSE(p.complete);
    CHECK(performance_from_events(events, 2).complete);
    CHECK(confirmation_points(events, p) == 1);
    CHECK_THROWS_AS(performance_from_events({{10, "placement", 3, 0.0}}, 4), InputError);
}

TEST_CASE("seeds are averaged over delay levels and intersected across conditions") {
    std::vector<TrialMetrics> t;
    t.push_back(fake(ConditionKind::control, 0, 1, 10.0));
    t.push_back(fake(ConditionKind::control, 0, 2, 11.0));
    t.push_back(fake(ConditionKind::synchronous, 500, 1, 20.0));
    t.push_back(fake(ConditionKind::synchronous, 1000, 1, 30.0));
    t.push_back(fake(ConditionKind::synchronous, 500, 2, 22.0));
    t.push_back(fake(ConditionKind::synchronous, 500, 3, 40.0)); // no control partner
    TrialMetrics aborted = fake(ConditionKind::control, 0, 3, 1.0);
    aborted.aborted = true;
    t.push_back(aborted);
    const ConditionGroups g = group_by_condition(t, tot);
    REQUIRE(g.size() == 2);
    CHECK(g.at(ConditionKind::control).size() == 2);
    CHECK(g.at(ConditionKind::synchronous).at(1) == 25.0);
    CHECK(g.at(ConditionKind::synchronous).at(2) == 22.0);
    CHECK_FALSE(g.at(ConditionKind::synchronous).count(3));
}

TEST_CASE("comparison table fills every row or marks it n/a") {
    std::vector<TrialMetrics> t;
    for (std::uint64_t s = 1; s <= 8; ++s) {
        t.push_back(fake(ConditionKind::control, 0, s, 10.0 + double(s)));
        t.push_back(fake(ConditionKind::anchoring, 500, s, 12.0 + double(s) * 1.25));
        t.push_back(fake(ConditionKind::synchronous, 500, s, 20.0 + double(s) * 1.5));
    }
    const ReportTable table = comparison_table("performance", t, {{"ToT", tot}});
    REQUIRE(table.row_labels.size() == 6);
    CHECK(table.pairs == std::vector<std::size_t>{8});
    CHECK(table.cells[0][0] == "Smaller (p=0.008)"); // control vs anchoring, 8 of 8 negative, exact 2/256
    CHECK(table.cells[1][0] == "n/a");               // no asynchronous data
    CHECK(table.cells[4][0].starts_with("Smaller"));
    const std::string text = format_table(table);
    CHECK(text.starts_with("Comparison\tToT\nControl vs Anchoring\tSmaller (p=0.008)\n"));
    CHECK(text.ends_with("pairs\t8\n"));
    const ReportTable empty = comparison_table("x", {}, {{"ToT", tot}});
    CHECK(empty.cells[0][0] == "n/a");
    CHECK(empty.pairs == std::vector<std::size_t>{0});
}

TEST_CASE("metrics of a simulated trial") {
    TrialConfig c;
    c.condition = make_condition(ConditionKind::synchronous, 750);
    c.seed = 3;
    TrialLog log = run_trial(c, {false});
    PostTrial post;
    post.perceived_visual = 500;
    post.perceived_haptic = 800;
    post.perceived_gap = 0;
    post.tlx_total = 42;
    log.post = post;
    const TrialMetrics m = compute_metrics(log);
    CHECK(m.label == c.condition.label());
    CHECK(m.performance.complete);
    REQUIRE(m.perception);
    CHECK(m.perception->delta_visual == -250.0);
    CHECK(m.perception->delta_haptic == 50.0);
    CHECK(m.tlx_total == 42.0);
    CHECK_FALSE(m.tlx_confidence);
    REQUIRE(m.pupil);
    CHECK(m.pupil->stages == std::vector<std::string>{"blink_correction", "hampel", "light_reflex", "baseline",
                                                       "sax_alignment", "aggregation"});
    CHECK(m.pupil->d_pickup >= 0.0);
    CHECK(m.pupil->pickup_end - m.pupil->pickup_start == 20000);
    CHECK(std::abs(m.pupil->sax_offset_ms) <= 1000);
    CHECK(m.pupil_error.empty());

    TrialConfig quiet = c;
    quiet.synthetic_pupil = false;
    const TrialMetrics q = compute_metrics(run_trial(quiet, {false}));
    CHECK_FALSE(q.pupil);
    CHECK_FALSE(q.pupil_error.empty());
}

TEST_CASE("report files") {
    std::vector<TrialMetrics> t;
    for (std::uint64_t s = 1; s <= 6; ++s) {
        t.push_back(fake(ConditionKind::control, 0, s, 10.0 + double(s)));
        t.push_back(fake(ConditionKind::asynchronous, 750, s, 13.0 + double(s) * 1.5));
    }
    const fs::path dir = fs::temp_directory_path() / "telesim_test_report";
    fs::remove_all(dir);
    write_report(t, dir);
    for (const char* f : {"metrics.csv", "performance.tsv", "perception.tsv", "cognitive_load.tsv", "tlx.tsv",
                          "pipeline.txt"}) {
        CHECK(fs::exists(dir / f));
    }
    t.back().performance.complete = false; // incomplete trials have no time on task
    write_report(t, dir);
    const std::string csv = slurp(dir / "metrics.csv");
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 13);
    CHECK(csv.find("asynchronous-750,asynchronous,750,250,1,0") != std::string::npos);
    CHECK(slurp(dir / "performance.tsv").find("Control vs Asynchronous\tNo Difference (p=1.000)\tNo Difference (p=0.062)") != std::string::npos);
    CHECK(slurp(dir / "performance.tsv").ends_with("pairs\t6\t5\n"));
    CHECK(slurp(dir / "pipeline.txt").find("Wilcoxon") != std::string::npos);
    fs::remove_all(dir);
}
