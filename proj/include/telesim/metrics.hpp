#pragma once

#include "telesim/condition.hpp"
#include "telesim/config.hpp"
#include "telesim/pupil.hpp"
#include "telesim/session.hpp"
#include "telesim/stats.hpp"
#include "telesim/trial_log.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace telesim {

// ---- perception --------------------------------------------------------------------

struct DelayTriple {
    double visual = 0.0; // ms
    double haptic = 0.0;
    double gap = 0.0;
};

struct PerceptionReport {
    DelayTriple perceived;
    DelayTriple actual;
    double delta_visual = 0.0;
    double delta_haptic = 0.0;
    double delta_gap = 0.0;
};

/// Signed perceived-minus-actual differences. Throws InputError on negative inputs.
PerceptionReport perception_deltas(const DelayTriple& perceived, const DelayTriple& actual);
/// Actual delays of a condition; the gap is |visual - haptic|.
DelayTriple actual_delays(const ConditionSpec& condition);

// ---- performance ---------------------------------------------------------------------

struct CubeResult {
    int cube_id = -1;
    SimTime grab = 0; // first grasp of the cube
    SimTime drop = 0; // registered placement
    double accuracy = 0.0;
    double time_on_task = 0.0; // s
};

struct Performance {
    std::vector<CubeResult> cubes; // placed cubes in placement order
    double time_on_task = 0.0;     // s, summed over placed cubes
    double placement_accuracy = 0.0; // m, mean over placed cubes
    bool complete = false;
};

Performance performance_from_events(const std::vector<EventRow>& events, std::size_t script_length);

/// Operator confirmations (confirm_grasp / confirm_release) falling inside the
/// per-cube grab-to-drop windows.
std::size_t confirmation_points(const std::vector<EventRow>& events, const Performance& performance);

// ---- pupil pipeline --------------------------------------------------------------------

struct PupilOptions {
    BlinkWindow blink;
    HampelOptions hampel;
    std::size_t sax_word_fraction = 2; // samples per SAX segment
    int sax_alphabet = 4;
    SimTime max_alignment = 1000; // ms
    SimTime phase_length = 20000; // ms
};

struct PupilAnalysis {
    std::vector<std::string> stages; // in the order applied
    std::vector<PupilSample> corrected; // baseline-corrected series
    LightReflexFit light_fit;
    bool light_warning = false;
    long sax_offset_samples = 0;
    SimTime sax_offset_ms = 0;
    SimTime pickup_start = 0, pickup_end = 0;
    SimTime dropoff_start = 0, dropoff_end = 0;
    double d_pickup = 0.0;
    double d_dropoff = 0.0;
};

/// Blink correction, Hampel, light-reflex compensation, baseline, SAX
/// alignment against the operator-waiting template, and aggregation over the
/// pickup stage (phase_length from the first grasp) and the drop-off stage
/// (phase_length up to the last placement), both shifted by the SAX offset.
PupilAnalysis analyze_pupil(const TrialLog& log, const Performance& performance, const PupilOptions& options = {});

// ---- per-trial metrics -------------------------------------------------------------------

struct TrialMetrics {
    std::string label; // condition label
    ConditionKind kind = ConditionKind::control;
    SimTime visual_delay = 0;
    SimTime haptic_delay = 0;
    std::uint64_t seed = 0;
    bool aborted = false;
    Performance performance;
    std::size_t confirmation_points = 0;
    std::optional<PerceptionReport> perception;
    std::optional<PupilAnalysis> pupil;
    std::optional<double> tlx_total, tlx_confidence, tlx_frustration;
    std::string pupil_error; // why the pupil pipeline produced nothing
};

TrialMetrics compute_metrics(const TrialLog& log, const PupilOptions& options = {});

/// Runs scripted trials and reduces each to its metrics. Parallel across trials;
/// results are in input order and identical to run_batch_serial.
std::vector<TrialMetrics> run_batch(const std::vector<TrialConfig>& configs, RunOptions options = {false});
std::vector<TrialMetrics> run_batch_serial(const std::vector<TrialConfig>& configs, RunOptions options = {false});

// ---- report ----------------------------------------------------------------------------

struct MetricColumn {
    std::string name;
    std::optional<double> (*extract)(const TrialMetrics&);
};

struct ReportTable {
    std::string title;
    std::vector<std::string> columns;
    std::vector<std::string> row_labels;      // "Control vs Anchoring", ...
    std::vector<std::vector<std::string>> cells; // [row][column], "Smaller (p=0.009)" or "n/a"
    std::vector<std::size_t> pairs;             // pairs used per column
};

/// Condition groups of one metric, each seed's value averaged over the delay
/// levels of its condition. Seeds missing from any present group are dropped.
ConditionGroups group_by_condition(const std::vector<TrialMetrics>& trials,
                                   std::optional<double> (*extract)(const TrialMetrics&));

ReportTable comparison_table(const std::string& title, const std::vector<TrialMetrics>& trials,
                             const std::vector<MetricColumn>& columns, PairedTest test = PairedTest::wilcoxon);

std::vector<ReportTable> standard_tables(const std::vector<TrialMetrics>& trials, PairedTest test = PairedTest::wilcoxon);

std::string format_table(const ReportTable& table);
std::string format_metrics_csv(const std::vector<TrialMetrics>& trials);

/// Writes metrics.csv, performance.tsv, perception.tsv, cognitive_load.tsv,
/// tlx.tsv and pipeline.txt into `dir`.
void write_report(const std::vector<TrialMetrics>& trials, const std::filesystem::path& dir,
                  PairedTest test = PairedTest::wilcoxon);

} // namespace telesim
