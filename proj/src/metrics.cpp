#include "telesim/metrics.hpp"

#include "telesim/errors.hpp"

#include <algorithm>
#include <exception>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace telesim {

namespace fs = std::filesystem;

// ---- perception --------------------------------------------------------------------

PerceptionReport perception_deltas(const DelayTriple& perceived, const DelayTriple& actual) {
    for (double v : {perceived.visual, perceived.haptic, perceived.gap, actual.visual, actual.haptic, actual.gap}) {
        if (!(v >= 0.0)) throw InputError("delays must be non-negative");
    }
    PerceptionReport r;
    r.perceived = perceived;
    r.actual = actual;
    r.delta_visual = perceived.visual - actual.visual;
    r.delta_haptic = perceived.haptic - actual.haptic;
    r.delta_gap = perceived.gap - actual.gap;
    return r;
}

DelayTriple actual_delays(const ConditionSpec& condition) {
    return {static_cast<double>(condition.visual_delay), static_cast<double>(condition.haptic_delay),
            static_cast<double>(condition.visuomotor_gap())};
}

// ---- performance ---------------------------------------------------------------------

Performance performance_from_events(const std::vector<EventRow>& events, std::size_t script_length) {
    Performance p;
    std::map<int, SimTime> first_grab;
    for (const EventRow& e : events) {
        if (e.kind == "grasp") {
            first_grab.try_emplace(e.object_id, e.t);
        } else if (e.kind == "placement") {
            const auto it = first_grab.find(e.object_id);
            if (it == first_grab.end()) {
                throw InputError("placement of cube " + std::to_string(e.object_id) + " without a grasp");
            }
            CubeResult c;
            c.cube_id = e.object_id;
            c.grab = it->second;
            c.drop = e.t;
            c.accuracy = e.value;
            c.time_on_task = time_on_task(to_seconds(c.grab), to_seconds(c.drop));
            p.cubes.push_back(c);
        }
    }
    double acc = 0.0;
    for (const CubeResult& c : p.cubes) {
        p.time_on_task += c.time_on_task;
        acc += c.accuracy;
    }
    if (!p.cubes.empty()) p.placement_accuracy = acc / static_cast<double>(p.cubes.size());
    p.complete = script_length > 0 && p.cubes.size() >= script_length;
    return p;
}

std::size_t confirmation_points(const std::vector<EventRow>& events, const Performance& performance) {
    std::size_t n = 0;
    for (const EventRow& e : events) {
        if (e.kind != "confirm_grasp" && e.kind != "confirm_release") continue;
        for (const CubeResult& c : performance.cubes) {
            if (e.t >= c.grab && e.t <= c.drop) {
                ++n;
                break;
            }
        }
    }
    return n;
}

// ---- pupil pipeline --------------------------------------------------------------------

PupilAnalysis analyze_pupil(const TrialLog& log, const Performance& performance, const PupilOptions& options) {
    if (log.pupil.empty()) throw InputError("trial has no pupil samples");
    if (performance.cubes.empty()) throw InputError("trial has no placements to define stages");
    const TrialConfig config = config_of(log);

    PupilAnalysis a;
    std::vector<PupilSample> s = correct_blinks(log.pupil, options.blink);
    a.stages.push_back("blink_correction");
    s = hampel_filter(s, options.hampel);
    a.stages.push_back("hampel");
    LightReflexResult light = compensate_light_reflex(s);
    a.light_fit = light.fit;
    a.light_warning = light.warning;
    s = std::move(light.samples);
    a.stages.push_back("light_reflex");
    s = baseline_correct(s);
    a.stages.push_back("baseline");

    // the load response is aligned to the moments the operator waited for feedback
    std::vector<double> series(s.size());
    std::transform(s.begin(), s.end(), series.begin(), [](const PupilSample& p) { return p.diameter; });
    std::vector<double> reference;
    for (const InputRow& r : log.inputs) reference.push_back(r.waiting ? 1.0 : 0.0);
    if (reference.size() != series.size()) throw InputError("pupil samples and operator ticks differ in count");
    const std::size_t word = std::max<std::size_t>(1, series.size() / std::max<std::size_t>(1, options.sax_word_fraction));
    const auto max_lag = static_cast<std::size_t>(options.max_alignment * config.visual_rate_hz / 1000);
    const SaxAlignment align = sax_align(series, reference, word, options.sax_alphabet, max_lag);
    a.sax_offset_samples = align.offset;
    a.sax_offset_ms = static_cast<SimTime>(std::llround(static_cast<double>(align.offset) * 1000.0 / config.visual_rate_hz));
    a.stages.push_back("sax_alignment");

    SimTime first_grab = performance.cubes.front().grab;
    for (const CubeResult& c : performance.cubes) first_grab = std::min(first_grab, c.grab);
    const SimTime last_drop = performance.cubes.back().drop;
    a.pickup_start = first_grab + a.sax_offset_ms;
    a.pickup_end = a.pickup_start + options.phase_length;
    a.dropoff_end = last_drop + a.sax_offset_ms;
    a.dropoff_start = a.dropoff_end - options.phase_length;
    a.d_pickup = aggregate_dilation(s, a.pickup_start, a.pickup_end);
    a.d_dropoff = aggregate_dilation(s, a.dropoff_start, a.dropoff_end);
    a.stages.push_back("aggregation");
    a.corrected = std::move(s);
    return a;
}

// ---- per-trial metrics -------------------------------------------------------------------

TrialMetrics compute_metrics(const TrialLog& log, const PupilOptions& options) {
    const TrialConfig config = config_of(log);
    TrialMetrics m;
    m.label = config.condition.label();
    m.kind = config.condition.kind;
    m.visual_delay = config.condition.visual_delay;
    m.haptic_delay = config.condition.haptic_delay;
    m.seed = config.seed;
    m.aborted = log.aborted;
    m.performance = performance_from_events(log.events, config.scene.script.steps.size());
    m.confirmation_points = confirmation_points(log.events, m.performance);
    if (log.post) {
        const PostTrial& p = *log.post;
        if (p.has_perception()) {
            m.perception = perception_deltas({*p.perceived_visual, *p.perceived_haptic, *p.perceived_gap},
                                             actual_delays(config.condition));
        }
        m.tlx_total = p.tlx_total;
        m.tlx_confidence = p.tlx_confidence;
        m.tlx_frustration = p.tlx_frustration;
    }
    if (!log.pupil.empty()) {
        try {
            m.pupil = analyze_pupil(log, m.performance, options);
        } catch (const Error& e) {
            m.pupil_error = e.what();
        }
    } else {
        m.pupil_error = "no pupil samples";
    }
    return m;
}

std::vector<TrialMetrics> run_batch(const std::vector<TrialConfig>& configs, RunOptions options) {
    std::vector<TrialMetrics> out(configs.size());
    std::vector<std::exception_ptr> errors(configs.size());
    const auto n = static_cast<std::ptrdiff_t>(configs.size());
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const auto k = static_cast<std::size_t>(i);
        try {
            out[k] = compute_metrics(run_trial(configs[k], options));
        } catch (...) {
            errors[k] = std::current_exception();
        }
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return out;
}

std::vector<TrialMetrics> run_batch_serial(const std::vector<TrialConfig>& configs, RunOptions options) {
    std::vector<TrialMetrics> out;
    out.reserve(configs.size());
    for (const TrialConfig& c : configs) out.push_back(compute_metrics(run_trial(c, options)));
    return out;
}

// ---- report ----------------------------------------------------------------------------

namespace {

std::optional<double> pa(const TrialMetrics& m) {
    if (m.performance.cubes.empty()) return std::nullopt;
    return m.performance.placement_accuracy;
}
std::optional<double> tot(const TrialMetrics& m) {
    if (!m.performance.complete) return std::nullopt;
    return m.performance.time_on_task;
}
std::optional<double> dv(const TrialMetrics& m) {
    return m.perception ? std::optional(m.perception->delta_visual) : std::nullopt;
}
std::optional<double> dh(const TrialMetrics& m) {
    return m.perception ? std::optional(m.perception->delta_haptic) : std::nullopt;
}
std::optional<double> dgap(const TrialMetrics& m) {
    return m.perception ? std::optional(m.perception->delta_gap) : std::nullopt;
}
std::optional<double> d_pickup(const TrialMetrics& m) {
    return m.pupil ? std::optional(m.pupil->d_pickup) : std::nullopt;
}
std::optional<double> d_dropoff(const TrialMetrics& m) {
    return m.pupil ? std::optional(m.pupil->d_dropoff) : std::nullopt;
}
std::optional<double> tlx_total(const TrialMetrics& m) { return m.tlx_total; }
std::optional<double> tlx_confidence(const TrialMetrics& m) { return m.tlx_confidence; }
std::optional<double> tlx_frustration(const TrialMetrics& m) { return m.tlx_frustration; }

std::string cell(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

} // namespace

ConditionGroups group_by_condition(const std::vector<TrialMetrics>& trials,
                                   std::optional<double> (*extract)(const TrialMetrics&)) {
    std::map<ConditionKind, std::map<std::uint64_t, std::pair<double, int>>> sums;
    for (const TrialMetrics& t : trials) {
        if (t.aborted) continue;
        const std::optional<double> v = extract(t);
        if (!v) continue;
        auto& s = sums[t.kind][t.seed];
        s.first += *v;
        s.second += 1;
    }
    std::set<std::uint64_t> common;
    bool first = true;
    for (const auto& [kind, seeds] : sums) {
        std::set<std::uint64_t> ids;
        for (const auto& [seed, s] : seeds) ids.insert(seed);
        if (first) {
            common = ids;
            first = false;
        } else {
            std::set<std::uint64_t> keep;
            std::set_intersection(common.begin(), common.end(), ids.begin(), ids.end(), std::inserter(keep, keep.end()));
            common = keep;
        }
    }
    ConditionGroups groups;
    for (const auto& [kind, seeds] : sums) {
        for (const auto& [seed, s] : seeds) {
            if (common.count(seed)) groups[kind][seed] = s.first / s.second;
        }
    }
    return groups;
}

ReportTable comparison_table(const std::string& title, const std::vector<TrialMetrics>& trials,
                             const std::vector<MetricColumn>& columns, PairedTest test) {
    ReportTable table;
    table.title = title;
    for (std::size_t i = 0; i < kAllConditions.size(); ++i) {
        for (std::size_t j = i + 1; j < kAllConditions.size(); ++j) {
            table.row_labels.push_back(std::string(display_name(kAllConditions[i])) + " vs " +
                                       std::string(display_name(kAllConditions[j])));
        }
    }
    table.cells.assign(table.row_labels.size(), std::vector<std::string>(columns.size(), "n/a"));
    for (std::size_t c = 0; c < columns.size(); ++c) {
        table.columns.push_back(columns[c].name);
        const ConditionGroups groups = group_by_condition(trials, columns[c].extract);
        std::size_t pairs = 0;
        bool usable = groups.size() >= 2;
        for (const auto& [kind, values] : groups) {
            pairs = values.size();
            usable = usable && !values.empty();
        }
        table.pairs.push_back(usable ? pairs : 0);
        if (!usable) continue;
        for (const ComparisonRow& row : compare_conditions(groups, test)) {
            const auto it = std::find(table.row_labels.begin(), table.row_labels.end(), row.label());
            table.cells[static_cast<std::size_t>(it - table.row_labels.begin())][c] = row.summary();
        }
    }
    return table;
}

std::vector<ReportTable> standard_tables(const std::vector<TrialMetrics>& trials, PairedTest test) {
    return {
        comparison_table("performance", trials, {{"PA", pa}, {"ToT", tot}}, test),
        comparison_table("perception", trials, {{"delta_visual", dv}, {"delta_haptic", dh}, {"delta_gap", dgap}}, test),
        comparison_table("cognitive_load", trials, {{"D_pickup", d_pickup}, {"D_dropoff", d_dropoff}}, test),
        comparison_table("tlx", trials,
                         {{"total", tlx_total}, {"confidence", tlx_confidence}, {"frustration", tlx_frustration}}, test),
    };
}

std::string format_table(const ReportTable& table) {
    std::ostringstream out;
    out << "Comparison";
    for (const std::string& c : table.columns) out << '\t' << c;
    out << '\n';
    for (std::size_t r = 0; r < table.row_labels.size(); ++r) {
        out << table.row_labels[r];
        for (const std::string& v : table.cells[r]) out << '\t' << v;
        out << '\n';
    }
    out << "pairs";
    for (std::size_t p : table.pairs) out << '\t' << p;
    out << '\n';
    return out.str();
}

std::string format_metrics_csv(const std::vector<TrialMetrics>& trials) {
    std::ostringstream out;
    out << "condition,kind,visual_delay_ms,haptic_delay_ms,seed,aborted,complete,placed,pa_m,tot_s,"
           "confirmation_points,delta_visual_ms,delta_haptic_ms,delta_gap_ms,d_pickup,d_dropoff,sax_offset_ms,"
           "light_warning,tlx_total,tlx_confidence,tlx_frustration\n";
    for (const TrialMetrics& m : trials) {
        out << m.label << ',' << to_string(m.kind) << ',' << m.visual_delay << ',' << m.haptic_delay << ',' << m.seed
            << ',' << (m.aborted ? 1 : 0) << ',' << (m.performance.complete ? 1 : 0) << ','
            << m.performance.cubes.size() << ',' << cell(pa(m)) << ',' << format_double(m.performance.time_on_task)
            << ',' << m.confirmation_points << ',' << cell(dv(m)) << ',' << cell(dh(m)) << ',' << cell(dgap(m)) << ','
            << cell(d_pickup(m)) << ',' << cell(d_dropoff(m)) << ','
            << (m.pupil ? std::to_string(m.pupil->sax_offset_ms) : std::string()) << ','
            << (m.pupil ? (m.pupil->light_warning ? "1" : "0") : "") << ',' << cell(m.tlx_total) << ','
            << cell(m.tlx_confidence) << ',' << cell(m.tlx_frustration) << '\n';
    }
    return out.str();
}

void write_report(const std::vector<TrialMetrics>& trials, const fs::path& dir, PairedTest test) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError(dir.string(), ec.message());
    auto write = [&](const fs::path& p, const std::string& text) {
        std::ofstream out(p, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError(p.string(), "cannot open for writing");
        out << text;
        if (!out) throw IoError(p.string(), "write failed");
    };
    write(dir / "metrics.csv", format_metrics_csv(trials));
    for (const ReportTable& t : standard_tables(trials, test)) write(dir / (t.title + ".tsv"), format_table(t));

    std::ostringstream pipeline;
    const PupilOptions defaults;
    pipeline << "pupil pipeline: blink_correction -> hampel -> light_reflex -> baseline -> sax_alignment -> aggregation\n"
             << "blink window ms: " << defaults.blink.min_duration << "-" << defaults.blink.max_duration << '\n'
             << "hampel half-window: " << defaults.hampel.half_window << ", threshold: " << defaults.hampel.n_sigma
             << " sigma\n"
             << "light reflex model: a + b*exp(-c*L), b*exp(-c*L) removed\n"
             << "baseline: mean of first " << kBaselineSamples << " valid samples\n"
             << "sax: alphabet " << defaults.sax_alphabet << ", " << defaults.sax_word_fraction
             << " samples per segment, max lag " << defaults.max_alignment << " ms\n"
             << "stages: " << defaults.phase_length << " ms from first grasp; " << defaults.phase_length
             << " ms up to last placement\n"
             << "test: " << (test == PairedTest::wilcoxon ? "Wilcoxon signed-rank" : "paired t") << ", alpha 0.05\n";
    for (const TrialMetrics& m : trials) {
        if (!m.pupil_error.empty()) pipeline << m.label << " seed " << m.seed << ": " << m.pupil_error << '\n';
    }
    write(dir / "pipeline.txt", pipeline.str());
}

} // namespace telesim
