#pragma once

#include "telesim/sim_time.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace telesim {

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

struct PupilSample {
    SimTime timestamp = 0;
    double diameter = kMissing; // mm; NaN while the eye is closed
    double luminance = 0.0;     // display luminance of the frame shown at this sample
    bool flagged = false;       // missing run that blink correction refused to fill

    bool valid() const { return !std::isnan(diameter); }
};

// ---- blink correction ----------------------------------------------------

struct BlinkWindow {
    SimTime min_duration = 400; // ms
    SimTime max_duration = 600;
};

/// Fills missing runs whose flanking valid samples are [min, max] ms apart by
/// linear interpolation; other runs stay missing and are flagged.
/// Throws InputError on non-increasing timestamps, UnusableTraceError when no
/// sample is valid.
std::vector<PupilSample> correct_blinks(std::span<const PupilSample> samples, BlinkWindow window = {});

// ---- Hampel --------------------------------------------------------------

struct HampelOptions {
    std::size_t half_window = 15;
    double n_sigma = 3.0;
};

inline constexpr double kMadScale = 1.4826;

/// Sliding-window outlier replacement. The window is truncated at the series
/// ends; NaN entries are skipped and passed through. Parallel over samples.
std::vector<double> hampel_filter(std::span<const double> x, HampelOptions options = {});
/// Serial reference of hampel_filter; outputs are identical.
std::vector<double> hampel_filter_serial(std::span<const double> x, HampelOptions options = {});
std::vector<PupilSample> hampel_filter(std::span<const PupilSample> samples, HampelOptions options = {});

// ---- luminance -------------------------------------------------------------

/// Interleaved 8-bit RGB image.
struct RgbFrame {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> rgb;

    RgbFrame() = default;
    RgbFrame(int w, int h) : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3, 0) {}
    std::size_t pixels() const { return static_cast<std::size_t>(width) * height; }
};

double pixel_luminance(double r, double g, double b);
/// Mean pixel luminance of the frame. Parallel reduction.
double frame_luminance(const RgbFrame& frame);
double frame_luminance_serial(const RgbFrame& frame);

// ---- light reflex -----------------------------------------------------------

/// d_lum(L) = a + b * exp(-c * L)
struct LightReflexFit {
    double a = 0.0;
    double b = 0.0;
    double c = 0.0;
    double sse = 0.0;
    bool degenerate = false;

    double operator()(double luminance) const { return a + b * std::exp(-c * luminance); }
};

struct LightReflexResult {
    std::vector<PupilSample> samples;
    LightReflexFit fit;
    bool warning = false; // degenerate luminance; samples passed through unchanged
};

LightReflexFit fit_light_reflex(std::span<const PupilSample> samples);
/// Subtracts the fitted luminance-driven term b * exp(-c * L); the constant a
/// stays in the signal for baseline correction to remove. Throws InputError on
/// an empty trace.
LightReflexResult compensate_light_reflex(std::span<const PupilSample> samples);

// ---- baseline ---------------------------------------------------------------

inline constexpr std::size_t kBaselineSamples = 90;

/// Subtracts the mean of the first `count` valid samples. Throws
/// InsufficientBaselineError with fewer valid samples.
std::vector<PupilSample> baseline_correct(std::span<const PupilSample> samples,
                                          std::size_t count = kBaselineSamples);

// ---- SAX --------------------------------------------------------------------

/// Gaussian breakpoints splitting N(0,1) into `alphabet_size` equiprobable bins.
std::vector<double> sax_breakpoints(int alphabet_size);

struct SaxWord {
    std::vector<int> symbols;                 // one per segment, 0 .. alphabet_size-1
    std::vector<std::size_t> segment_starts;  // sample index of each segment start
    std::size_t length = 0;                   // samples covered
    int alphabet_size = 0;

    /// Symbol of each sample (segment symbol expanded back to sample rate).
    std::vector<int> expand() const;
};

/// z-normalize, piecewise-aggregate to `word_length` segments, discretize.
/// Missing samples are skipped when averaging. Throws InputError when the
/// series is shorter than word_length.
SaxWord sax_transform(std::span<const double> series, std::size_t word_length, int alphabet_size);

struct SaxAlignment {
    SaxWord series;
    SaxWord reference;
    long offset = 0; // samples; series[i + offset] lines up with reference[i]
    double score = 0.0;
};

/// Symbolizes both sequences and picks the lag in [-max_lag, max_lag] that
/// maximizes the mean product of centered per-sample symbols. Ties go to the
/// smallest |lag|.
SaxAlignment sax_align(std::span<const double> series, std::span<const double> reference,
                       std::size_t word_length, int alphabet_size, std::size_t max_lag);

// ---- aggregation --------------------------------------------------------------

/// Sum of the above-baseline values; negative and missing samples contribute nothing.
double aggregate_dilation(std::span<const double> dilation);
/// Same over the samples whose timestamps lie in [start, end).
double aggregate_dilation(std::span<const PupilSample> samples, SimTime start, SimTime end);

} // namespace telesim
